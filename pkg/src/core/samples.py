"""Sampler output containers."""

import json
from typing import Iterable, Iterator, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from src.core.errors import ContractError

Bits = Tuple[int, ...]

# assignment codes are stored as unsigned integers
MAX_CODE_BITS = 63


def bits_to_str(bits: Sequence[int]) -> str:
    return "".join("1" if b else "0" for b in bits)


def str_to_bits(text: str) -> Bits:
    if any(ch not in "01" for ch in text):
        raise ValueError(f"Bitstring may only contain 0/1, got {text!r}")
    return tuple(int(ch) for ch in text)


class Sample(BaseModel):
    """One distinct assignment returned by a sampler."""

    model_config = ConfigDict(frozen=True)

    bits: Bits
    energy: float
    multiplicity: int = Field(default=1, ge=1)

    @field_validator("bits")
    @classmethod
    def _binary_only(cls, v: Bits) -> Bits:
        if any(b not in (0, 1) for b in v):
            raise ValueError("Sample bits must be 0 or 1")
        return v


class PrefixGroup(NamedTuple):
    """Samples sharing their leading bits."""

    bits: Bits
    count: int
    energy_sum: float


class SampleSet:
    """Distinct samples sorted ascending by energy, ties broken by bitstring.

    Storage is columnar: ``energies`` and ``counts`` arrays plus either a dense
    ``(k, n)`` state matrix or, for enumerated spectra, one integer code per
    sample with x_i = bit i of the code. ``Sample`` objects are only built for
    the entries a caller reads.
    """

    def __init__(
        self,
        energies: np.ndarray,
        counts: np.ndarray,
        num_vars: int,
        source: str,
        states: Optional[np.ndarray] = None,
        codes: Optional[np.ndarray] = None,
    ):
        if (states is None) == (codes is None):
            raise ContractError("a SampleSet is backed by exactly one of states or codes")
        size = energies.shape[0]
        backing = states if states is not None else codes
        if backing.shape[0] != size or counts.shape[0] != size:
            raise ContractError("energies, counts and states must have one entry per sample")
        if size and np.any(np.diff(energies) < 0):
            raise ContractError("SampleSet samples must be sorted by energy")
        if size and counts.min() < 1:
            raise ContractError("sample multiplicities must be at least 1")
        self.energies = energies
        self.counts = counts
        self.num_vars = num_vars
        self.source = source
        self._states = states
        self._codes = codes

    @classmethod
    def empty(cls, num_vars: int = 0, source: str = "unknown") -> "SampleSet":
        return cls(
            np.empty(0), np.empty(0, dtype=np.int64), num_vars, source,
            states=np.empty((0, num_vars), dtype=np.int8),
        )

    @classmethod
    def from_arrays(
        cls, states: np.ndarray, energies: np.ndarray, counts: np.ndarray, source: str
    ) -> "SampleSet":
        """Distinct rows of ``states`` with their energies and counts, in any order."""
        states = np.asarray(states, dtype=np.int8)
        energies = np.asarray(energies, dtype=np.float64)
        counts = np.asarray(counts, dtype=np.int64)
        if states.shape[0] == 0:
            return cls.empty(states.shape[1] if states.ndim == 2 else 0, source)
        # lexsort keys run last-to-first: energy, then bit 0, bit 1, ...
        keys = tuple(states[:, j] for j in range(states.shape[1] - 1, -1, -1)) + (energies,)
        order = np.lexsort(keys)
        return cls(energies[order], counts[order], states.shape[1], source, states=states[order])

    @classmethod
    def from_records(cls, records: Iterable[Tuple[Bits, float, int]], source: str) -> "SampleSet":
        """Aggregate (bits, energy, count) records, merging duplicate bitstrings."""
        merged = {}
        for bits, energy, count in records:
            bits = tuple(bits)
            if bits in merged:
                merged[bits][1] += count
            else:
                merged[bits] = [energy, count]
        if not merged:
            return cls.empty(source=source)
        widths = {len(bits) for bits in merged}
        if len(widths) != 1:
            raise ContractError(f"records mix bitstring lengths {sorted(widths)}")
        states = np.array(list(merged), dtype=np.int8).reshape(len(merged), widths.pop())
        energies = np.array([e for e, _ in merged.values()], dtype=np.float64)
        counts = np.array([c for _, c in merged.values()], dtype=np.int64)
        return cls.from_arrays(states, energies, counts, source)

    @classmethod
    def from_spectrum(
        cls,
        spectrum: np.ndarray,
        num_vars: int,
        source: str,
        top_k: Optional[int] = None,
    ) -> "SampleSet":
        """Lowest ``top_k`` entries of an energy spectrum indexed by integer assignment.

        Bit i of assignment k is x_i. Equal energies are ordered by k, so the
        boundary of a truncated spectrum is deterministic.
        """
        if num_vars > MAX_CODE_BITS:
            raise ContractError(f"spectra are limited to {MAX_CODE_BITS} variables, got {num_vars}")
        total = spectrum.size
        k = total if top_k is None else max(0, min(int(top_k), total))
        if k == 0:
            return cls.empty(num_vars, source)
        if k >= total:
            order = np.argsort(spectrum, kind="stable")
        else:
            kth = np.partition(spectrum, k - 1)[k - 1]
            below = np.flatnonzero(spectrum < kth)
            ties = np.flatnonzero(spectrum == kth)[: k - below.size]
            chosen = np.concatenate([below, ties])
            order = chosen[np.lexsort((chosen, spectrum[chosen]))]
        codes = order.astype(np.uint32 if num_vars <= 32 else np.uint64)
        return cls(
            spectrum[order], np.broadcast_to(np.int64(1), (k,)), num_vars, source, codes=codes
        )

    def __len__(self) -> int:
        return self.energies.shape[0]

    def __bool__(self) -> bool:
        return len(self) > 0

    def state_block(self, start: int, stop: int) -> np.ndarray:
        """Bits of samples ``start:stop`` as an int8 matrix."""
        if self._states is not None:
            return self._states[start:stop]
        shifts = np.arange(self.num_vars, dtype=np.uint64)
        codes = self._codes[start:stop].astype(np.uint64)
        return ((codes[:, None] >> shifts) & np.uint64(1)).astype(np.int8)

    def __getitem__(self, i: int) -> Sample:
        if not -len(self) <= i < len(self):
            raise IndexError(f"sample {i} out of range for {len(self)} samples")
        i %= len(self)
        row = self.state_block(i, i + 1)[0]
        return Sample.model_construct(
            bits=tuple(int(b) for b in row),
            energy=float(self.energies[i]),
            multiplicity=int(self.counts[i]),
        )

    def __iter__(self) -> Iterator[Sample]:
        block = 4096
        for start in range(0, len(self), block):
            rows = self.state_block(start, start + block)
            for offset, row in enumerate(rows):
                i = start + offset
                yield Sample.model_construct(
                    bits=tuple(int(b) for b in row),
                    energy=float(self.energies[i]),
                    multiplicity=int(self.counts[i]),
                )

    @property
    def samples(self) -> List[Sample]:
        """Every sample as a ``Sample``; prefer iteration or ``group_by_prefix`` on large sets."""
        return list(self)

    @property
    def first(self) -> Sample:
        if not len(self):
            raise ContractError("empty SampleSet has no lowest-energy sample")
        return self[0]

    @property
    def total_multiplicity(self) -> int:
        return int(self.counts.sum())

    def group_by_prefix(self, width: int) -> List[PrefixGroup]:
        """Samples grouped by their first ``width`` bits, lowest energy group first."""
        if not 0 <= width <= self.num_vars:
            raise ContractError(f"prefix width {width} outside [0, {self.num_vars}]")
        if not len(self):
            return []
        if self._codes is not None:
            mask = (1 << width) - 1
            keys = self._codes & self._codes.dtype.type(mask)
            uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
            prefixes = ((uniq.astype(np.uint64)[:, None] >> np.arange(width, dtype=np.uint64)) & np.uint64(1))
        else:
            uniq, first, inverse = np.unique(
                self._states[:, :width], axis=0, return_index=True, return_inverse=True
            )
            prefixes = uniq
        inverse = inverse.reshape(-1)
        counts = np.bincount(inverse, weights=self.counts, minlength=first.size)
        energy_sums = np.bincount(inverse, weights=self.energies * self.counts, minlength=first.size)
        return [
            PrefixGroup(
                bits=tuple(int(b) for b in prefixes[g]),
                count=int(round(counts[g])),
                energy_sum=float(energy_sums[g]),
            )
            for g in np.argsort(first, kind="stable")
        ]

    def to_json_records(self) -> List[dict]:
        return [
            {"bits": bits_to_str(s.bits), "energy": s.energy, "count": s.multiplicity}
            for s in self
        ]

    def dumps(self) -> str:
        return json.dumps(self.to_json_records(), indent=2)

    @classmethod
    def from_json_records(cls, records: List[dict], source: str = "file") -> "SampleSet":
        return cls.from_records(
            ((str_to_bits(r["bits"]), float(r["energy"]), int(r["count"])) for r in records),
            source=source,
        )

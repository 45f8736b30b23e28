"""Senone-to-monophone posterior compression.

Output posteriors live over S senone classes; the feedback path only needs
the much smaller monophone identity, so posterior mass is summed over all
senones sharing a monophone. Summation runs in ascending senone-index order
(np.bincount iterates the input array in order), so results are
bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError


@dataclass(frozen=True)
class SenoneMap:
    """Surjective map senone id -> monophone id, as a length-S array."""

    mapping: np.ndarray

    def __post_init__(self):
        mapping = np.ascontiguousarray(self.mapping, dtype=np.int64)
        object.__setattr__(self, "mapping", mapping)
        if mapping.ndim != 1 or mapping.shape[0] < 1:
            raise DataError("mapping must be a non-empty 1-d array")
        if mapping.min() < 0:
            raise DataError("monophone ids must be nonnegative")
        m = int(mapping.max()) + 1
        present = np.zeros(m, dtype=bool)
        present[mapping] = True
        if not present.all():
            missing = int(np.flatnonzero(~present)[0])
            raise DataError(
                f"map is not surjective: monophone id {missing} has no senone"
            )

    @property
    def num_senones(self) -> int:
        return self.mapping.shape[0]

    @property
    def num_monophones(self) -> int:
        return int(self.mapping.max()) + 1

    def __eq__(self, other) -> bool:
        return isinstance(other, SenoneMap) and np.array_equal(self.mapping, other.mapping)


def compress(posterior: np.ndarray, smap: SenoneMap) -> np.ndarray:
    """Sum posterior mass per monophone: out[m] = sum of posterior[s] over
    senones s mapped to m. Preserves total mass and nonnegativity."""
    posterior = np.asarray(posterior, dtype=np.float64)
    if posterior.shape != (smap.num_senones,):
        raise DataError(
            f"posterior length {posterior.shape} does not match "
            f"{smap.num_senones} senones"
        )
    return np.bincount(smap.mapping, weights=posterior, minlength=smap.num_monophones)


def one_hot_compress(label: int, smap: SenoneMap) -> np.ndarray:
    """Indicator vector of the monophone of a senone label."""
    if not 0 <= label < smap.num_senones:
        raise DataError(f"label {label} out of range for {smap.num_senones} senones")
    out = np.zeros(smap.num_monophones)
    out[smap.mapping[label]] = 1.0
    return out


def load_map(path) -> SenoneMap:
    """Read a two-column text map: one 'senone_id monophone_id' line per senone.

    Senone ids must cover 0..S-1 exactly; monophone ids must cover 0..M-1
    (M inferred as 1 + max id)."""
    entries: dict[int, int] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'senone_id monophone_id'")
            try:
                s, m = int(parts[0]), int(parts[1])
            except ValueError:
                raise DataError(f"{path}:{lineno}: ids must be integers") from None
            if s < 0 or m < 0:
                raise DataError(f"{path}:{lineno}: ids must be nonnegative")
            if s in entries:
                raise DataError(f"{path}:{lineno}: duplicate senone id {s}")
            entries[s] = m
    if not entries:
        raise DataError(f"{path}: empty senone map")
    num_senones = max(entries) + 1
    if len(entries) != num_senones:
        missing = next(s for s in range(num_senones) if s not in entries)
        raise DataError(f"{path}: missing senone id {missing} (expected 0..{num_senones - 1})")
    mapping = np.array([entries[s] for s in range(num_senones)], dtype=np.int64)
    try:
        return SenoneMap(mapping)
    except DataError as e:
        raise DataError(f"{path}: {e}") from None


def save_map(smap: SenoneMap, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for s, m in enumerate(smap.mapping):
            f.write(f"{s} {int(m)}\n")

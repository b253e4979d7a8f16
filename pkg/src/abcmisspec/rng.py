"""Splittable, counter-based random streams keyed by a path of integers.

A :class:`SeedPath` names a stream as ``(master_seed, path)``. The stream is a
Philox generator whose key is derived by hashing the master seed together with
the path, so two paths never share state and the stream a given path yields
does not depend on which worker asks for it or in what order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

_MASK64 = (1 << 64) - 1
# rng.random() returns k * 2**-53 for k in [0, 2**53); shifting by half a step
# keeps uniforms strictly inside (0, 1) so the inverse CDF stays finite.
_HALF_ULP = 2.0**-54


@dataclass(frozen=True)
class SeedPath:
    master_seed: int
    path: tuple[int, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "master_seed", int(self.master_seed) & _MASK64)
        path = tuple(int(p) for p in self.path)
        if any(p < 0 for p in path):
            raise ValueError("seed path entries must be non-negative")
        object.__setattr__(self, "path", path)

    def child(self, *indices: int) -> "SeedPath":
        return SeedPath(self.master_seed, self.path + tuple(indices))

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=self.path)
        return np.random.Generator(np.random.Philox(ss))

    def __str__(self) -> str:
        return f"{self.master_seed}:{'/'.join(map(str, self.path))}"


def as_seed(seed: "SeedPath | int") -> SeedPath:
    return seed if isinstance(seed, SeedPath) else SeedPath(int(seed))


def uniform(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform deviates on the open interval (0, 1)."""
    return rng.random(size) + _HALF_ULP


def standard_normal(rng: np.random.Generator, size) -> np.ndarray:
    """Standard normal deviates by inversion, one uniform per deviate."""
    return ndtri(uniform(rng, size))

"""Seed-derived Wiener increments with exact dyadic coarsening.

Every Monte Carlo sample owns one fine-grid increment array; coarser
discretization levels are obtained by block-summing the same array, so all
levels and the reference solve share one driving path.

Stream derivation: master seed and sample index are mixed through two
rounds of splitmix64-style multiply-xorshift avalanching into a 128-bit
Philox key.  Standard normals come from inverse-CDF transformation of
counter-based uniforms (u = (bits >> 11 + 0.5) * 2^-53, z = ndtri(u));
this transform is frozen so a given build is bit-reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.random import Generator, Philox
from scipy.special import ndtri

__all__ = ["PathBundle", "derive_stream", "sample_fine_increments", "aggregate", "partial_sums"]

_MASK = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _mix(master_seed: int, word: int) -> int:
    return _splitmix64(_splitmix64(master_seed & _MASK) ^ _splitmix64(word & _MASK))


@dataclass(frozen=True)
class PathBundle:
    """Fine-grid Wiener increments of one sample: entry (i, j) ~ N(0, 1/n_ref)."""

    master_seed: int
    sample_index: int
    n_ref: int
    dim: int
    fine_increments: np.ndarray  # shape (dim, n_ref)


def derive_stream(master_seed: int, sample_index: int) -> Generator:
    """Child generator for one sample; distinct indices give decorrelated streams."""
    key = (_mix(master_seed, 2 * sample_index) << 64) | _mix(master_seed, 2 * sample_index + 1)
    return Generator(Philox(key=key))


def standard_normals(gen: Generator, size: int) -> np.ndarray:
    """Inverse-CDF normals from 64-bit stream words (frozen sampling transform)."""
    bits = gen.integers(0, 1 << 64, size=size, dtype=np.uint64)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0 ** -53
    return ndtri(u)


def sample_fine_increments(master_seed: int, sample_index: int, n_ref: int, dim: int) -> PathBundle:
    """Draw the dim x n_ref increment array of one sample.

    Generation order is time-major, then dimension, so the layout is
    independent of how the array is later viewed.
    """
    if n_ref < 1 or (n_ref & (n_ref - 1)) != 0:
        raise ValueError("n_ref must be a power of two")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    gen = derive_stream(master_seed, sample_index)
    z = standard_normals(gen, n_ref * dim).reshape(n_ref, dim)
    inc = (z * np.sqrt(1.0 / n_ref)).T.copy()
    return PathBundle(master_seed, sample_index, n_ref, dim, inc)


def aggregate(bundle: PathBundle, n: int) -> np.ndarray:
    """Block-sum the fine increments to a coarser dyadic grid of size n."""
    if n < 1 or (n & (n - 1)) != 0 or bundle.n_ref % n != 0:
        raise ValueError(f"n = {n} must be a power of two dividing n_ref = {bundle.n_ref}")
    r = bundle.n_ref // n
    return bundle.fine_increments.reshape(bundle.dim, n, r).sum(axis=2)


def partial_sums(bundle: PathBundle) -> np.ndarray:
    """Wiener path values at the fine nodes: shape (dim, n_ref + 1), W(0) = 0."""
    out = np.zeros((bundle.dim, bundle.n_ref + 1))
    np.cumsum(bundle.fine_increments, axis=1, out=out[:, 1:])
    return out

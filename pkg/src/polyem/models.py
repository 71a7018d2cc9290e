"""Catalog of SDE problems behind one split-drift coefficient interface.

A problem carries drift b(t, x) = f(t) * G(x) + H(x) with the shared
singular time factor f, plus a diffusion matrix sigma(x).  All coefficient
callables are vectorized over a batch of states: they take an (m, dim)
array and return (m, dim) (or (m, dim, dim) for sigma).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .modulus import ModulusSpec, g_series, level_weights, psi

__all__ = [
    "SdeProblem",
    "example_a",
    "example_b",
    "lower_bound_problem",
    "constant_sigma_problem",
    "problem_by_name",
    "eval_drift_parts",
    "eval_sigma",
]


@dataclass(frozen=True)
class SdeProblem:
    """Immutable SDE problem description with split drift f(t)G(x) + H(x)."""

    name: str
    dim: int
    initial_state: np.ndarray
    G: Callable[[np.ndarray], np.ndarray]
    H: Callable[[np.ndarray], np.ndarray]
    sigma: Callable[[np.ndarray], np.ndarray]
    has_singular_part: bool
    classical_em_allowed: bool
    # id of a compiled stepping kernel, or None for the generic python loop
    kernel: Optional[str] = None
    spec: Optional[ModulusSpec] = None


def _batch(x: np.ndarray, dim: int) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        if x.shape[0] != dim:
            raise ValueError(f"state has length {x.shape[0]}, expected {dim}")
        return x[None, :], True
    if x.ndim != 2 or x.shape[1] != dim:
        raise ValueError(f"state batch has shape {x.shape}, expected (m, {dim})")
    return x, False


def example_a(spec: ModulusSpec = ModulusSpec()) -> SdeProblem:
    """1-D problem: drift f(t) g_K(x), diffusion 1 + 0.5 tanh(x), X0 = 0."""

    def G(x):
        return g_series(x[:, 0], spec)[:, None]

    def H(x):
        return np.zeros_like(x)

    def sigma(x):
        return (1.0 + 0.5 * np.tanh(x[:, 0]))[:, None, None]

    return SdeProblem(
        name="A", dim=1, initial_state=np.zeros(1),
        G=G, H=H, sigma=sigma,
        has_singular_part=True, classical_em_allowed=False,
        kernel="example_a", spec=spec,
    )


def example_b(spec: ModulusSpec = ModulusSpec()) -> SdeProblem:
    """2-D coupled problem: singular drift through mixed arguments, bounded
    extra drift from tanh/psi pieces, symmetric non-diagonal diffusion."""

    def G(x):
        x1, x2 = x[:, 0], x[:, 1]
        return np.stack(
            [g_series(x1 + 0.35 * x2, spec), g_series(x2 - 0.25 * x1, spec)],
            axis=1,
        )

    def H(x):
        x1, x2 = x[:, 0], x[:, 1]
        h1 = 0.25 * np.tanh(x2) + 0.1 * psi(x1 - x2)
        h2 = psi(x2) + 0.12 * np.tanh(x1) + 0.08 * psi(x1 + x2)
        return np.stack([h1, h2], axis=1)

    def sigma(x):
        x1, x2 = x[:, 0], x[:, 1]
        m = x.shape[0]
        out = np.empty((m, 2, 2))
        out[:, 0, 0] = 1.0 + 0.25 * np.tanh(x1)
        out[:, 1, 1] = 1.0 + 0.25 * np.tanh(x2)
        off = 0.25 * 0.3 * np.tanh(x1 + x2)
        out[:, 0, 1] = off
        out[:, 1, 0] = off
        return out

    return SdeProblem(
        name="B", dim=2, initial_state=np.zeros(2),
        G=G, H=H, sigma=sigma,
        has_singular_part=True, classical_em_allowed=False,
        kernel="example_b", spec=spec,
    )


def lower_bound_problem() -> SdeProblem:
    """Driftless 1-D problem with sigma(x) = 2 + tanh(x); order-1/2 optimality case."""

    def zero(x):
        return np.zeros_like(x)

    def sigma(x):
        return (2.0 + np.tanh(x[:, 0]))[:, None, None]

    return SdeProblem(
        name="lower", dim=1, initial_state=np.zeros(1),
        G=zero, H=zero, sigma=sigma,
        has_singular_part=False, classical_em_allowed=True,
        kernel="lower_bound",
    )


def constant_sigma_problem(dim: int = 1, c: float = 1.0) -> SdeProblem:
    """Test hook: zero drift, constant scalar diffusion c*I.  The scheme is
    exact for this problem, so all strong errors must vanish."""

    def zero(x):
        return np.zeros_like(x)

    def sigma(x):
        m = x.shape[0]
        return np.broadcast_to(c * np.eye(dim), (m, dim, dim)).copy()

    return SdeProblem(
        name=f"const{dim}", dim=dim, initial_state=np.zeros(dim),
        G=zero, H=zero, sigma=sigma,
        has_singular_part=False, classical_em_allowed=True,
        kernel=None, spec=None,
    )


_CATALOG = {"A": example_a, "B": example_b}


def problem_by_name(name: str, spec: ModulusSpec = ModulusSpec()) -> SdeProblem:
    if name in _CATALOG:
        return _CATALOG[name](spec)
    if name == "lower":
        return lower_bound_problem()
    raise KeyError(f"unknown problem {name!r}; choose from A, B, lower")


def eval_drift_parts(problem: SdeProblem, x) -> tuple[np.ndarray, np.ndarray]:
    """Split drift evaluation (G(x), H(x)) at a single state or a batch."""
    xb, single = _batch(x, problem.dim)
    g, h = problem.G(xb), problem.H(xb)
    return (g[0], h[0]) if single else (g, h)


def eval_sigma(problem: SdeProblem, x) -> np.ndarray:
    """Diffusion matrix at a single state or a batch."""
    xb, single = _batch(x, problem.dim)
    s = problem.sigma(xb)
    return s[0] if single else s

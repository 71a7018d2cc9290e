"""Time-stepping engines.

The polygonal scheme advances x -> x + w_k G(x) + dt H(x) + sigma(x) dW,
where w_k is the exact integral of the singular time factor over the step;
the classical Euler-Maruyama step replaces w_k G by nothing (it is only
offered for problems whose drift is bounded in time).  A coarse solution
is carried onto the reference grid by evaluating the same frozen-coefficient
interpolant at every fine node.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import backend
from .models import SdeProblem, eval_drift_parts, eval_sigma
from .modulus import level_weights
from .paths import PathBundle, aggregate, partial_sums
from .quadrature import WeightTable

__all__ = [
    "Trajectory",
    "SchemeError",
    "polygonal_step",
    "classical_em_step",
    "solve_on_grid",
    "extend_to_fine",
    "reference_solution",
    "dump_trajectory",
]


class SchemeError(RuntimeError):
    pass


@dataclass(frozen=True)
class Trajectory:
    n: int
    states: np.ndarray  # shape (n + 1, dim)


def _check_finite(states: np.ndarray, problem: SdeProblem):
    if not np.isfinite(states).all():
        k = int(np.argwhere(~np.isfinite(states).all(axis=-1))[0, 0]) if states.ndim > 1 else 0
        raise SchemeError(f"non-finite state while solving problem {problem.name!r} (first bad row {k})")


def polygonal_step(x, w: float, dt: float, dW, problem: SdeProblem) -> np.ndarray:
    """One polygonal update from state x with drift weight w = int f over the step."""
    if dt <= 0 or w < 0:
        raise ValueError("need dt > 0 and w >= 0")
    x = np.asarray(x, dtype=float)
    g, h = eval_drift_parts(problem, x)
    out = x + w * g + dt * h + eval_sigma(problem, x) @ np.asarray(dW, dtype=float)
    _check_finite(out, problem)
    return out


def classical_em_step(x, dt: float, dW, problem: SdeProblem) -> np.ndarray:
    """One classical Euler-Maruyama update; only valid for bounded-in-time drift."""
    if not problem.classical_em_allowed:
        raise SchemeError(f"classical EM not defined for singular drift (problem {problem.name!r})")
    x = np.asarray(x, dtype=float)
    _, h = eval_drift_parts(problem, x)
    out = x + dt * h + eval_sigma(problem, x) @ np.asarray(dW, dtype=float)
    _check_finite(out, problem)
    return out


def _solve_python(problem: SdeProblem, n: int, increments: np.ndarray,
                  weights: WeightTable | None) -> np.ndarray:
    dt = 1.0 / n
    states = np.empty((n + 1, problem.dim))
    states[0] = problem.initial_state
    x = states[0][None, :].copy()
    w = weights.weights if weights is not None else None
    for k in range(n):
        g = problem.G(x)
        h = problem.H(x)
        s = problem.sigma(x)[0]
        wk = w[k] if w is not None else 0.0
        x = x + wk * g + dt * h + (s @ increments[:, k])[None, :]
        states[k + 1] = x[0]
    return states


def solve_on_grid(problem: SdeProblem, n: int, increments: np.ndarray,
                  weights: WeightTable | None, scheme: str = "polygonal") -> Trajectory:
    """Iterate the one-step update over the uniform n-grid.

    increments: (dim, n) Wiener increments; weights: table built for the
    same n (None only when the problem has no singular drift part).
    """
    increments = np.asarray(increments, dtype=float)
    if increments.shape != (problem.dim, n):
        raise ValueError(f"increments shape {increments.shape}, expected {(problem.dim, n)}")
    if problem.has_singular_part:
        if scheme == "classical":
            raise SchemeError(f"classical EM not defined for singular drift (problem {problem.name!r})")
        if weights is None or weights.n != n:
            raise ValueError("weight table for the same n is required for singular drift")
    if scheme == "classical" and not problem.classical_em_allowed:
        raise SchemeError(f"classical EM not defined for singular drift (problem {problem.name!r})")
    if scheme not in ("polygonal", "classical"):
        raise ValueError(f"unknown scheme {scheme!r}")

    k = backend.kernels()
    states = None
    if k is not None:
        if problem.kernel == "example_a":
            a = level_weights(problem.spec)
            states = k.solve_example_a(problem.initial_state[0], increments[0],
                                       weights.weights, a)[:, None]
        elif problem.kernel == "example_b":
            a = level_weights(problem.spec)
            states = k.solve_example_b(problem.initial_state, increments, weights.weights, a)
        elif problem.kernel == "lower_bound":
            states = k.solve_lower_bound(problem.initial_state[0], increments[0])[:, None]
    if states is None:
        states = _solve_python(problem, n, increments, weights)
    _check_finite(states, problem)
    return Trajectory(n=n, states=states)


def extend_to_fine(problem: SdeProblem, coarse: Trajectory, bundle: PathBundle,
                   fine_weights: WeightTable | None) -> np.ndarray:
    """Frozen-coefficient interpolant of a coarse solution at every fine node.

    For a fine node tau in (t_k, t_{k+1}] the value is
    X_k + (F(tau) - F(t_k)) G(X_k) + (tau - t_k) H(X_k) + sigma(X_k)(W_tau - W_{t_k}),
    with F the cumulative fine weight table; returns shape (n_ref + 1, dim).
    """
    n, n_ref = coarse.n, bundle.n_ref
    if n_ref % n != 0:
        raise ValueError(f"coarse n = {n} does not divide n_ref = {n_ref}")
    if problem.has_singular_part and (fine_weights is None or fine_weights.n != n_ref):
        raise ValueError("fine weight table on the n_ref grid is required")
    r = n_ref // n
    W = partial_sums(bundle)                       # (dim, n_ref + 1)
    X = coarse.states[:-1]                         # (n, dim) left nodes
    G = problem.G(X)
    H = problem.H(X)
    S = problem.sigma(X)                           # (n, dim, dim)

    j = np.arange(1, n_ref + 1)
    k = (j - 1) // r                               # coarse interval of each fine node
    out = np.empty((n_ref + 1, problem.dim))
    out[0] = coarse.states[0]
    dW = W[:, j].T - W[:, k * r].T                 # (n_ref, dim)
    tminus = j / n_ref - k / n
    out[1:] = X[k] + tminus[:, None] * H[k] + np.einsum("jab,jb->ja", S[k], dW)
    if problem.has_singular_part:
        F = fine_weights.cumulative
        out[1:] += (F[j] - F[k * r])[:, None] * G[k]
    return out


def reference_solution(problem: SdeProblem, bundle: PathBundle,
                       fine_weights: WeightTable | None) -> Trajectory:
    """Fine-grid solve with the same scheme, standing in for the exact solution."""
    return solve_on_grid(problem, bundle.n_ref, bundle.fine_increments, fine_weights)


def dump_trajectory(traj: Trajectory, path) -> None:
    """Plain-text dump, one row 't x1 [x2 ...]' per node."""
    with open(path, "w") as fh:
        for i, row in enumerate(traj.states):
            cols = " ".join(f"{v:.17g}" for v in row)
            fh.write(f"{i / traj.n:.17g} {cols}\n")

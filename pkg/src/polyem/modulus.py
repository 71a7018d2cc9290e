"""Building blocks of the singular-drift coefficients.

Everything here is a pure function: the log-power modulus ``rho``, the
periodic sawtooth profile, the multiscale series ``g_series`` built from
rescaled sawtooth waves, the square-integrable singular time factor, and
the bounded odd nonlinearity ``psi``.  Numerical diagnostics for slow
variation and the Dini integral condition live here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "ModulusSpec",
    "rho",
    "sawtooth",
    "level_weight",
    "level_weights",
    "g_series",
    "time_factor",
    "psi",
    "lipschitz_diagnostic",
    "check_slow_variation",
    "check_dini_integral",
]


@dataclass(frozen=True)
class ModulusSpec:
    """Parameters of the modulus family: exponent beta and series truncation K."""

    beta: float = 3.0
    K: int = 800

    def __post_init__(self):
        if not self.beta > 2:
            raise ValueError(f"beta must be > 2 (got {self.beta})")
        if self.K < 1:
            raise ValueError(f"K must be >= 1 (got {self.K})")


def rho(r, spec: ModulusSpec = ModulusSpec()):
    """Log-power modulus (log(e/r))^(-beta) on (0, 1]."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0) or np.any(r > 1):
        raise ValueError("rho requires 0 < r <= 1")
    out = (1.0 - np.log(r)) ** (-spec.beta)
    return float(out) if out.ndim == 0 else out


def sawtooth(v):
    """1-periodic, 1-Lipschitz triangle profile: distance of v to the nearest integer."""
    v = np.asarray(v, dtype=float)
    frac = v - np.floor(v)
    out = np.minimum(frac, 1.0 - frac)
    return float(out) if out.ndim == 0 else out


def level_weight(k: int, spec: ModulusSpec = ModulusSpec()) -> float:
    """Amplitude of scale k: rho(2^-k) - rho(2^-(k+1)) >= 0."""
    if k < 1:
        raise ValueError("k must be >= 1")
    return rho(2.0 ** (-k), spec) - rho(2.0 ** (-(k + 1)), spec)


def level_weights(spec: ModulusSpec = ModulusSpec()) -> np.ndarray:
    """All amplitudes a_1..a_K as an array."""
    k = np.arange(1, spec.K + 1)
    return rho(2.0 ** (-k.astype(float)), spec) - rho(2.0 ** (-(k + 1).astype(float)), spec)


def g_series(x, spec: ModulusSpec = ModulusSpec()):
    """Multiscale sawtooth superposition sum_k a_k * sawtooth(2^k x).

    Bounded by rho(1/2)/2 and vanishing at integers.  Terms are summed
    ascending in k (largest amplitudes first).  Once 2^k x is an exact
    integer every later term vanishes too, since doubling preserves
    integrality.
    """
    a = level_weights(spec)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    acc = np.zeros_like(x)
    v = x.copy()
    for k in range(spec.K):
        v = v * 2.0
        frac = v - np.floor(v)
        np.minimum(frac, 1.0 - frac, out=frac)
        acc += a[k] * frac
        if not frac.any():
            break
    return float(acc[0]) if scalar else acc


def time_factor(t):
    """Singular time factor t^(-1/2) (log(e/t))^(-1), square-integrable on (0,1)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t > 1):
        raise ValueError("time_factor requires 0 < t <= 1")
    out = t ** (-0.5) / (1.0 - np.log(t))
    return float(out) if out.ndim == 0 else out


def psi(z):
    """Bounded odd nonlinearity sign(z) |z|^0.4 / (1 + |z|^0.4), with psi(0)=0."""
    z = np.asarray(z, dtype=float)
    az = np.abs(z) ** 0.4
    out = np.sign(z) * az / (1.0 + az)
    return float(out) if out.ndim == 0 else out


def lipschitz_diagnostic(spec: ModulusSpec = ModulusSpec()) -> float:
    """Upper bound sum_k 2^k a_k on the Lipschitz constant of the truncated series.

    Diagnostic only; no tightness claim.
    """
    a = level_weights(spec)
    return float(np.sum(np.exp2(np.arange(1, spec.K + 1, dtype=float)) * a))


def check_slow_variation(spec: ModulusSpec, upsilon_list, r_list) -> dict:
    """Ratios rho(upsilon*r)/rho(r) for decreasing r; they should approach 1.

    Returns a report with the full ratio table and, per upsilon, the
    deviation |ratio - 1| at the smallest r.
    """
    r_list = [float(r) for r in r_list]
    report = {"upsilon": list(upsilon_list), "r": r_list, "ratios": {}, "max_deviation": {}}
    for u in upsilon_list:
        if u <= 0:
            raise ValueError("upsilon must be positive")
        for r in r_list:
            if u * r > 1 or r > 1:
                raise ValueError(f"upsilon*r = {u * r} outside (0, 1]")
        ratios = [rho(u * r, spec) / rho(r, spec) for r in r_list]
        report["ratios"][u] = ratios
        report["max_deviation"][u] = abs(ratios[-1] - 1.0)
    return report


def _dini_closed_form(beta: float, exponent: float, eps: float) -> float:
    # integral_eps^1 (1 - log r)^(-beta*q) / r dr with q = exponent, beta*q > 1
    bq = beta * exponent
    s = 1.0 - math.log(eps)
    return (1.0 - s ** (1.0 - bq)) / (bq - 1.0)


def check_dini_integral(spec: ModulusSpec, exponent: float, eps_list) -> dict:
    """Partial integrals int_eps^1 rho(r)^exponent / r dr for decreasing eps.

    Each partial integral is computed by quadrature and cross-checked
    against the closed-form antiderivative; when exponent*beta > 1 the
    limit 1/(exponent*beta - 1) is finite and the report lists partial
    integrals, successive differences, and that limit.
    """
    from scipy.integrate import quad

    eps_list = [float(e) for e in eps_list]
    partials, closed = [], []
    for eps in eps_list:
        cf = 0.0 if eps >= 1.0 else _dini_closed_form(spec.beta, exponent, eps)
        closed.append(cf)
        if eps >= 1.0:
            partials.append(0.0)
        else:
            val, _ = quad(
                lambda r: (1.0 - math.log(r)) ** (-spec.beta * exponent) / r,
                eps, 1.0, epsabs=1e-13, epsrel=1e-13, limit=200,
            )
            partials.append(val)
    diffs = [b - a for a, b in zip(partials, partials[1:])]
    bq = spec.beta * exponent
    limit = 1.0 / (bq - 1.0) if bq > 1 else math.inf
    return {
        "exponent": exponent,
        "eps": eps_list,
        "partials": partials,
        "closed_form": closed,
        "successive_diffs": diffs,
        "limit": limit,
    }

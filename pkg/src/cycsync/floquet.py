"""Monodromy matrices and Floquet multipliers of the variational system.

Perturbations of the synchronous cycle obey

    U' = (Om_u + g - 2u0 - a v0) U - a u0 V
    V' = (Om_v + 1 - 2v0 - a w0) V - a v0 W
    W' = -a w0 U + (Om_w + 1 - 2w0 - a u0) W

with a complex diagonal shift ``Om``.  The reaction-diffusion case is
``Om_i = -d_i k^2`` and a network mode is ``Om_i = D_i lambda``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .models import LVParams
from .ode import IntegratorConfig, integrate
from .orbit import PeriodicOrbit, find_orbit

__all__ = [
    "StabilityParameter",
    "FloquetSpectrum",
    "EigenFailure",
    "BranchAmbiguity",
    "NoOnset",
    "INSTABILITY_MARGIN",
    "VARIATIONAL_CONFIG",
    "monodromy",
    "monodromy_batch",
    "floquet_spectrum",
    "spectra_batch",
    "trace_integral",
    "rd_spectrum_curve",
    "onset_measure",
    "critical_alpha",
    "CriticalOnset",
    "is_unstable",
    "floquet_mode",
]

INSTABILITY_MARGIN = 1e-7
VARIATIONAL_CONFIG = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-13)
SEGMENT_LENGTH = 1.0
BATCH = 64


class EigenFailure(RuntimeError):
    pass


class NoOnset(RuntimeError):
    pass


class BranchAmbiguity(UserWarning):
    pass


@dataclass(frozen=True)
class StabilityParameter:
    """Per-species complex shifts (Om_u, Om_v, Om_w)."""

    omega: tuple

    def __post_init__(self):
        om = tuple(complex(x) for x in self.omega)
        if len(om) != 3 or not all(np.isfinite(x.real) and np.isfinite(x.imag) for x in om):
            raise ValueError("omega needs three finite complex numbers")
        object.__setattr__(self, "omega", om)

    @classmethod
    def diffusive(cls, d: Sequence[float], k2: float) -> "StabilityParameter":
        return cls(tuple(-di * k2 for di in d))

    @classmethod
    def network(cls, D: Sequence[float], lam: complex) -> "StabilityParameter":
        return cls(tuple(Di * lam for Di in D))

    @classmethod
    def ratio(cls, omega: complex, ratios: Sequence[float] = (1.0, 0.0, 0.0)) -> "StabilityParameter":
        return cls(tuple(r * omega for r in ratios))

    def conj(self) -> "StabilityParameter":
        return StabilityParameter(tuple(x.conjugate() for x in self.omega))

    def as_array(self) -> np.ndarray:
        return np.array(self.omega, dtype=complex)


@dataclass(frozen=True)
class FloquetSpectrum:
    multipliers: np.ndarray
    parameter: StabilityParameter
    orbit_id: str
    log_det: complex = complex("nan")

    @property
    def leading_modulus(self) -> float:
        return float(abs(self.multipliers[0]))

    @property
    def leading(self) -> complex:
        return complex(self.multipliers[0])

    def unstable(self, margin: float = INSTABILITY_MARGIN) -> bool:
        return is_unstable(self.leading_modulus, margin)


def is_unstable(modulus, margin: float = INSTABILITY_MARGIN):
    return np.asarray(modulus) > 1.0 + margin


def _as_omegas(params) -> np.ndarray:
    if isinstance(params, StabilityParameter):
        return params.as_array()[None, :]
    arr = []
    for p in params:
        arr.append(p.as_array() if isinstance(p, StabilityParameter) else np.asarray(p, complex))
    return np.array(arr, dtype=complex).reshape(-1, 3)


def _variational_rhs(orbit: PeriodicOrbit, omegas: np.ndarray) -> Callable:
    jac = orbit.model.jacobian
    shift = omegas[:, :, None]
    real = not np.any(omegas.imag)

    def rhs(t, Y):
        A = jac(orbit(t))
        out = np.matmul(A, Y)
        out += shift.real * Y if real else shift * Y
        return out

    return rhs


def monodromy_batch(orbit: PeriodicOrbit, omegas, cfg: Optional[IntegratorConfig] = None,
                    segment: float = SEGMENT_LENGTH):
    """Monodromy matrices for a batch of shifts.

    Returns ``(M, log_det, log_scale)`` with ``M`` of shape ``(B, 3, 3)``;
    ``M * exp(-log_scale)`` is the integrated, unscaled propagator.  The period is
    cut into segments of about ``segment`` time units; each segment
    propagator starts from the identity, so ``log_det`` (the sum of the
    segment log-determinants) keeps full relative accuracy even when the
    contracting direction makes ``det M`` tiny.
    """
    omegas = _as_omegas(omegas)
    cfg = cfg or VARIATIONAL_CONFIG
    B = omegas.shape[0]
    T = orbit.period
    # Y = exp(c t) Z with c the least damped real shift (when all are damped)
    # keeps strongly damped columns above the absolute tolerance.
    c = np.minimum(omegas.real.max(axis=1), 0.0)
    shifted = omegas - c[:, None]
    real = not np.any(shifted.imag)
    dtype = float if real else complex
    nseg = max(1, int(math.ceil(T / segment)))
    edges = np.linspace(0.0, T, nseg + 1)
    rhs = _variational_rhs(orbit, shifted)
    eye = np.broadcast_to(np.eye(3, dtype=dtype), (B, 3, 3)).copy()
    M = eye.copy()
    log_det = np.zeros(B, dtype=complex)
    for a, b in zip(edges[:-1], edges[1:]):
        phi = integrate(rhs, eye, (a, b), cfg, store=False).y_final
        sign, logabs = np.linalg.slogdet(phi)
        log_det += logabs + np.log(sign.astype(complex))
        M = np.matmul(phi, M)
    log_det += 3.0 * c * T
    return M * np.exp(c * T)[:, None, None], log_det, c * T


def monodromy(orbit: PeriodicOrbit, param: StabilityParameter,
              cfg: Optional[IntegratorConfig] = None) -> np.ndarray:
    """3x3 complex monodromy matrix for one stability parameter."""
    M, _, _ = monodromy_batch(orbit, param, cfg)
    return M[0].astype(complex)


def _order(mu: np.ndarray) -> np.ndarray:
    # descending modulus, then real part, then imaginary part
    keys = np.lexsort((-mu.imag, -mu.real, -np.round(np.abs(mu), 14)))
    return mu[keys]


def _multipliers(M: np.ndarray, log_det: complex, log_scale: float = 0.0) -> np.ndarray:
    scale = np.exp(log_scale)
    try:
        mu = np.linalg.eigvals(M / scale) if scale > 0 else np.linalg.eigvals(M)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
    if not np.all(np.isfinite(mu)):
        raise EigenFailure("non-finite multipliers")
    mu = _order(mu.astype(complex))
    # the contracting multiplier is lost in rounding; recover it from det M
    if np.isfinite(log_det) and abs(mu[2]) < 1e-6 * abs(mu[0]) and mu[0] * mu[1] != 0:
        mu[2] = np.exp(log_det - 3 * log_scale - np.log(mu[0]) - np.log(mu[1]))
        mu = _order(mu)
    return mu * scale if scale > 0 else mu


def spectra_batch(orbit: PeriodicOrbit, params: Iterable, cfg: Optional[IntegratorConfig] = None,
                  batch: int = BATCH) -> list[FloquetSpectrum]:
    """Floquet spectra for many parameters, integrated in fixed-size chunks."""
    plist = [p if isinstance(p, StabilityParameter) else StabilityParameter(tuple(p))
             for p in params]
    out = []
    oid = orbit.orbit_id
    for i in range(0, len(plist), batch):
        chunk = plist[i:i + batch]
        M, ld, ls = monodromy_batch(orbit, chunk, cfg)
        for j, p in enumerate(chunk):
            out.append(FloquetSpectrum(_multipliers(M[j], ld[j], ls[j]), p, oid,
                                       complex(ld[j])))
    return out


def floquet_spectrum(orbit: PeriodicOrbit, param: StabilityParameter,
                     cfg: Optional[IntegratorConfig] = None) -> FloquetSpectrum:
    M, ld, ls = monodromy_batch(orbit, param, cfg)
    return FloquetSpectrum(_multipliers(M[0], ld[0], ls[0]), param, orbit.orbit_id,
                           complex(ld[0]))


def trace_integral(orbit: PeriodicOrbit, param: StabilityParameter, n: int = 20001) -> complex:
    """Integral of the variational trace over one period (composite Simpson)."""
    if n % 2 == 0:
        n += 1
    a, g = orbit.params.alpha, orbit.params.gamma
    r = np.array(orbit.params.r)
    t = np.linspace(0.0, orbit.period, n)
    y = orbit.sample(t)
    u, v, w = y[:, 0], y[:, 1], y[:, 2]
    tr = (r[0] * (g - 2 * u - a * v) + r[1] * (1 - 2 * v - a * w)
          + r[2] * (1 - 2 * w - a * u))
    h = t[1] - t[0]
    simpson = h / 3 * (tr[0] + tr[-1] + 4 * tr[1:-1:2].sum() + 2 * tr[2:-1:2].sum())
    return complex(simpson + orbit.period * sum(param.omega))


def _match(prev: np.ndarray, cur: np.ndarray):
    best, second, best_perm = np.inf, np.inf, None
    for perm in itertools.permutations(range(len(cur))):
        d = float(np.sum(np.abs(cur[list(perm)] - prev)))
        if d < best:
            best, second, best_perm = d, best, perm
        elif d < second:
            second = d
    return cur[list(best_perm)], second - best


def rd_spectrum_curve(orbit: PeriodicOrbit, d: Sequence[float], k2_grid: Sequence[float],
                      cfg: Optional[IntegratorConfig] = None) -> list[FloquetSpectrum]:
    """Spectra along k^2 with branches matched point to point.

    ``multipliers[i]`` of every returned spectrum follows the same continuous
    branch; the first point keeps modulus ordering.
    """
    k2 = np.asarray(k2_grid, dtype=float)
    if k2[0] != 0 or np.any(np.diff(k2) <= 0):
        raise ValueError("k2_grid must start at 0 and increase")
    raw = spectra_batch(orbit, [StabilityParameter.diffusive(d, x) for x in k2], cfg)
    out = [raw[0]]
    prev = raw[0].multipliers
    for s in raw[1:]:
        cur, gap = _match(prev, s.multipliers)
        if gap < 1e-8:
            warnings.warn(f"branch assignment ambiguous at k2={s.parameter.omega}",
                          BranchAmbiguity)
        out.append(FloquetSpectrum(cur, s.parameter, s.orbit_id, s.log_det))
        prev = cur
    return out


def _negative_branch_modulus(spec: FloquetSpectrum) -> float:
    mu = spec.multipliers
    neg = mu[mu.real < 0]
    return float(np.abs(neg).max()) if len(neg) else 0.0


def onset_measure(orbit: PeriodicOrbit, d: Sequence[float] = (1.0, 0.0, 0.0),
                  k2_max: float = 1.2, n: int = 49,
                  cfg: Optional[IntegratorConfig] = None):
    """Largest modulus over k^2 of multipliers with negative real part.

    The time-shift branch near +1 is excluded, so the measure crosses 1
    exactly when a period-doubling band opens.  Returns
    ``(max_modulus, k2_at_max, multiplier_at_max)``.
    """
    grid = np.linspace(0.0, k2_max, n)
    specs = spectra_batch(orbit, [StabilityParameter.diffusive(d, x) for x in grid], cfg)
    vals = np.array([_negative_branch_modulus(s) for s in specs])
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, n - 1)]
    # two rounds of local refinement
    for _ in range(2):
        fine = np.linspace(lo, hi, 9)
        sp = spectra_batch(orbit, [StabilityParameter.diffusive(d, x) for x in fine], cfg)
        fv = np.array([_negative_branch_modulus(s) for s in sp])
        j = int(np.argmax(fv))
        step = fine[1] - fine[0]
        lo, hi = fine[j] - step, fine[j] + step
        best_k2, best_val, best_spec = fine[j], fv[j], sp[j]
    mu = best_spec.multipliers
    neg = mu[mu.real < 0]
    lead = complex(neg[np.argmax(np.abs(neg))]) if len(neg) else complex("nan")
    return float(best_val), float(best_k2), lead


@dataclass(frozen=True)
class CriticalOnset:
    alpha: float
    k: float
    multiplier: complex
    orbit: PeriodicOrbit
    history: tuple


def critical_alpha(alpha_range: Sequence[float], gamma: float = 0.5,
                   d: Sequence[float] = (1.0, 0.0, 0.0),
                   cfg: Optional[IntegratorConfig] = None, tol: float = 1e-4,
                   k2_max: float = 1.2) -> CriticalOnset:
    """Bisection in alpha for the first period-doubling band at finite k.

    Raises :class:`NoOnset` if the band is closed at both ends or open at both.
    """
    lo, hi = float(alpha_range[0]), float(alpha_range[1])
    history = []
    cache = {}

    def measure(a, seed=None):
        orbit = find_orbit(LVParams(a, gamma), seed=seed)
        m, k2, mu = onset_measure(orbit, d, k2_max, cfg=cfg)
        history.append((a, m, k2))
        cache[a] = (orbit, m, k2, mu)
        return orbit, m

    o_lo, m_lo = measure(lo)
    o_hi, m_hi = measure(hi)
    if not (m_lo < 1.0 < m_hi):
        raise NoOnset(f"onset not bracketed: max |mu| = {m_lo:.6f} at {lo}, {m_hi:.6f} at {hi}")
    seed = o_lo.y0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        o_mid, m_mid = measure(mid, seed)
        seed = o_mid.y0
        if m_mid < 1.0:
            lo, m_lo = mid, m_mid
        else:
            hi, m_hi = mid, m_mid
    # linear interpolation of the measure between the final bracket
    a_star = lo + (1.0 - m_lo) * (hi - lo) / (m_hi - m_lo)
    orbit, m, k2, mu = cache[hi] if abs(hi - a_star) < abs(lo - a_star) else cache[lo]
    return CriticalOnset(a_star, math.sqrt(k2), mu, orbit, tuple(history))


def floquet_mode(orbit: PeriodicOrbit, param: StabilityParameter, n_periods: int = 2,
                 samples: int = 2001, cfg: Optional[IntegratorConfig] = None):
    """Perturbation started on the leading eigenvector, followed for ``n_periods``.

    Returns ``(t, mode, base)``: the real part of the perturbation scaled so
    its initial maximum component is 1, and the orbit at the same times.
    """
    M = monodromy(orbit, param, cfg)
    mu, vecs = np.linalg.eig(M)
    v = vecs[:, int(np.argmax(np.abs(mu)))]
    v = v / v[np.argmax(np.abs(v))]
    om = param.as_array()
    real = not np.any(om.imag) and not np.any(v.imag)
    jac = orbit.model.jacobian

    def rhs(t, y):
        return jac(orbit(t)) @ y + om * y

    y0 = v.real.astype(float) if real else v.astype(complex)
    if real:
        om = om.real
    t = np.linspace(0.0, n_periods * orbit.period, samples)
    tr = integrate(rhs, y0, (0.0, t[-1]), cfg or VARIATIONAL_CONFIG)
    return t, np.real(tr(t)), orbit.sample(t)

"""Master stability function over the complex shift plane.

A network mode with coupling eigenvalue ``lam`` and strengths
``D = D_u * (1, r_v, r_w)`` sees the shift ``Om = D_u * lam`` on ``u`` and
``r_v * Om``, ``r_w * Om`` on ``v`` and ``w``.  Polar nodes use
``Om = -R exp(i theta)`` so ``theta in [0, pi/2)`` covers the third quadrant.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from functools import partial
from typing import Optional, Sequence

import numpy as np

from .floquet import INSTABILITY_MARGIN, StabilityParameter, spectra_batch
from .ode import IntegratorConfig
from .orbit import PeriodicOrbit

__all__ = [
    "PolarGrid",
    "CartesianGrid",
    "MSFGrid",
    "ExpansionCoefficients",
    "FitIllConditioned",
    "msf_sweep",
    "leading_moduli",
    "ray_intervals",
    "instability_intervals",
    "expansion_fit",
    "write_grid_csv",
    "write_raster",
    "write_rays_csv",
]

CHUNK = 256


class FitIllConditioned(RuntimeError):
    pass


@dataclass(frozen=True)
class PolarGrid:
    """``R`` in ``(0, r_max]`` (open at 0) and ``theta`` in ``[theta_min, theta_max)``."""

    r_max: float = 1.5
    n_r: int = 300
    theta_min: float = 0.0
    theta_max: float = math.pi / 2
    n_theta: int = 300

    def __post_init__(self):
        if not (self.r_max > 0 and self.n_r >= 1 and self.n_theta >= 1):
            raise ValueError("polar grid needs r_max > 0 and positive resolutions")
        if not (0.0 <= self.theta_min < self.theta_max <= math.pi / 2):
            raise ValueError("polar theta range must lie in [0, pi/2)")

    @property
    def axis0(self) -> np.ndarray:
        return self.r_max * np.arange(1, self.n_r + 1) / self.n_r

    @property
    def axis1(self) -> np.ndarray:
        step = (self.theta_max - self.theta_min) / self.n_theta
        return self.theta_min + step * np.arange(self.n_theta)

    def omegas(self) -> np.ndarray:
        """Complex shifts, shape ``(n_theta, n_r)``."""
        R, th = np.meshgrid(self.axis0, self.axis1)
        return -R * np.exp(1j * th)


@dataclass(frozen=True)
class CartesianGrid:
    re_min: float = -1.5
    re_max: float = 0.0
    n_re: int = 300
    im_min: float = -1.5
    im_max: float = 0.0
    n_im: int = 300

    def __post_init__(self):
        if not (self.re_min < self.re_max and self.im_min < self.im_max):
            raise ValueError("cartesian grid ranges must be increasing")
        if self.n_re < 2 or self.n_im < 2:
            raise ValueError("cartesian grid needs at least 2 nodes per axis")

    @property
    def axis0(self) -> np.ndarray:
        return np.linspace(self.re_min, self.re_max, self.n_re)

    @property
    def axis1(self) -> np.ndarray:
        return np.linspace(self.im_min, self.im_max, self.n_im)

    def omegas(self) -> np.ndarray:
        re, im = np.meshgrid(self.axis0, self.axis1)
        return re + 1j * im


@dataclass(frozen=True)
class MSFGrid:
    spec: object
    omega: np.ndarray  # (n1, n0) complex
    leading_modulus: np.ndarray
    margin: float
    neutral_modulus: float
    params: dict = field(default_factory=dict)

    @property
    def unstable(self) -> np.ndarray:
        return self.leading_modulus > 1.0 + self.margin

    @property
    def kind(self) -> str:
        return "polar" if isinstance(self.spec, PolarGrid) else "cartesian"


def _leading_chunk(orbit, ratios, cfg, omegas):
    params = [StabilityParameter.ratio(z, ratios) for z in omegas]
    return np.array([s.leading_modulus for s in spectra_batch(orbit, params, cfg, len(params))])


def leading_moduli(orbit: PeriodicOrbit, omegas, d_ratios=(1.0, 0.0, 0.0),
                   cfg: Optional[IntegratorConfig] = None, workers: int = 1,
                   chunk: int = CHUNK) -> np.ndarray:
    """Leading multiplier modulus at each shift.

    Shifts are cut into fixed chunks in input order, so the output does not
    depend on ``workers``.
    """
    om = np.asarray(omegas, dtype=complex)
    flat = om.ravel()
    chunks = [flat[i:i + chunk] for i in range(0, flat.size, chunk)]
    fn = partial(_leading_chunk, orbit, tuple(d_ratios), cfg)
    if workers > 1 and len(chunks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(fn, chunks))
    else:
        parts = [fn(c) for c in chunks]
    out = np.concatenate(parts) if parts else np.zeros(0)
    return out.reshape(om.shape)


def msf_sweep(orbit: PeriodicOrbit, grid=None, d_ratios=(1.0, 0.0, 0.0),
              cfg: Optional[IntegratorConfig] = None, workers: int = 1,
              margin: float = INSTABILITY_MARGIN) -> MSFGrid:
    grid = grid or PolarGrid()
    om = grid.omegas()
    mod = leading_moduli(orbit, om, d_ratios, cfg, workers)
    neutral = float(_leading_chunk(orbit, tuple(d_ratios), cfg, np.zeros(1))[0])
    p = orbit.params
    info = {"alpha": p.alpha, "gamma": p.gamma, "d_ratios": list(map(float, d_ratios))}
    return MSFGrid(grid, om, mod, margin, neutral, info)


def instability_intervals(evaluate, xs: np.ndarray, x0: Optional[float] = None,
                          tol: float = 1e-4, margin: float = INSTABILITY_MARGIN,
                          points: int = 7) -> list[tuple]:
    """Maximal intervals where ``evaluate(x) > 1 + margin``.

    ``evaluate`` maps an array of abscissae to moduli.  ``x0``, if given, is a
    stable reference point to the left of ``xs``.  Each verdict change is
    refined by multisection (``points`` interior nodes per round, all
    brackets evaluated in one batch) until the bracket is below ``tol``.
    The upper end of an interval still open at ``xs[-1]`` is ``xs[-1]``.
    """
    xs = np.asarray(xs, dtype=float)
    vals = np.asarray(evaluate(xs), dtype=float)
    bad = vals > 1.0 + margin
    if x0 is not None:
        xs = np.concatenate(([x0], xs))
        bad = np.concatenate(([False], bad))
    idx = np.flatnonzero(bad[1:] != bad[:-1])
    brackets = [[xs[i], xs[i + 1], bool(bad[i])] for i in idx]
    while brackets and max(b[1] - b[0] for b in brackets) > tol:
        probes = np.concatenate([np.linspace(b[0], b[1], points + 2)[1:-1] for b in brackets])
        pv = np.asarray(evaluate(probes), dtype=float) > 1.0 + margin
        for j, b in enumerate(brackets):
            nodes = np.linspace(b[0], b[1], points + 2)
            flags = np.concatenate(([b[2]], pv[j * points:(j + 1) * points], [not b[2]]))
            k = int(np.flatnonzero(flags[1:] != flags[:-1])[0])
            b[0], b[1] = nodes[k], nodes[k + 1]
            b[2] = bool(flags[k])
    edges = [0.5 * (b[0] + b[1]) for b in brackets]
    rising = [not b[2] for b in brackets]
    out = []
    start = xs[0] if bad[0] else None
    for e, up in zip(edges, rising):
        if up:
            start = e
        else:
            out.append((float(start), float(e)))
            start = None
    if start is not None:
        out.append((float(start), float(xs[-1])))
    return out


def ray_intervals(orbit: PeriodicOrbit, theta: float, r_max: float = 1.5,
                  d_ratios=(1.0, 0.0, 0.0), cfg: Optional[IntegratorConfig] = None,
                  resolution: int = 300, tol: float = 1e-4,
                  margin: float = INSTABILITY_MARGIN) -> list[tuple]:
    """Instability intervals in ``R`` along ``Om = -R exp(i theta)``.

    ``Om = 0`` is the neutral reference on the left of the grid.
    """
    if resolution < 200:
        raise ValueError("ray resolution must be at least 200")
    direction = -np.exp(1j * theta)
    evaluate = lambda R: leading_moduli(orbit, np.asarray(R) * direction, d_ratios, cfg)
    rs = r_max * np.arange(1, resolution + 1) / resolution
    return instability_intervals(evaluate, rs, 0.0, tol, margin)


@dataclass(frozen=True)
class ExpansionCoefficients:
    mu1_1: complex
    mu1_2: complex
    fit_residual: float
    thetas: np.ndarray
    r_star: np.ndarray

    def R_star(self, theta: float) -> float:
        return r_star(self.mu1_1, self.mu1_2, theta)

    def predict(self, omega: complex) -> complex:
        return 1.0 + self.mu1_1 * omega + self.mu1_2 * omega ** 2


def r_star(a: complex, b: complex, theta: float) -> float:
    """Small-``R`` root of ``|1 + a Om + b Om^2| = 1`` on the ray ``theta``.

    For real ``a, b`` this is ``2 a cos(t) / (2 b cos(2t) + a^2)``.
    """
    e = np.exp(1j * theta)
    return float(2 * (a * e).real / (abs(a) ** 2 + 2 * (b * e * e).real))


def _track_neutral(multipliers: np.ndarray) -> complex:
    return complex(multipliers[np.argmin(np.abs(multipliers - 1.0))])


def expansion_fit(orbit: PeriodicOrbit, d_ratios=(1.0, 0.0, 0.0),
                  cfg: Optional[IntegratorConfig] = None,
                  radii: Sequence[float] = (1e-5, 2e-5, 5e-5), n_angles: int = 8,
                  thetas: Optional[Sequence[float]] = None) -> ExpansionCoefficients:
    """Least-squares fit of ``mu1(Om) - 1`` against ``Om`` and ``Om^2``.

    ``mu1`` is the branch continued from the neutral multiplier at ``Om=0``
    (the multiplier nearest 1 on the small stencil).
    """
    phis = 2 * math.pi * np.arange(n_angles) / n_angles
    om = np.array([r * np.exp(1j * p) for r in radii for p in phis])
    specs = spectra_batch(orbit, [StabilityParameter.ratio(z, d_ratios) for z in om],
                          cfg, len(om) + 1)
    base = spectra_batch(orbit, [StabilityParameter((0, 0, 0))], cfg)[0]
    mu0 = _track_neutral(base.multipliers)
    mu = np.array([_track_neutral(s.multipliers) for s in specs])
    A = np.stack((om, om ** 2), axis=1)
    y = mu - mu0
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    rms = float(np.sqrt(np.mean(np.abs(resid) ** 2)))
    # floor the noise at the accuracy of the neutral multiplier itself
    noise = max(rms, abs(mu0 - 1.0), 1e-12)
    cov = np.linalg.inv(A.conj().T @ A)
    err_b = noise * math.sqrt(abs(cov[1, 1]))
    if not np.isfinite(coef).all() or err_b > 0.25 * abs(coef[1]):
        raise FitIllConditioned(
            f"stencil radii {tuple(radii)} too small: second-order coefficient "
            f"{coef[1]:.4g} has uncertainty {err_b:.2g}")
    if thetas is None:
        thetas = np.linspace(math.pi / 4, math.pi / 2, 26)[1:-1]
    th = np.asarray(thetas, dtype=float)
    rs = np.array([r_star(coef[0], coef[1], t) for t in th])
    return ExpansionCoefficients(complex(coef[0]), complex(coef[1]), rms, th, rs)


# exports ----------------------------------------------------------------

def write_grid_csv(grid: MSFGrid, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re_omega", "im_omega", "leading_modulus", "verdict"])
        flags = grid.unstable
        for z, m, u in zip(grid.omega.ravel(), grid.leading_modulus.ravel(), flags.ravel()):
            w.writerow([repr(float(z.real)), repr(float(z.imag)), repr(float(m)),
                        "unstable" if u else "stable"])


def write_raster(grid: MSFGrid, path, color: bool = True) -> None:
    """PPM (red unstable, blue stable) or PGM (modulus, 1 maps to mid-grey).

    Rows run along the second grid axis from its largest value down, columns
    along the first axis.
    """
    flags = grid.unstable[::-1]
    h, w = flags.shape
    if color:
        img = np.zeros((h, w, 3), dtype=np.uint8)
        img[flags] = (220, 30, 30)
        img[~flags] = (30, 60, 220)
        header = f"P6\n{w} {h}\n255\n".encode()
    else:
        mod = grid.leading_modulus[::-1]
        img = np.clip(np.round(127.5 * mod), 0, 255).astype(np.uint8)
        header = f"P5\n{w} {h}\n255\n".encode()
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(img.tobytes())


def write_rays_csv(rows: Sequence[tuple], path) -> None:
    """``rows`` of ``(theta, R_lo, R_hi)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "R_lo", "R_hi"])
        for th, lo, hi in rows:
            w.writerow([repr(float(th)), repr(float(lo)), repr(float(hi))])

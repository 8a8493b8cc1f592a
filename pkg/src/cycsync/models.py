"""Cyclic competitive Lotka-Volterra models and their parameter regions."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

__all__ = [
    "ModelSpec",
    "LVParams",
    "GeneralLV3Params",
    "Region",
    "RegionVerdict",
    "NonPositiveComponent",
    "ConditionViolation",
    "lv3_specific",
    "lv3_general",
    "specific_as_general",
    "coexistence_point",
    "coexistence_jacobian_eigenvalues",
    "conditions_hold",
    "hopf_coefficients",
    "hopf_residual",
    "hopf_alpha",
    "heteroclinic_constant",
    "classify_region",
    "may_leonard_manifold_relation",
]


class NonPositiveComponent(ValueError):
    pass


class ConditionViolation(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """Autonomous vector field with an analytic Jacobian.

    ``rhs`` and ``jacobian`` accept states with arbitrary leading batch axes.
    """

    n: int
    rhs: Callable[[np.ndarray], np.ndarray]
    jacobian: Callable[[np.ndarray], np.ndarray]
    params: Mapping[str, float] = field(default_factory=dict)

    def ode(self, t, y):
        return self.rhs(y)


@dataclass(frozen=True)
class LVParams:
    alpha: float
    gamma: float
    r: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        if not (self.alpha > 0 and self.gamma > 0):
            raise ValueError("alpha and gamma must be positive")
        if len(self.r) != 3:
            raise ValueError("r needs three rates")
        object.__setattr__(self, "r", tuple(float(x) for x in self.r))

    def as_dict(self) -> dict:
        return {"alpha": self.alpha, "gamma": self.gamma, "r": list(self.r)}


@dataclass(frozen=True)
class GeneralLV3Params:
    alpha: tuple = (1.0, 1.0, 1.0)
    beta: tuple = (0.0, 0.0, 0.0)
    r: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        for name in ("alpha", "beta", "r"):
            v = tuple(float(x) for x in getattr(self, name))
            if len(v) != 3 or not all(np.isfinite(v)):
                raise ValueError(f"{name} must be three finite numbers")
            object.__setattr__(self, name, v)

    def rotated(self) -> "GeneralLV3Params":
        """Parameters seen after relabelling species (1,2,3) -> (2,3,1)."""
        rot = lambda x: (x[1], x[2], x[0])
        return GeneralLV3Params(rot(self.alpha), rot(self.beta), rot(self.r))


def lv3_specific(params: LVParams) -> ModelSpec:
    """u' = u(g - u - a v), v' = v(1 - v - a w), w' = w(1 - w - a u)."""
    a, g = float(params.alpha), float(params.gamma)
    r1, r2, r3 = params.r

    def rhs(y):
        if y.ndim == 1:
            u, v, w = y.tolist()
            return np.array((r1 * u * (g - u - a * v), r2 * v * (1.0 - v - a * w),
                             r3 * w * (1.0 - w - a * u)))
        u, v, w = y[..., 0], y[..., 1], y[..., 2]
        return np.stack((r1 * u * (g - u - a * v),
                         r2 * v * (1.0 - v - a * w),
                         r3 * w * (1.0 - w - a * u)), axis=-1)

    def jacobian(y):
        if y.ndim == 1:
            u, v, w = y.tolist()
            return np.array(((r1 * (g - 2 * u - a * v), -r1 * a * u, 0.0),
                             (0.0, r2 * (1.0 - 2 * v - a * w), -r2 * a * v),
                             (-r3 * a * w, 0.0, r3 * (1.0 - 2 * w - a * u))))
        u, v, w = y[..., 0], y[..., 1], y[..., 2]
        z = np.zeros_like(u)
        return np.stack((
            np.stack((r1 * (g - 2 * u - a * v), -r1 * a * u, z), axis=-1),
            np.stack((z, r2 * (1.0 - 2 * v - a * w), -r2 * a * v), axis=-1),
            np.stack((-r3 * a * w, z, r3 * (1.0 - 2 * w - a * u)), axis=-1),
        ), axis=-2)

    return ModelSpec(3, rhs, jacobian, {"alpha": a, "gamma": g,
                                        "r1": r1, "r2": r2, "r3": r3})


def lv3_general(params: GeneralLV3Params) -> ModelSpec:
    """General three-species system with cyclic (alpha) and reverse (beta) competition."""
    a1, a2, a3 = params.alpha
    b1, b2, b3 = params.beta
    r1, r2, r3 = params.r

    def rhs(y):
        x1, x2, x3 = y[..., 0], y[..., 1], y[..., 2]
        return np.stack((r1 * x1 * (1 - x1 - a1 * x2 - b1 * x3),
                         r2 * x2 * (1 - x2 - a2 * x3 - b2 * x1),
                         r3 * x3 * (1 - x3 - a3 * x1 - b3 * x2)), axis=-1)

    def jacobian(y):
        x1, x2, x3 = y[..., 0], y[..., 1], y[..., 2]
        return np.stack((
            np.stack((r1 * (1 - 2 * x1 - a1 * x2 - b1 * x3), -r1 * a1 * x1,
                      -r1 * b1 * x1), axis=-1),
            np.stack((-r2 * b2 * x2, r2 * (1 - 2 * x2 - a2 * x3 - b2 * x1),
                      -r2 * a2 * x2), axis=-1),
            np.stack((-r3 * a3 * x3, -r3 * b3 * x3,
                      r3 * (1 - 2 * x3 - a3 * x1 - b3 * x2)), axis=-1),
        ), axis=-2)

    p = {f"alpha{i + 1}": params.alpha[i] for i in range(3)}
    p.update({f"beta{i + 1}": params.beta[i] for i in range(3)})
    p.update({f"r{i + 1}": params.r[i] for i in range(3)})
    return ModelSpec(3, rhs, jacobian, p)


def specific_as_general(params: LVParams):
    """Map the two-parameter system onto the general one.

    With u = gamma * x1 the first equation becomes
    x1' = gamma x1 (1 - x1 - (alpha/gamma) v) and the third couples to x1
    through alpha*gamma.  Returns the general parameters and the state scaling
    ``(gamma, 1, 1)`` such that ``u = scale * x``.
    """
    a, g = params.alpha, params.gamma
    gen = GeneralLV3Params(alpha=(a / g, a, a * g), beta=(0.0, 0.0, 0.0),
                           r=(g, 1.0, 1.0))
    return gen, np.array([g, 1.0, 1.0])


def conditions_hold(params: LVParams) -> bool:
    a, g = params.alpha, params.gamma
    return a > 1 and (a - 1) / a ** 2 < g < (a ** 2 + 1) / a


def coexistence_point(params: LVParams, strict: bool = True) -> np.ndarray:
    a, g = params.alpha, params.gamma
    den = 1 + a ** 3
    if den == 0:
        raise ZeroDivisionError("1 + alpha^3 vanishes")
    p = np.array([g - a + a * a, 1 - a + a * a * g, 1 - a * g + a * a]) / den
    if strict and np.any(p <= 0):
        raise NonPositiveComponent(
            f"coexistence point {p} is not in the open positive octant "
            f"(alpha={a}, gamma={g})")
    return p


def coexistence_jacobian_eigenvalues(params: LVParams) -> np.ndarray:
    p = coexistence_point(params, strict=False)
    return np.linalg.eigvals(lv3_specific(params).jacobian(p))


def hopf_coefficients(alpha: float) -> np.ndarray:
    """Coefficients (c3, c2, c1, c0) of the Hopf polynomial in gamma."""
    a = alpha
    c3 = a * (1 - a - a ** 3)
    c2 = -2 + 3 * a - 5 * a ** 2 + 6 * a ** 3 + a ** 5 - a ** 6
    c1 = -4 + 7 * a - 11 * a ** 2 + 5 * a ** 3 - 7 * a ** 4 + a ** 5 + a ** 7
    c0 = (1 - a) ** 2 * (-2 + a - 3 * a ** 2 - a ** 3 - a ** 4)
    return np.array([c3, c2, c1, c0])


def hopf_residual(params: LVParams) -> float:
    c3, c2, c1, c0 = hopf_coefficients(params.alpha)
    g = params.gamma
    return float(((c3 * g + c2) * g + c1) * g + c0)


def hopf_alpha(gamma: float, lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root in alpha of the Hopf polynomial at fixed gamma, by bisection."""
    f = lambda a: hopf_residual(LVParams(a, gamma))
    flo, fhi = f(lo), f(hi)
    if flo * fhi > 0:
        raise ValueError("Hopf residual does not change sign on the bracket")
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def heteroclinic_constant(params: LVParams) -> float:
    a, g = params.alpha, params.gamma
    return (a - 1) * (a - g) * (a * g - 1) / g


class Region(str, enum.Enum):
    A = "A"  # coexistence point attracts
    B = "B"  # limit cycle
    C = "C"  # heteroclinic cycle


@dataclass(frozen=True)
class RegionVerdict:
    region: Region
    hopf_residual: float
    heteroclinic_c: float
    max_real_eigenvalue: float


def classify_region(params: LVParams) -> RegionVerdict:
    if not conditions_hold(params):
        raise ConditionViolation(
            f"alpha={params.alpha}, gamma={params.gamma} violate "
            "alpha > 1, (alpha-1)/alpha^2 < gamma < (alpha^2+1)/alpha")
    re_max = float(np.max(coexistence_jacobian_eigenvalues(params).real))
    c = heteroclinic_constant(params)
    if re_max < 0:
        region = Region.A
    elif c > 1:
        region = Region.C
    else:
        region = Region.B
    return RegionVerdict(region, hopf_residual(params), c, re_max)


def may_leonard_manifold_relation(params: GeneralLV3Params, tol: float = 1e-12) -> bool:
    """Predicate for the invariant-manifold relation of the equal-rate case."""
    a, b = np.array(params.alpha), np.array(params.beta)
    if not (np.all(0 < b) and np.all(b < 1) and np.all(a > 1)):
        return False
    if not np.allclose(params.r, params.r[0]):
        return False
    return abs(np.prod(1 - b) - np.prod(a - 1)) <= tol * max(1.0, abs(np.prod(a - 1)))

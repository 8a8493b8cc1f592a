"""Adaptive Dormand-Prince 5(4) integration with dense output and events.

The same scheme integrates the nonlinear models, the variational systems
(real or complex) and the coupled networks.  States may carry leading batch
axes: a state of shape ``(B, n)`` is treated as ``B`` independent systems
sharing one step sequence, with the error norm taken as the worst member.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "IntegratorConfig",
    "Trajectory",
    "IntegrationError",
    "StepSizeUnderflow",
    "NonFiniteState",
    "integrate",
    "integrate_with_events",
]


class IntegrationError(RuntimeError):
    pass


class StepSizeUnderflow(IntegrationError):
    pass


class NonFiniteState(IntegrationError):
    pass


@dataclass(frozen=True)
class IntegratorConfig:
    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float = np.inf
    initial_step: Optional[float] = None

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0 and self.max_step > 0):
            raise ValueError("rel_tol, abs_tol and max_step must be positive")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("initial_step must be positive")

    def replace(self, **changes) -> "IntegratorConfig":
        kw = dict(rel_tol=self.rel_tol, abs_tol=self.abs_tol,
                  max_step=self.max_step, initial_step=self.initial_step)
        kw.update(changes)
        return IntegratorConfig(**kw)


# Dormand-Prince 5(4) tableau, FSAL.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
]
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
# fifth-order minus embedded fourth-order weights, seven stages (last is FSAL)
_E = np.array([-71 / 57600, 0.0, 71 / 16695, -71 / 1920, 17253 / 339200,
               -22 / 525, 1 / 40])
# continuous extension: y(t0 + s h) = y0 + h * sum_j (K^T P)_j s^(j+1)
_P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 10.0
_EVENT_TOL = 1e-12


@dataclass(frozen=True)
class Trajectory:
    """Accepted steps of one integration.

    ``dense[i]`` holds the interpolant coefficients of step ``i`` with shape
    ``state_shape + (4,)``; it is ``None`` when dense output was disabled.
    """

    times: np.ndarray
    states: np.ndarray
    dense: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.times.setflags(write=False)
        self.states.setflags(write=False)
        if self.dense is not None:
            self.dense.setflags(write=False)

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t1(self) -> float:
        return float(self.times[-1])

    @property
    def y_final(self) -> np.ndarray:
        return self.states[-1]

    def __call__(self, t):
        """Evaluate the dense interpolant at scalar or array ``t``."""
        if self.dense is None:
            raise ValueError("trajectory was integrated without dense output")
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        tt = np.atleast_1d(t)
        if np.any(tt < self.times[0] - 1e-12 * (1 + abs(self.times[0]))) or \
                np.any(tt > self.times[-1] + 1e-12 * (1 + abs(self.times[-1]))):
            raise ValueError("evaluation time outside the integrated span")
        idx = np.clip(np.searchsorted(self.times, tt, side="right") - 1,
                      0, len(self.times) - 2)
        out = _dense_eval(self.times[idx], self.times[idx + 1],
                          self.states[idx], self.dense[idx], tt)
        return out[0] if scalar else out


def _dense_eval(ta, tb, ya, q, t):
    h = tb - ta
    s = (t - ta) / h
    extra = (1,) * (ya.ndim - 1)
    s = s.reshape(s.shape + extra)
    h = h.reshape(h.shape + extra)
    # Horner in s on q[..., j] s^(j+1)
    poly = q[..., 3]
    for j in (2, 1, 0):
        poly = poly * s + q[..., j]
    return ya + h * poly * s


def _rms_max(err, scale):
    r = np.abs(err) / scale
    if r.ndim <= 1:
        return float(np.sqrt(np.mean(r * r)))
    r = r.reshape(r.shape[0], -1)
    return float(np.sqrt(np.mean(r * r, axis=1)).max())


def _initial_step(rhs, t0, y0, f0, direction_span, cfg):
    if cfg.initial_step is not None:
        return min(cfg.initial_step, cfg.max_step, direction_span)
    scale = cfg.abs_tol + cfg.rel_tol * np.abs(y0)
    d0 = _rms_max(y0, scale)
    d1 = _rms_max(f0, scale)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = _rms_max(f1 - f0, scale) / h0
    if d1 <= 1e-15 and d2 <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, cfg.max_step, direction_span)


def _step(rhs, t, y, f, h):
    k = [f]
    for i in range(1, 6):
        a = _A[i]
        dy = a[0] * k[0]
        for j in range(1, i):
            if a[j] != 0.0:
                dy = dy + a[j] * k[j]
        k.append(rhs(t + _C[i] * h, y + h * dy))
    dy = _B[0] * k[0]
    for j in range(2, 6):
        dy = dy + _B[j] * k[j]
    y_new = y + h * dy
    f_new = rhs(t + h, y_new)
    k.append(f_new)
    err = _E[0] * k[0]
    for j in range(2, 7):
        err = err + _E[j] * k[j]
    return y_new, f_new, h * err, k


def _dense_coeffs(k):
    # q[..., j] = sum_i k_i P[i, j]
    kk = np.stack(k, axis=-1)
    return kk @ _P


def _run(rhs, y0, t_span, cfg, dense, event, direction, max_events, store):
    t0, t1 = float(t_span[0]), float(t_span[1])
    if not t1 > t0:
        raise ValueError("t_span must satisfy t1 > t0")
    y = np.array(y0, dtype=np.result_type(np.asarray(y0).dtype, float))
    if not np.all(np.isfinite(y)):
        raise NonFiniteState("initial state is not finite")
    cfg = cfg or IntegratorConfig()
    f = rhs(t0, y)
    if not np.all(np.isfinite(f)):
        raise NonFiniteState(f"non-finite derivative at t={t0}")
    h = _initial_step(rhs, t0, y, f, t1 - t0, cfg)

    times = [t0]
    states = [y] if store else None
    coeffs = [] if (dense and store) else None
    ev_times: list[float] = []
    g_old = event(y) if event is not None else None
    if g_old is not None and abs(g_old) <= 100 * _EVENT_TOL:
        # starting on the surface is not a crossing
        g_old = 0.0

    t = t0
    err_exp = -1.0 / 5.0
    bad = 0
    while t < t1:
        min_step = 10 * np.spacing(abs(t))
        h = min(h, cfg.max_step)
        last = False
        if t + h >= t1 or t1 - (t + h) < min_step:
            h = t1 - t
            last = True
        y_new, f_new, err, k = _step(rhs, t, y, f, h)
        finite = np.all(np.isfinite(y_new)) and np.all(np.isfinite(f_new))
        if not finite:
            bad += 1
            if bad > 30:
                raise NonFiniteState(f"non-finite state near t={t:.6g}")
            h *= _MIN_FACTOR
            if h < min_step:
                raise NonFiniteState(f"non-finite state near t={t:.6g}")
            continue
        scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
        err_norm = _rms_max(err, scale)
        if err_norm > 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err_norm ** err_exp)
            if h < min_step:
                raise StepSizeUnderflow(f"step size underflow at t={t:.6g}")
            continue
        bad = 0
        t_new = t1 if last else t + h
        q = _dense_coeffs(k) if (dense or event is not None) else None

        if event is not None:
            g_new = event(y_new)
            if _crossed(g_old, g_new, direction):
                ev_times.append(_refine_event(event, t, t_new, y, q, g_old, g_new))
                if max_events is not None and len(ev_times) >= max_events:
                    t_cut = ev_times[-1]
                    y_cut = _dense_eval(np.array(t), np.array(t_new), y, q,
                                        np.array(t_cut))
                    # truncate the last step at the terminal event
                    if t_cut > t:
                        frac = (t_cut - t) / (t_new - t)
                        q = _shrink_coeffs(q, frac)
                        t_new, y_new = t_cut, y_cut
                        f_new = rhs(t_new, y_new)
                    times.append(t_new)
                    if store:
                        states.append(y_new)
                        if coeffs is not None:
                            coeffs.append(q)
                    break
            g_old = g_new

        times.append(t_new)
        if store:
            states.append(y_new)
            if coeffs is not None:
                coeffs.append(q)
        t, y, f = t_new, y_new, f_new
        if err_norm == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = min(_MAX_FACTOR, _SAFETY * err_norm ** err_exp)
        h *= factor

    if store:
        traj = Trajectory(np.array(times), np.array(states),
                          np.array(coeffs) if coeffs is not None and coeffs else
                          (np.empty((0,) + y.shape + (4,), dtype=y.dtype)
                           if coeffs is not None else None))
    else:
        traj = Trajectory(np.array([t0, times[-1]]), np.array([np.asarray(y0, dtype=y.dtype), y]))
    return traj, ev_times


def _shrink_coeffs(q, frac):
    # reparametrise s' = s / frac on the truncated step: y0 + (frac h) sum q_j frac^j s'^(j+1)
    pw = frac ** np.arange(4)
    return q * pw


def _crossed(g0, g1, direction):
    if direction > 0:
        return g0 < 0 <= g1 and g0 != g1
    if direction < 0:
        return g0 > 0 >= g1 and g0 != g1
    return (g0 < 0 <= g1 or g0 > 0 >= g1) and g0 != g1


def _refine_event(event, ta, tb, ya, q, ga, gb):
    lo, hi = ta, tb
    glo = ga
    tv = hi
    ta_arr, tb_arr = np.array(ta), np.array(tb)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        gm = event(_dense_eval(ta_arr, tb_arr, ya, q, np.array(mid)))
        if abs(gm) < _EVENT_TOL:
            tv = mid
            return tv
        if (gm < 0) == (glo < 0) and gm != 0:
            lo, glo = mid, gm
        else:
            hi = mid
        tv = hi
    return tv


def integrate(rhs: Callable, y0, t_span: Sequence[float],
              cfg: Optional[IntegratorConfig] = None, *,
              dense: bool = True, store: bool = True) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` over ``t_span``.

    With ``store=False`` only the end points are kept, which is what the
    monodromy and sweep code needs.
    """
    traj, _ = _run(rhs, y0, t_span, cfg, dense and store, None, 0, None, store)
    return traj


def integrate_with_events(rhs: Callable, y0, t_span: Sequence[float],
                          cfg: Optional[IntegratorConfig] = None,
                          event: Callable = None, direction: int = 0, *,
                          max_events: Optional[int] = None, dense: bool = True):
    """Integrate and locate zero crossings of ``event(y)``.

    ``direction`` is +1 for upward crossings, -1 for downward and 0 for
    both.  Integration stops at the ``max_events``-th crossing if given.
    Returns ``(trajectory, event_times)``.
    """
    if event is None:
        raise ValueError("an event function is required")
    traj, ev = _run(rhs, y0, t_span, cfg, dense, event, direction, max_events, True)
    return traj, np.array(ev)

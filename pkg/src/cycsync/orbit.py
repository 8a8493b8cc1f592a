"""Limit-cycle location, phase fixing and storage for the variational analysis."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .models import LVParams, ModelSpec, coexistence_point, lv3_specific
from .ode import (IntegrationError, IntegratorConfig, NonFiniteState, Trajectory,
                  integrate, integrate_with_events)

__all__ = [
    "PeriodicOrbit",
    "PhaseAnchor",
    "OrbitError",
    "NoCycle",
    "HeteroclinicSuspect",
    "ShootingFailure",
    "find_orbit",
    "eval_orbit",
    "save_orbit",
    "load_orbit",
    "default_seed",
]

_trapezoid = getattr(np, "trapezoid", None) or np.trapz

ORBIT_FORMAT = "cycsync-orbit v1"
MIN_SAMPLES_PER_PERIOD = 2000
CLOSURE_TOL = 1e-10
# Near the heteroclinic boundary the cycle visits densities far below any
# useful absolute tolerance (~1e-18 at alpha=2.37), so orbits are solved
# under essentially relative error control.
ORBIT_CONFIG = IntegratorConfig(rel_tol=1e-10, abs_tol=1e-24)


class OrbitError(RuntimeError):
    pass


class NoCycle(OrbitError):
    pass


class HeteroclinicSuspect(OrbitError):
    pass


class ShootingFailure(OrbitError):
    pass


@dataclass(frozen=True)
class PhaseAnchor:
    component: int
    level: float
    direction: int = 1


@dataclass(frozen=True)
class PeriodicOrbit:
    period: float
    trajectory: Trajectory = field(repr=False)
    anchor: PhaseAnchor
    params: LVParams
    closure_error: float
    poincare_period: float = math.nan

    def __post_init__(self):
        tr = self.trajectory
        # flat arrays for fast scalar evaluation
        object.__setattr__(self, "_t", np.ascontiguousarray(tr.times))
        object.__setattr__(self, "_y", np.ascontiguousarray(tr.states))
        object.__setattr__(self, "_q", np.ascontiguousarray(tr.dense))
        object.__setattr__(self, "_n", len(tr.times) - 1)

    @property
    def y0(self) -> np.ndarray:
        return self._y[0]

    @property
    def model(self) -> ModelSpec:
        return lv3_specific(self.params)

    @property
    def n_samples(self) -> int:
        return self._n

    @property
    def orbit_id(self) -> str:
        h = hashlib.sha1()
        h.update(json.dumps(self.params.as_dict(), sort_keys=True).encode())
        h.update(np.float64(self.period).tobytes())
        h.update(self._y[0].tobytes())
        return h.hexdigest()[:12]

    def __call__(self, t: float) -> np.ndarray:
        """State at scalar time ``t`` (taken modulo the period)."""
        T = self.period
        tm = t % T if (t < 0.0 or t >= T) else t
        ts = self._t
        i = int(np.searchsorted(ts, tm, side="right")) - 1
        if i < 0:
            i = 0
        elif i >= self._n:
            i = self._n - 1
        ta = ts[i]
        h = ts[i + 1] - ta
        s = (tm - ta) / h
        q = self._q[i]
        return self._y[i] + h * s * (q[:, 0] + s * (q[:, 1] + s * (q[:, 2] + s * q[:, 3])))

    def sample(self, t) -> np.ndarray:
        """Vectorised evaluation at an array of times (modulo the period)."""
        t = np.asarray(t, dtype=float)
        return self.trajectory(np.mod(t, self.period))

    @property
    def amplitude(self) -> float:
        u = self._y[:, self.anchor.component]
        return float(u.max() - u.min())


def eval_orbit(orbit: PeriodicOrbit, t):
    """State (u0, v0, w0) at time ``t`` modulo the period."""
    if np.ndim(t) == 0:
        return orbit(float(t))
    return orbit.sample(t)


def default_seed(params: LVParams) -> np.ndarray:
    return coexistence_point(params) + np.array([1e-2, 0.0, 0.0])


def _augmented_rhs(model: ModelSpec):
    def rhs(t, z):
        y = z[:3]
        phi = z[3:].reshape(3, 3)
        return np.concatenate((model.rhs(y), (model.jacobian(y) @ phi).ravel()))
    return rhs


def _flow_with_monodromy(model, y0, T, cfg):
    z0 = np.concatenate((y0, np.eye(3).ravel()))
    tr = integrate(_augmented_rhs(model), z0, (0.0, T), cfg, store=False)
    z = tr.y_final
    return z[:3], z[3:].reshape(3, 3)


def _returns(model, y, level, t_len, cfg, max_events):
    ev = lambda s: s[0] - level
    tr, times = integrate_with_events(model.ode, y, (0.0, t_len), cfg, ev, +1,
                                      max_events=max_events)
    return tr, times


def _check_state(y):
    if not np.all(np.isfinite(y)) or np.any(y < 0):
        raise HeteroclinicSuspect(
            "state left the positive octant; orbit approaches the heteroclinic cycle")


def find_orbit(model: ModelSpec | LVParams, seed: Optional[np.ndarray] = None,
               transient: Optional[float] = None,
               cfg: Optional[IntegratorConfig] = None,
               max_newton: int = 12, max_chunks: int = 40) -> PeriodicOrbit:
    """Locate the attracting limit cycle of the cyclic LV system.

    The phase is fixed so that t=0 sits on the upward crossing of u through
    its time average over the cycle.  Raises :class:`NoCycle` when the
    trajectory settles on the coexistence point and
    :class:`HeteroclinicSuspect` when the return times keep growing.
    """
    if isinstance(model, LVParams):
        params = model
        model = lv3_specific(params)
    else:
        p = model.params
        params = LVParams(p["alpha"], p["gamma"], (p.get("r1", 1.0), p.get("r2", 1.0),
                                                   p.get("r3", 1.0)))
    cfg = cfg or ORBIT_CONFIG
    ystar = coexistence_point(params, strict=False)
    y = np.array(default_seed(params) if seed is None else seed, dtype=float)
    if np.any(y <= 0):
        raise ValueError("seed must lie in the open positive octant")
    scale = 1.0 + float(np.linalg.norm(ystar))

    # a few returns through the coexistence level give a first period estimate
    try:
        tr, ev = _returns(model, y, ystar[0], 400.0, cfg, 4)
    except IntegrationError as exc:
        raise HeteroclinicSuspect(str(exc)) from exc
    y = tr.y_final
    _check_state(y)
    t_est = float(np.mean(np.diff(ev))) if len(ev) >= 2 else 2 * np.pi / 0.4
    if transient is None:
        # a seed from a nearby cycle (continuation) needs a shorter transient
        transient = (50.0 if seed is None else 10.0) * t_est

    for _chunk in range(max_chunks):
        if transient > 0:
            try:
                y = integrate(model.ode, y, (0.0, transient), cfg, store=False).y_final
            except IntegrationError as exc:
                raise HeteroclinicSuspect(str(exc)) from exc
            _check_state(y)
        win, ev = _observe(model, y, ystar, t_est, cfg, scale)
        gaps = np.diff(ev)
        t_est = float(gaps[-1])
        if np.ptp(gaps[-4:]) < 1e-6 * t_est:
            break
        last = gaps[-5:]
        if len(last) == 5 and np.all(np.diff(last) > 0) and last[-1] > 1.05 * last[0] \
                and np.diff(last)[-1] >= np.diff(last)[0]:
            raise HeteroclinicSuspect(
                f"return times grow monotonically ({last[0]:.4g} -> {last[-1]:.4g})")
        y = win.y_final
        transient = 50.0 * t_est
    else:
        raise OrbitError("return times did not settle; increase the transient")

    # section level: time average of u over the last complete return
    t_a, t_b = ev[-2], ev[-1]
    ts = np.linspace(t_a, t_b, 4097)
    level = float(_trapezoid(win(ts)[:, 0], ts) / (t_b - t_a))
    y = win.y_final

    # land on the section, then close the orbit by shooting
    tr, ev = _returns(model, y, level, 30.0 * t_est, cfg, 1)
    if len(ev) < 1:
        raise HeteroclinicSuspect("no return to the section")
    anchor = PhaseAnchor(0, level, +1)
    y0, T = _shoot(model, tr.y_final.copy(), t_est, level, cfg, max_newton)

    # independent period measurement: first return of the refined state
    _, ev = _returns(model, y0, level, 2.0 * T, cfg, 1)
    if len(ev) < 1:
        raise ShootingFailure("refined state does not return to the section")
    t_poinc = float(ev[0])

    fine = cfg.replace(max_step=min(cfg.max_step, T / MIN_SAMPLES_PER_PERIOD))
    traj = integrate(model.ode, y0, (0.0, T), fine)
    closure = float(np.linalg.norm(traj.y_final - y0))
    if np.any(traj.states <= 0):
        raise HeteroclinicSuspect("orbit touches the boundary of the positive octant")
    return PeriodicOrbit(T, traj, anchor, params, closure, t_poinc)


def _observe(model, y, ystar, t_est, cfg, scale):
    """Record nine returns through the coexistence level and screen them."""
    try:
        win, ev = _returns(model, y, ystar[0], 30.0 * t_est, cfg, 9)
    except IntegrationError as exc:
        raise HeteroclinicSuspect(str(exc)) from exc
    _check_state(win.y_final)
    u = win.states[:, 0]
    if (u.max() - u.min()) < 1e-8 * scale or len(ev) < 3:
        if np.linalg.norm(win.y_final - ystar) < 1e-6 * scale:
            raise NoCycle("trajectory converged to the coexistence point")
        if win.states.min() < 1e-6:
            raise HeteroclinicSuspect("no returns; trajectory lingers near a saddle")
        raise NoCycle("no sustained oscillation detected")
    peaks = _cycle_maxima(win, ev)
    if len(peaks) >= 5 and np.all(np.diff(peaks[-5:]) < 0):
        amp = peaks - ystar[0]
        if amp[-1] < 0.99 * amp[-5] and np.all(np.diff(np.diff(amp[-5:])) > 0):
            raise NoCycle("oscillation amplitude decays toward the coexistence point")
    return win, ev


def _cycle_maxima(win, ev):
    out = []
    for a, b in zip(ev[:-1], ev[1:]):
        m = (win.times >= a) & (win.times <= b)
        if np.any(m):
            out.append(win.states[m, 0].max())
    return np.array(out)


def _shoot(model, y0, T, level, cfg, max_newton):
    """Newton iteration on phi(T; y0) = y0 with y0[0] pinned to the section."""
    y0 = np.array(y0, dtype=float)
    scale = 1.0 + np.linalg.norm(y0)
    for _ in range(max_newton):
        fine = cfg.replace(max_step=min(cfg.max_step, T / MIN_SAMPLES_PER_PERIOD))
        yT, M = _flow_with_monodromy(model, y0, T, fine)
        r = yT - y0
        if np.linalg.norm(r) < CLOSURE_TOL * scale:
            return y0, T
        J = np.zeros((4, 4))
        J[:3, :3] = M - np.eye(3)
        J[:3, 3] = model.rhs(yT)
        J[3, 0] = 1.0
        rhs = -np.concatenate((r, [y0[0] - level]))
        dx = np.linalg.solve(J, rhs)
        y0 = y0 + dx[:3]
        T = T + dx[3]
        if not (np.all(y0 > 0) and T > 0):
            raise ShootingFailure("Newton step left the admissible region")
    fine = cfg.replace(max_step=min(cfg.max_step, T / MIN_SAMPLES_PER_PERIOD))
    yT, _ = _flow_with_monodromy(model, y0, T, fine)
    if np.linalg.norm(yT - y0) < 1e2 * CLOSURE_TOL * scale:
        return y0, T
    raise ShootingFailure(f"shooting did not converge (closure {np.linalg.norm(yT - y0):.3g})")


def save_orbit(orbit: PeriodicOrbit, path) -> None:
    """Write the orbit as a commented header plus a CSV table of steps.

    Each row holds the step start time, the state there and the four
    interpolant coefficients per component; the final row has the end state
    and empty coefficient fields.
    """
    path = Path(path)
    tr = orbit.trajectory
    lines = [
        f"# {ORBIT_FORMAT}",
        "# params " + json.dumps(orbit.params.as_dict()),
        f"# period {float(orbit.period)!r}",
        "# anchor " + json.dumps({"component": orbit.anchor.component,
                                   "level": orbit.anchor.level,
                                   "direction": orbit.anchor.direction}),
        f"# closure_error {float(orbit.closure_error)!r}",
        f"# poincare_period {float(orbit.poincare_period)!r}",
    ]
    cols = ["t", "u", "v", "w"] + [f"q{c}{j}" for c in "uvw" for j in range(4)]
    lines.append(",".join(cols))
    for i, t in enumerate(tr.times):
        row = [repr(float(t))] + [repr(float(x)) for x in tr.states[i]]
        if i < len(tr.times) - 1:
            row += [repr(float(x)) for x in tr.dense[i].ravel()]
        else:
            row += [""] * 12
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")


def load_orbit(path) -> PeriodicOrbit:
    path = Path(path)
    header = {}
    rows = []
    with path.open() as fh:
        first = fh.readline().strip()
        if first != f"# {ORBIT_FORMAT}":
            raise ValueError(f"{path}: not a {ORBIT_FORMAT} file")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition(" ")
                header[key] = val
            elif line.startswith("t,"):
                continue
            else:
                rows.append(line.split(","))
    try:
        p = json.loads(header["params"])
        anchor = json.loads(header["anchor"])
        period = float(header["period"])
    except KeyError as exc:
        raise ValueError(f"{path}: missing header field {exc}") from exc
    times = np.array([float(r[0]) for r in rows])
    states = np.array([[float(x) for x in r[1:4]] for r in rows])
    dense = np.array([[float(x) for x in r[4:16]] for r in rows[:-1]]).reshape(-1, 3, 4)
    traj = Trajectory(times, states, dense)
    return PeriodicOrbit(period, traj, PhaseAnchor(**anchor),
                         LVParams(p["alpha"], p["gamma"], tuple(p["r"])),
                         float(header["closure_error"]),
                         float(header.get("poincare_period", "nan")))

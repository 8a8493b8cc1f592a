"""Command-line front end.

Every subcommand writes into ``--out`` and echoes its resolved settings to
``config.json`` there; ``--config`` reads such a file back (flags win).
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import floquet, msf, netsim, spectral
from .models import (ConditionViolation, LVParams, NonPositiveComponent,
                     classify_region, heteroclinic_constant)
from .ode import IntegrationError, IntegratorConfig
from .orbit import (HeteroclinicSuspect, NoCycle, OrbitError, find_orbit, load_orbit,
                    save_orbit)

EXIT_OK, EXIT_USAGE, EXIT_NOCYCLE, EXIT_HETEROCLINIC, EXIT_DATA, EXIT_NUMERIC = range(6)


class ConfigError(ValueError):
    pass


class DataError(ValueError):
    pass


def parse_float(text) -> float:
    """Decimal number, optionally with a ``pi`` suffix (``0.4625pi``)."""
    if isinstance(text, (int, float)):
        return float(text)
    s = str(text).strip()
    scale = 1.0
    if s.endswith("pi"):
        s = s[:-2].strip().rstrip("*")
        scale = math.pi
        if s in ("", "+", "-"):
            s += "1"
    try:
        return float(s) * scale
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def parse_floats(text) -> tuple:
    if isinstance(text, (list, tuple)):
        return tuple(parse_float(x) for x in text)
    return tuple(parse_float(x) for x in str(text).split(",") if x.strip())


@dataclass
class RunConfig:
    alpha: float = 2.3427
    gamma: float = 0.5
    r: tuple = (1.0, 1.0, 1.0)
    d: tuple = (1.0, 0.0, 0.0)  # diffusivities, or D ratios for msf/rays/expansion
    D: Optional[tuple] = None  # coupling strengths
    orbit: Optional[str] = None
    matrix: Optional[str] = None
    edges: Optional[str] = None
    complete_diagonal: bool = False
    family: Optional[str] = None
    m: Optional[int] = None
    weight: float = 1.0
    out: str = "out"
    seed: int = 42
    rel_tol: float = 1e-10
    abs_tol: float = 1e-13
    margin: float = floquet.INSTABILITY_MARGIN
    workers: Optional[int] = None
    # rd-curve / critical-alpha
    k2_max: float = 1.2
    n_k2: int = 241
    mode_k2: Optional[float] = None
    alpha_lo: float = 2.30
    alpha_hi: float = 2.36
    tol: float = 1e-4
    # msf / rays / expansion
    polar: bool = True
    r_max: float = 1.5
    n_r: int = 300
    n_theta: int = 300
    re_min: float = -1.5
    re_max: float = 0.0
    im_min: float = -1.5
    im_max: float = 0.0
    theta: tuple = ()
    resolution: int = 300
    profile_n: int = 0
    # spectral sweeps
    s_max: Optional[float] = None
    n_s: int = 400
    # netsim
    t_end_periods: float = 200.0
    initial: Optional[tuple] = None
    perturbation: float = 1e-3
    stride: int = 1

    def params(self) -> LVParams:
        return LVParams(self.alpha, self.gamma, tuple(self.r))

    def integrator(self) -> IntegratorConfig:
        return IntegratorConfig(rel_tol=self.rel_tol, abs_tol=self.abs_tol)

    def to_json(self) -> str:
        doc = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            doc[f.name] = list(v) if isinstance(v, tuple) else v
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_TUPLES = {"r", "d", "D", "theta", "initial"}
_INTS = {"m", "seed", "workers", "n_k2", "n_r", "n_theta", "resolution", "profile_n",
         "n_s", "stride"}
_BOOLS = {"complete_diagonal", "polar"}
_STRS = {"orbit", "matrix", "edges", "family", "out"}


def _coerce(name: str, value):
    if value is None:
        return None
    if name in _TUPLES:
        return parse_floats(value)
    if name in _INTS:
        return int(value)
    if name in _BOOLS:
        return bool(value)
    if name in _STRS:
        return str(value)
    return parse_float(value)


def resolve_config(file: Optional[str], overrides: dict) -> RunConfig:
    cfg = RunConfig()
    if file:
        try:
            doc = json.loads(Path(file).read_text())
        except OSError as exc:
            raise DataError(f"cannot read config {file}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise DataError(f"config {file} is not valid JSON: {exc}") from exc
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold one flat JSON object")
        for k, v in doc.items():
            if k not in _FIELDS:
                raise ConfigError(f"unknown config key {k!r}")
            try:
                setattr(cfg, k, _coerce(k, v))
            except (TypeError, ValueError, argparse.ArgumentTypeError) as exc:
                raise ConfigError(f"bad value for {k}: {exc}") from exc
    for k, v in overrides.items():
        if v is not None:
            setattr(cfg, k, _coerce(k, v))
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    need(cfg.alpha > 0 and cfg.gamma > 0, "alpha and gamma must be positive")
    need(len(cfg.r) == 3 and all(x > 0 for x in cfg.r), "r needs three positive rates")
    need(len(cfg.d) == 3, "d needs three values")
    need(cfg.D is None or len(cfg.D) == 3, "D needs three values")
    need(cfg.initial is None or len(cfg.initial) % 3 == 0, "initial needs 3 values per node")
    need(cfg.rel_tol > 0 and cfg.abs_tol > 0, "tolerances must be positive")
    need(cfg.margin >= 0, "margin must be non-negative")
    need(cfg.k2_max > 0 and cfg.n_k2 >= 2, "need k2_max > 0 and n_k2 >= 2")
    need(cfg.alpha_lo < cfg.alpha_hi, "alpha_lo must be below alpha_hi")
    need(cfg.r_max > 0 and cfg.n_r >= 1 and cfg.n_theta >= 1, "bad polar grid")
    need(cfg.resolution >= 200, "ray resolution must be at least 200")
    need(cfg.t_end_periods >= 100, "t_end_periods must be at least 100")
    need(cfg.stride >= 1, "stride must be at least 1")
    need(cfg.workers is None or cfg.workers >= 1, "workers must be at least 1")
    need(cfg.family in (None, "complete", "ring", "directed-cycle", "two-node"),
         f"unknown family {cfg.family!r}")
    for name in ("orbit", "matrix", "edges"):
        path = getattr(cfg, name)
        if path is not None and not Path(path).is_file():
            raise DataError(f"{name} file {path} does not exist")


def workers(cfg: RunConfig) -> int:
    if cfg.workers is not None:
        return cfg.workers
    env = os.environ.get("FLOQUET_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"FLOQUET_WORKERS={env!r} is not an integer") from None
    return os.cpu_count() or 1


# helpers ------------------------------------------------------------------

def _outdir(cfg: RunConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.json").write_text(cfg.to_json())
    return out


def _dump(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def _cplx(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _get_orbit(cfg: RunConfig, out: Path):
    if cfg.orbit:
        orbit = load_orbit(cfg.orbit)
        p = orbit.params
        if (p.alpha, p.gamma) != (cfg.alpha, cfg.gamma):
            warnings.warn(f"orbit file has alpha={p.alpha}, gamma={p.gamma}; using it")
        return orbit
    orbit = find_orbit(cfg.params())
    save_orbit(orbit, out / "orbit.txt")
    return orbit


def _matrix(cfg: RunConfig) -> spectral.CouplingMatrix:
    if cfg.matrix:
        return spectral.read_matrix_csv(cfg.matrix)
    if cfg.edges:
        return spectral.read_edge_list(cfg.edges, cfg.m, cfg.complete_diagonal)
    fam = cfg.family or "two-node"
    if fam == "two-node":
        return spectral.two_node(cfg.weight)
    if cfg.m is None:
        raise ConfigError(f"family {fam} needs --m")
    return {"complete": spectral.complete, "ring": spectral.ring,
            "directed-cycle": spectral.directed_cycle}[fam](cfg.m, cfg.weight)


def _write_rows(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x
                        for x in row])


# subcommands -------------------------------------------------------------

def cmd_orbit(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    p = cfg.params()
    try:
        region = classify_region(p).region.value
    except ConditionViolation:
        region = "outside"
    orbit = find_orbit(p)
    save_orbit(orbit, out / "orbit.txt")
    _dump(out / "orbit.json", {
        "alpha": p.alpha, "gamma": p.gamma, "period": orbit.period,
        "poincare_period": orbit.poincare_period, "closure_error": orbit.closure_error,
        "amplitude_u": orbit.amplitude, "region": region, "orbit_id": orbit.orbit_id,
        "heteroclinic_c": heteroclinic_constant(p), "y0": list(map(float, orbit.y0)),
    })
    print(f"T={orbit.period:.10g} closure={orbit.closure_error:.2e} region={region}")
    return EXIT_OK


def cmd_rd_curve(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    orbit = _get_orbit(cfg, out)
    icfg = cfg.integrator()
    k2 = np.linspace(0.0, cfg.k2_max, cfg.n_k2)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", floquet.BranchAmbiguity)
        curve = floquet.rd_spectrum_curve(orbit, cfg.d, k2, icfg)
    header = ["k2"] + [f"mu{i}_{c}" for i in (1, 2, 3) for c in ("re", "im", "abs")]
    rows = [[x] + [v for z in s.multipliers for v in (z.real, z.imag, abs(z))]
            for x, s in zip(k2, curve)]
    _write_rows(out / "rd_curve.csv", header, rows)

    def evaluate(xs):
        ps = [floquet.StabilityParameter.diffusive(cfg.d, x) for x in xs]
        return np.array([s.leading_modulus for s in floquet.spectra_batch(orbit, ps, icfg)])

    band = msf.instability_intervals(evaluate, k2[1:], 0.0, cfg.tol, cfg.margin)
    _write_rows(out / "rd_band.csv", ["k2_lo", "k2_hi"], band)
    if cfg.mode_k2 is not None:
        t, mode, base = floquet.floquet_mode(
            orbit, floquet.StabilityParameter.diffusive(cfg.d, cfg.mode_k2), cfg=icfg)
        _write_rows(out / "mode.csv", ["t", "U", "V", "W", "u0", "v0", "w0"],
                    np.column_stack((t, mode, base)).tolist())
    for lo, hi in band:
        print(f"unstable k2 in [{lo:.5f}, {hi:.5f}]")
    return EXIT_OK


def cmd_critical_alpha(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    res = floquet.critical_alpha((cfg.alpha_lo, cfg.alpha_hi), cfg.gamma, cfg.d,
                                 cfg.integrator(), cfg.tol, cfg.k2_max)
    _dump(out / "critical.json", {
        "alpha_star": res.alpha, "k_star": res.k, "multiplier": _cplx(res.multiplier),
        "history": [[a, m, k2] for a, m, k2 in res.history],
    })
    print(f"alpha*={res.alpha:.5f} k*={res.k:.4f}")
    return EXIT_OK


def cmd_msf(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    orbit = _get_orbit(cfg, out)
    if cfg.polar:
        grid = msf.PolarGrid(cfg.r_max, cfg.n_r, 0.0, math.pi / 2, cfg.n_theta)
    else:
        grid = msf.CartesianGrid(cfg.re_min, cfg.re_max, cfg.n_r, cfg.im_min, cfg.im_max,
                                 cfg.n_theta)
    res = msf.msf_sweep(orbit, grid, cfg.d, cfg.integrator(), workers(cfg), cfg.margin)
    msf.write_grid_csv(res, out / "msf.csv")
    msf.write_raster(res, out / "msf.ppm", color=True)
    msf.write_raster(res, out / "msf.pgm", color=False)
    unstable = res.unstable
    R = np.abs(res.omega)
    _dump(out / "msf.json", {
        "kind": res.kind, "shape": list(res.omega.shape),
        "neutral_modulus": res.neutral_modulus,
        "unstable_nodes": int(unstable.sum()),
        "max_unstable_R": float(R[unstable].max()) if unstable.any() else 0.0,
    })
    print(f"{int(unstable.sum())} of {unstable.size} nodes unstable")
    return EXIT_OK


def cmd_rays(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    orbit = _get_orbit(cfg, out)
    if not cfg.theta:
        raise ConfigError("rays needs at least one --theta")
    icfg = cfg.integrator()
    rows, prof = [], []
    for th in cfg.theta:
        iv = msf.ray_intervals(orbit, th, cfg.r_max, cfg.d, icfg, cfg.resolution,
                               cfg.tol, cfg.margin)
        rows += [(th, lo, hi) for lo, hi in iv]
        print(f"theta={th:.6f}: " + (", ".join(f"({lo:.4f}, {hi:.4f})" for lo, hi in iv)
                                     or "stable"))
        if cfg.profile_n:
            Rs = cfg.r_max * np.arange(1, cfg.profile_n + 1) / cfg.profile_n
            mods = msf.leading_moduli(orbit, -Rs * np.exp(1j * th), cfg.d, icfg)
            prof += [(th, a, b) for a, b in zip(Rs, mods)]
    msf.write_rays_csv(rows, out / "rays.csv")
    if prof:
        _write_rows(out / "ray_profile.csv", ["theta", "R", "leading_modulus"], prof)
    return EXIT_OK


def cmd_expansion(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    orbit = _get_orbit(cfg, out)
    e = msf.expansion_fit(orbit, cfg.d, cfg.integrator())
    _dump(out / "expansion.json", {"mu1_1": _cplx(e.mu1_1), "mu1_2": _cplx(e.mu1_2),
                                   "fit_residual": e.fit_residual})
    _write_rows(out / "rstar.csv", ["theta", "R_star"], zip(e.thetas, e.r_star))
    print(f"mu1_1={e.mu1_1.real:.4g} mu1_2={e.mu1_2.real:.4g}")
    return EXIT_OK


def cmd_spectral(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    C = _matrix(cfg)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", spectral.ReducibleCoupling)
        spec = spectral.analyze(C)
    doc = {
        "m": C.m,
        "eigenvalues": [_cplx(z) for z in spec.eigenvalues],
        "structure": [{"value": _cplx(b.value), "algebraic": b.algebraic,
                       "geometric": b.geometric, "blocks": list(b.blocks)}
                      for b in spec.structure],
        "is_metzler": spec.is_metzler, "is_irreducible": spec.is_irreducible,
        "gershgorin_radius": spec.gershgorin_radius,
        "standardized_scale": spec.standardized_scale,
        "warnings": [str(w.message) for w in caught],
    }
    if spec.is_metzler and spec.standardized_scale > 0:
        doc["standardized_arg_check"] = spectral.standardized_laplacian(C)[2]
    _dump(out / "spectral.json", doc)
    print("eigenvalues: " + ", ".join(f"{z.real:.6g}{z.imag:+.6g}j" for z in spec.eigenvalues))
    if cfg.D is not None or cfg.s_max is not None:
        orbit = _get_orbit(cfg, out)
        icfg = cfg.integrator()
        if cfg.D is not None:
            verdict = spectral.jordan_verdict(C, orbit, cfg.D, icfg, cfg.margin)
            _dump(out / "stability.json", {"D": list(cfg.D), "verdict": verdict})
            print(f"D={list(cfg.D)}: {verdict}")
        if cfg.s_max is not None:
            s = cfg.s_max * np.arange(1, cfg.n_s + 1) / cfg.n_s
            vals, mods = spectral.coupling_sweep(C, orbit, s, cfg.d, icfg)
            header = ["s"] + [f"lam_{z.real:.6g}{z.imag:+.6g}j" for z in vals]
            _write_rows(out / "sweep.csv", header, np.column_stack((s, mods)).tolist())
            iv = spectral.coupling_instability(C, orbit, cfg.s_max, cfg.d, icfg,
                                               cfg.n_s, cfg.tol / 10, cfg.margin)
            _write_rows(out / "sweep_intervals.csv", ["s_lo", "s_hi"], iv)
            for lo, hi in iv:
                print(f"unstable coupling in [{lo:.5f}, {hi:.5f}]")
    return EXIT_OK


def cmd_netsim(cfg: RunConfig) -> int:
    out = _outdir(cfg)
    C = _matrix(cfg)
    orbit = _get_orbit(cfg, out)
    D = cfg.D if cfg.D is not None else (0.0, 0.0, 0.0)
    if cfg.initial is not None:
        if len(cfg.initial) != 3 * C.m:
            raise ConfigError(f"initial needs {3 * C.m} values for {C.m} nodes")
        y0 = np.array(cfg.initial).reshape(C.m, 3)
    else:
        y0 = netsim.perturbed_sync_state(orbit, C.m, cfg.perturbation, cfg.seed)
    run = netsim.simulate(C, orbit.params, D, y0, cfg.t_end_periods * orbit.period,
                          orbit=orbit)
    netsim.write_trajectory_csv(run, out / "trajectory.csv", cfg.stride)
    netsim.write_diagnostics_json(run, out / "diagnostics.json")
    d = run.diagnostics
    print(f"verdict={d.verdict} sync_error={d.sync_error:.3e}")
    return EXIT_OK


COMMANDS = {
    "orbit": cmd_orbit,
    "rd-curve": cmd_rd_curve,
    "critical-alpha": cmd_critical_alpha,
    "msf": cmd_msf,
    "rays": cmd_rays,
    "expansion": cmd_expansion,
    "spectral": cmd_spectral,
    "netsim": cmd_netsim,
}

DATA = Path(__file__).resolve().parents[2] / "data"

# one recipe per figure: lists of argument vectors, run in order
RECIPES = {
    2: [["orbit"], ["rd-curve", "--orbit", "{out}/orbit.txt", "--k2-max", "1.2",
                    "--n-k2", "241"]],
    3: [["orbit"], ["rd-curve", "--orbit", "{out}/orbit.txt", "--mode-k2", "0.3844",
                    "--n-k2", "25"]],
    4: [["orbit"],
        ["netsim", "--orbit", "{out}/orbit.txt", "--family", "two-node", "--D", "0.1922,0,0",
         "--stride", "4"],
        ["spectral", "--orbit", "{out}/orbit.txt", "--family", "two-node",
         "--s-max", "0.4", "--n-s", "400"]],
    5: [["orbit"],
        ["netsim", "--orbit", "{out}/orbit.txt", "--family", "two-node", "--D", "0.15,0,0",
         "--initial", "0.1,0.15,0.05,0.3,0.15,0.05", "--t-end-periods", "600",
         "--stride", "8"]],
    6: [["orbit", "--alpha", "2.3435"],
        ["spectral", "--alpha", "2.3435", "--orbit", "{out}/orbit.txt",
         "--matrix", str(DATA / "three_node.csv"),
         "--s-max", "0.2", "--n-s", "400"]],
    7: [["orbit"],
        ["spectral", "--matrix", str(DATA / "directed_cycle4.csv")],
        ["netsim", "--orbit", "{out}/orbit.txt", "--matrix", str(DATA / "directed_cycle4.csv"),
         "--D", "0.04,0,0", "--stride", "4"]],
    8: [["orbit"],
        ["rays", "--orbit", "{out}/orbit.txt", "--theta", "0.4125pi,0.4625pi",
         "--profile-n", "300"]],
    9: [["orbit"],
        ["msf", "--orbit", "{out}/orbit.txt", "--polar", "--r-max", "1.5", "--res", "300"],
        ["msf", "--orbit", "{out}/orbit.txt", "--cartesian", "--res", "150"]],
}


def cmd_reproduce(args) -> int:
    figs = sorted(RECIPES) if not args.figure else [int(f) for f in args.figure]
    for f in figs:
        if f not in RECIPES:
            raise ConfigError(f"no recipe for figure {f}; available: {sorted(RECIPES)}")
    root = Path(args.out)
    for f in figs:
        out = root / f"fig{f}"
        seen: dict = {}
        for argv in RECIPES[f]:
            name = argv[0]
            seen[name] = seen.get(name, 0) + 1
            if seen[name] > 1:
                name += f"-{seen[name]}"
            sub = out / name if argv[0] != "orbit" else out
            full = [a.replace("{out}", str(out)) for a in argv] + ["--out", str(sub)]
            if args.workers is not None:
                full += ["--workers", str(args.workers)]
            print(f"[fig{f}] cycsync " + " ".join(full), flush=True)
            code = main(full)
            if code != EXIT_OK:
                return code
    return EXIT_OK


# argument parsing ---------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat JSON config file; flags override it")
    p.add_argument("--out")
    p.add_argument("--alpha", type=parse_float)
    p.add_argument("--gamma", type=parse_float)
    p.add_argument("--r", help="three growth rates, comma separated")
    p.add_argument("--rel-tol", type=parse_float)
    p.add_argument("--abs-tol", type=parse_float)
    p.add_argument("--margin", type=parse_float, help="instability margin above |mu|=1")
    p.add_argument("--workers", type=int)
    p.add_argument("--seed", type=int)


def _orbit_opt(p):
    p.add_argument("--orbit", help="orbit file written by the orbit command")


def _matrix_opts(p):
    p.add_argument("--matrix", help="dense CSV coupling matrix")
    p.add_argument("--edges", help="edge list: src, dst, weight (0-based)")
    p.add_argument("--complete-diagonal", action="store_const", const=True)
    p.add_argument("--family", choices=["complete", "ring", "directed-cycle", "two-node"])
    p.add_argument("--m", type=int)
    p.add_argument("--weight", type=parse_float)


def build_parser() -> argparse.ArgumentParser:
    top = _Parser(prog="cycsync", description=__doc__.splitlines()[0])
    sub = top.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("orbit", help="locate the limit cycle")
    _common(p)

    p = sub.add_parser("rd-curve", help="multipliers against k^2 for diffusion d")
    _common(p)
    _orbit_opt(p)
    p.add_argument("--d", help="diffusivities, e.g. 1,0,0")
    p.add_argument("--k2-max", type=parse_float)
    p.add_argument("--n-k2", type=int)
    p.add_argument("--mode-k2", type=parse_float, help="also dump the leading mode here")
    p.add_argument("--tol", type=parse_float)

    p = sub.add_parser("critical-alpha", help="onset of the finite-k instability")
    _common(p)
    p.add_argument("--d")
    p.add_argument("--alpha-lo", type=parse_float)
    p.add_argument("--alpha-hi", type=parse_float)
    p.add_argument("--k2-max", type=parse_float)
    p.add_argument("--tol", type=parse_float)

    p = sub.add_parser("msf", help="master stability function on a grid")
    _common(p)
    _orbit_opt(p)
    p.add_argument("--ratios", dest="d", help="D ratios (1, Dv/Du, Dw/Du)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--polar", action="store_const", const=True, dest="polar")
    g.add_argument("--cartesian", action="store_const", const=False, dest="polar")
    p.add_argument("--r-max", type=parse_float)
    p.add_argument("--res", type=int, help="resolution along both axes")
    p.add_argument("--n-r", type=int)
    p.add_argument("--n-theta", type=int)
    for name in ("--re-min", "--re-max", "--im-min", "--im-max"):
        p.add_argument(name, type=parse_float)

    p = sub.add_parser("rays", help="instability intervals along rays")
    _common(p)
    _orbit_opt(p)
    p.add_argument("--ratios", dest="d")
    p.add_argument("--theta", required=False, help="angles, comma separated (pi suffix ok)")
    p.add_argument("--r-max", type=parse_float)
    p.add_argument("--resolution", type=int)
    p.add_argument("--profile-n", type=int, help="also dump |mu1| on this many R nodes")
    p.add_argument("--tol", type=parse_float)

    p = sub.add_parser("expansion", help="small-shift expansion of the neutral multiplier")
    _common(p)
    _orbit_opt(p)
    p.add_argument("--ratios", dest="d")

    p = sub.add_parser("spectral", help="coupling-matrix structure and network stability")
    _common(p)
    _orbit_opt(p)
    _matrix_opts(p)
    p.add_argument("--D", help="coupling strengths for a stability verdict")
    p.add_argument("--ratios", dest="d", help="D ratios for the strength sweep")
    p.add_argument("--s-max", type=parse_float, help="sweep D = s*ratios up to s_max")
    p.add_argument("--n-s", type=int)
    p.add_argument("--tol", type=parse_float)

    p = sub.add_parser("netsim", help="simulate the coupled network")
    _common(p)
    _orbit_opt(p)
    _matrix_opts(p)
    p.add_argument("--D")
    p.add_argument("--t-end-periods", type=parse_float)
    p.add_argument("--initial", help="3m initial densities, node by node")
    p.add_argument("--perturbation", type=parse_float)
    p.add_argument("--stride", type=int)

    p = sub.add_parser("reproduce", help="run the recipe for each figure")
    p.add_argument("--out", default="reproduce")
    p.add_argument("--figure", action="append", help="figure number (repeatable)")
    p.add_argument("--workers", type=int)
    return top


_SKIP = {"command", "config", "res"}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "reproduce":
            return cmd_reproduce(args)
        overrides = {k: v for k, v in vars(args).items() if k not in _SKIP}
        if getattr(args, "res", None) is not None:
            overrides["n_r"] = overrides["n_theta"] = args.res
        cfg = resolve_config(args.config, overrides)
        return COMMANDS[args.command](cfg)
    except (ConfigError, argparse.ArgumentTypeError, ConditionViolation,
            NonPositiveComponent) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NoCycle as exc:
        print(f"no cycle: {exc}", file=sys.stderr)
        return EXIT_NOCYCLE
    except HeteroclinicSuspect as exc:
        print(f"heteroclinic: {exc}", file=sys.stderr)
        return EXIT_HETEROCLINIC
    except (DataError, OSError, spectral.RowSumViolation, spectral.NotMetzler) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OrbitError, IntegrationError, floquet.EigenFailure, floquet.NoOnset,
            msf.FitIllConditioned, spectral.NotDiagonalizable, netsim.TooShort,
            np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        # remaining precondition failures from the library
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

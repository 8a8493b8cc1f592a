"""Coupling matrices: structure, spectra and reduction of network stability.

A coupling matrix ``C`` is an ``m x m`` real matrix with zero row sums.  Its
eigenvalues ``lam`` turn the network linearization into independent
three-dimensional problems with shifts ``Om_i = D_i * lam``.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .floquet import (INSTABILITY_MARGIN, FloquetSpectrum, StabilityParameter,
                      VARIATIONAL_CONFIG, spectra_batch)
from .ode import IntegratorConfig, integrate
from .orbit import PeriodicOrbit

__all__ = [
    "CouplingMatrix",
    "CouplingSpectrum",
    "EigenBlock",
    "RowSumViolation",
    "NotMetzler",
    "NotDiagonalizable",
    "EmptyDescriptor",
    "ReducibleCoupling",
    "analyze",
    "standardized_laplacian",
    "reduce_network",
    "NetworkStability",
    "jordan_verdict",
    "network_monodromy",
    "coupling_sweep",
    "coupling_instability",
    "PolynomialOperator",
    "TabulatedKernel",
    "operator_symbol",
    "complete",
    "ring",
    "directed_cycle",
    "two_node",
    "read_matrix_csv",
    "read_edge_list",
    "write_matrix_csv",
]

ROW_SUM_TOL = 1e-12
MAX_NODES = 1000
RANK_TOL = 1e-8
CLUSTER_TOL = 1e-6


class RowSumViolation(ValueError):
    pass


class NotMetzler(ValueError):
    pass


class NotDiagonalizable(ValueError):
    pass


class EmptyDescriptor(ValueError):
    pass


class ReducibleCoupling(UserWarning):
    pass


@dataclass(frozen=True)
class CouplingMatrix:
    entries: np.ndarray

    def __post_init__(self):
        a = np.array(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ValueError(f"coupling matrix must be square, got shape {a.shape}")
        if a.shape[0] > MAX_NODES:
            raise ValueError(f"at most {MAX_NODES} nodes are supported")
        if not np.all(np.isfinite(a)):
            raise ValueError("coupling matrix has non-finite entries")
        rs = np.abs(a.sum(axis=1))
        if np.any(rs > ROW_SUM_TOL):
            j = int(np.argmax(rs))
            raise RowSumViolation(f"row {j} sums to {a[j].sum():.3e}; coupling must conserve mass")
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))

    def scaled(self, s: float) -> "CouplingMatrix":
        return CouplingMatrix(s * self.entries)

    def permuted(self, perm: Sequence[int]) -> "CouplingMatrix":
        p = np.asarray(perm)
        return CouplingMatrix(self.entries[np.ix_(p, p)])


@dataclass(frozen=True)
class EigenBlock:
    """One distinct eigenvalue with its Jordan structure."""

    value: complex
    algebraic: int
    geometric: int
    blocks: tuple  # Jordan block sizes, descending


@dataclass(frozen=True)
class CouplingSpectrum:
    eigenvalues: np.ndarray
    structure: tuple
    is_metzler: bool
    is_irreducible: bool
    gershgorin_radius: float
    standardized_scale: float

    @property
    def diagonalizable(self) -> bool:
        return all(b.algebraic == b.geometric for b in self.structure)


def _is_metzler(a: np.ndarray) -> bool:
    off = a[~np.eye(len(a), dtype=bool)]
    return bool(np.all(off >= -1e-12) and np.all(np.diag(a) <= 1e-12))


def _reach(adj: np.ndarray, start: int = 0) -> np.ndarray:
    seen = np.zeros(len(adj), dtype=bool)
    stack = [start]
    seen[start] = True
    while stack:
        i = stack.pop()
        for j in np.flatnonzero(adj[i]):
            if not seen[j]:
                seen[j] = True
                stack.append(j)
    return seen


def _is_irreducible(a: np.ndarray) -> bool:
    adj = np.abs(a) > 1e-12
    np.fill_diagonal(adj, False)
    return bool(_reach(adj).all() and _reach(adj.T).all())


def _rank(a: np.ndarray, tol: float) -> int:
    s = np.linalg.svd(a, compute_uv=False)
    return int(np.sum(s > tol))


def _cluster(vals: np.ndarray, tol: float) -> list[np.ndarray]:
    groups: list[list[int]] = []
    for i, z in enumerate(vals):
        for g in groups:
            if abs(vals[g[0]] - z) <= tol:
                g.append(i)
                break
        else:
            groups.append([i])
    return [np.array(g) for g in groups]


def _jordan_blocks(a: np.ndarray, lam: complex, alg: int, scale: float) -> tuple:
    m = len(a)
    shifted = a - lam * np.eye(m)
    ranks = [m]
    power = np.eye(m, dtype=complex)
    p = 0
    while ranks[-1] > m - alg and p < alg:
        p += 1
        power = power @ shifted
        ranks.append(_rank(power, RANK_TOL * scale ** p))
    # n_p = number of blocks of size >= p
    n = [ranks[i - 1] - ranks[i] for i in range(1, len(ranks))] + [0]
    sizes = []
    for size in range(len(n) - 1, 0, -1):
        sizes += [size] * (n[size - 1] - n[size])
    return tuple(sorted(sizes, reverse=True))


def _sort_key(z: complex):
    return (round(z.real, 12), round(z.imag, 12))


def analyze(C: CouplingMatrix) -> CouplingSpectrum:
    """Spectrum, Jordan structure and structural flags of a coupling matrix."""
    if not isinstance(C, CouplingMatrix):
        C = CouplingMatrix(C)
    a = C.entries
    m = C.m
    scale = max(C.norm, 1.0)
    vals = np.linalg.eigvals(a).astype(complex)
    blocks = []
    for g in _cluster(vals, CLUSTER_TOL * scale):
        lam = complex(vals[g].mean())
        if abs(lam.imag) <= CLUSTER_TOL * scale:
            lam = complex(lam.real, 0.0)
        sizes = _jordan_blocks(a, lam, len(g), scale)
        if sum(sizes) != len(g):
            # rank sequence disagrees with the cluster; fall back to simple blocks
            sizes = (1,) * len(g)
        blocks.append(EigenBlock(lam, len(g), len(sizes), sizes))
    blocks.sort(key=lambda b: _sort_key(b.value))
    eig = np.array(sorted(vals, key=_sort_key))
    metzler = _is_metzler(a)
    irreducible = _is_irreducible(a)
    if not irreducible:
        warnings.warn("coupling matrix is reducible; its blocks are analyzed jointly",
                      ReducibleCoupling)
    c = float(np.min(np.diag(a)))
    off = a[~np.eye(m, dtype=bool)]
    h = float(off.max()) if off.size else 0.0
    return CouplingSpectrum(eig, tuple(blocks), metzler, irreducible, -c, h * m)


def standardized_laplacian(C: CouplingMatrix):
    """Return ``(h*m, L, arg_check)`` with ``L = -C/(h m)``.

    ``arg_check`` is True when every eigenvalue of ``L`` in the closed upper
    half-plane has argument in ``[0, pi/2 - pi/m]``.
    """
    if not isinstance(C, CouplingMatrix):
        C = CouplingMatrix(C)
    a = C.entries
    m = C.m
    if not _is_metzler(a):
        raise NotMetzler("standardized Laplacian needs a Metzler coupling matrix")
    off = a[~np.eye(m, dtype=bool)]
    h = float(off.max()) if off.size else 0.0
    if h <= 0:
        raise NotMetzler("coupling matrix has no positive off-diagonal entry")
    scale = h * m
    L = -a / scale
    mu = np.linalg.eigvals(L)
    bound = math.pi / 2 - math.pi / m + 1e-8
    upper = mu[mu.imag >= 0]
    args = np.angle(upper)
    # eigenvalues at the origin have no defined argument
    args = args[np.abs(upper) > 1e-12]
    ok = bool(np.all(args >= -1e-8) and np.all(args <= bound))
    return scale, L, ok


@dataclass(frozen=True)
class NetworkStability:
    eigenvalues: np.ndarray
    spectra: tuple  # one FloquetSpectrum per entry of ``eigenvalues``
    unstable: bool
    leading_modulus: float
    leading_eigenvalue: complex


def _distinct_blocks(C: CouplingMatrix) -> CouplingSpectrum:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ReducibleCoupling)
        return analyze(C)


def _block_spectra(values: Sequence[complex], orbit: PeriodicOrbit, D: Sequence[float],
                   cfg: Optional[IntegratorConfig]) -> list[FloquetSpectrum]:
    # evaluate the lower half-plane only; upper eigenvalues are conjugates
    lower = [z for z in values if z.imag <= 0]
    done = dict(zip(lower, spectra_batch(
        orbit, [StabilityParameter.network(D, z) for z in lower], cfg)))
    out = []
    for z in values:
        if z in done:
            out.append(done[z])
            continue
        partner = min(lower, key=lambda w: abs(w - z.conjugate()))
        s = done[partner]
        out.append(FloquetSpectrum(np.conj(s.multipliers), s.parameter.conj(),
                                   s.orbit_id, np.conj(s.log_det)))
    return out


def _verdict(values, spectra, scale, margin):
    lead, lead_z = 0.0, 0j
    for z, s in zip(values, spectra):
        if abs(z) <= 1e-9 * scale:
            continue  # the neutral time-shift block
        if s.leading_modulus > lead:
            lead, lead_z = s.leading_modulus, z
    return bool(lead > 1.0 + margin), lead, lead_z


def reduce_network(C: CouplingMatrix, orbit: PeriodicOrbit, D: Sequence[float],
                   cfg: Optional[IntegratorConfig] = None,
                   margin: float = INSTABILITY_MARGIN) -> NetworkStability:
    """Stability of the synchronized cycle via the eigenbasis of ``C``.

    Each distinct eigenvalue is one batched Floquet evaluation; results come
    back sorted by (Re lam, Im lam).
    """
    if not isinstance(C, CouplingMatrix):
        C = CouplingMatrix(C)
    spec = _distinct_blocks(C)
    if not spec.diagonalizable:
        raise NotDiagonalizable("coupling matrix has a nontrivial Jordan block; "
                                "use jordan_verdict")
    values = [b.value for b in spec.structure]
    spectra = _block_spectra(values, orbit, D, cfg)
    unstable, lead, lead_z = _verdict(values, spectra, max(C.norm, 1.0), margin)
    return NetworkStability(np.array(values), tuple(spectra), unstable, lead, lead_z)


def jordan_verdict(C: CouplingMatrix, orbit: PeriodicOrbit, D: Sequence[float],
                   cfg: Optional[IntegratorConfig] = None,
                   margin: float = INSTABILITY_MARGIN) -> str:
    """"unstable", "stable" or "stable-diagonal-blocks".

    An unstable diagonal block always makes the network unstable.  Stable
    diagonal blocks prove stability only when every Jordan block is trivial.
    """
    if not isinstance(C, CouplingMatrix):
        C = CouplingMatrix(C)
    spec = _distinct_blocks(C)
    values = [b.value for b in spec.structure]
    spectra = _block_spectra(values, orbit, D, cfg)
    unstable, _, _ = _verdict(values, spectra, max(C.norm, 1.0), margin)
    if unstable:
        return "unstable"
    return "stable" if spec.diagonalizable else "stable-diagonal-blocks"


def network_monodromy(C: CouplingMatrix, orbit: PeriodicOrbit, D: Sequence[float],
                      cfg: Optional[IntegratorConfig] = None) -> np.ndarray:
    """Monodromy of the full ``3m``-dimensional network linearization.

    State index ``3*j + i`` is species ``i`` at node ``j``.  No eigenbasis is
    used, which makes this an independent check of :func:`reduce_network`.
    """
    if not isinstance(C, CouplingMatrix):
        C = CouplingMatrix(C)
    cfg = cfg or VARIATIONAL_CONFIG
    m = C.m
    coupling = np.kron(C.entries, np.diag(np.asarray(D, dtype=float)))
    jac = orbit.model.jacobian

    def rhs(t, Y):
        A = np.kron(np.eye(m), jac(orbit(t))) + coupling
        return A @ Y

    M = np.eye(3 * m)
    edges = np.linspace(0.0, orbit.period, max(1, int(math.ceil(orbit.period))) + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        M = integrate(rhs, np.eye(3 * m), (a, b), cfg, store=False).y_final @ M
    return M


def _nonzero_values(C: CouplingMatrix) -> list[complex]:
    spec = _distinct_blocks(C)
    scale = max(C.norm, 1.0)
    return [b.value for b in spec.structure if abs(b.value) > 1e-9 * scale]


def coupling_sweep(C: CouplingMatrix, orbit: PeriodicOrbit, strengths: Sequence[float],
                   ratios: Sequence[float] = (1.0, 0.0, 0.0),
                   cfg: Optional[IntegratorConfig] = None):
    """Leading modulus per nonzero eigenvalue along ``D = s * ratios``.

    Returns ``(values, moduli)`` with ``moduli`` of shape ``(len(s), len(values))``.
    """
    if not isinstance(C, CouplingMatrix):
        C = CouplingMatrix(C)
    values = _nonzero_values(C)
    lower = [z for z in values if z.imag <= 0]
    s = np.asarray(strengths, dtype=float)
    params = [StabilityParameter.ratio(x * z, ratios) for x in s for z in lower]
    mods = np.array([sp.leading_modulus for sp in spectra_batch(orbit, params, cfg, 256)])
    mods = mods.reshape(len(s), len(lower))
    # conjugate eigenvalues share moduli
    cols = [lower.index(min(lower, key=lambda w: abs(w - z.conjugate()))) for z in values]
    return np.array(values), mods[:, cols]


def coupling_instability(C: CouplingMatrix, orbit: PeriodicOrbit, s_max: float,
                         ratios: Sequence[float] = (1.0, 0.0, 0.0),
                         cfg: Optional[IntegratorConfig] = None, resolution: int = 400,
                         tol: float = 1e-5, margin: float = INSTABILITY_MARGIN) -> list[tuple]:
    """Intervals of coupling strength ``s`` in ``(0, s_max]`` with an unstable mode."""
    from .msf import instability_intervals

    if not isinstance(C, CouplingMatrix):
        C = CouplingMatrix(C)

    def evaluate(xs):
        return coupling_sweep(C, orbit, xs, ratios, cfg)[1].max(axis=1)

    xs = s_max * np.arange(1, resolution + 1) / resolution
    return instability_intervals(evaluate, xs, 0.0, tol, margin)


# operator symbols ---------------------------------------------------------

@dataclass(frozen=True)
class PolynomialOperator:
    """Per-species coefficients ``a_j`` of ``sum_j a_j d^j/dx^j``."""

    coeffs: tuple  # three sequences, lowest order first


@dataclass(frozen=True)
class TabulatedKernel:
    """Per-species Fourier transform of a convolution kernel on a k grid."""

    k: np.ndarray
    ghat: np.ndarray  # shape (3, len(k)), complex

    def __post_init__(self):
        k = np.asarray(self.k, dtype=float)
        g = np.asarray(self.ghat, dtype=complex)
        if g.ndim != 2 or g.shape[0] != 3 or g.shape[1] != k.size:
            raise ValueError("ghat must have shape (3, len(k))")
        if k.size and np.any(np.diff(k) <= 0):
            raise ValueError("k grid must increase")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "ghat", g)


def operator_symbol(op, k: float) -> tuple:
    """Per-species shifts ``Om_s`` of a spatial operator at wavenumber ``k``."""
    if isinstance(op, PolynomialOperator):
        if len(op.coeffs) != 3 or all(len(c) == 0 for c in op.coeffs):
            raise EmptyDescriptor("polynomial operator has no coefficients")
        ik = 1j * k
        return tuple(complex(sum(a * ik ** j for j, a in enumerate(c))) for c in op.coeffs)
    if isinstance(op, TabulatedKernel):
        if op.k.size == 0:
            raise EmptyDescriptor("tabulated kernel is empty")
        if not op.k[0] <= k <= op.k[-1]:
            raise ValueError(f"k={k} outside the tabulated range [{op.k[0]}, {op.k[-1]}]")
        return tuple(complex(np.interp(k, op.k, g.real) + 1j * np.interp(k, op.k, g.imag))
                     for g in op.ghat)
    raise EmptyDescriptor(f"unsupported operator descriptor {type(op).__name__}")


# built-in families and file formats --------------------------------------

def complete(m: int, weight: float = 1.0) -> CouplingMatrix:
    a = np.full((m, m), weight)
    np.fill_diagonal(a, -(m - 1) * weight)
    return CouplingMatrix(a)


def ring(m: int, weight: float = 1.0) -> CouplingMatrix:
    """Undirected nearest-neighbour ring."""
    if m < 3:
        raise ValueError("a ring needs at least 3 nodes")
    a = np.zeros((m, m))
    for j in range(m):
        a[j, (j + 1) % m] += weight
        a[j, (j - 1) % m] += weight
        a[j, j] = -2 * weight
    return CouplingMatrix(a)


def directed_cycle(m: int, weight: float = 1.0) -> CouplingMatrix:
    """Node ``j`` receives from node ``j+1`` (mod m)."""
    if m < 2:
        raise ValueError("a cycle needs at least 2 nodes")
    a = -weight * np.eye(m)
    for j in range(m):
        a[j, (j + 1) % m] += weight
    return CouplingMatrix(a)


def two_node(weight: float = 1.0) -> CouplingMatrix:
    return CouplingMatrix([[-weight, weight], [weight, -weight]])


def read_matrix_csv(path) -> CouplingMatrix:
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            rows.append([float(x) for x in row])
    if not rows:
        raise ValueError(f"{path}: no matrix rows")
    return CouplingMatrix(np.array(rows))


def read_edge_list(path, m: Optional[int] = None,
                   complete_diagonal: bool = False) -> CouplingMatrix:
    """Read ``src, dst, weight`` lines (0-based) into ``C[src, dst] += weight``.

    With ``complete_diagonal`` the diagonal is set so every row sums to zero.
    """
    edges = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 3:
            raise ValueError(f"{path}: expected 'src dst weight', got {line!r}")
        edges.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if not edges:
        raise ValueError(f"{path}: no edges")
    n = max(max(s, d) for s, d, _ in edges) + 1
    m = n if m is None else m
    if n > m:
        raise ValueError(f"{path}: node index {n - 1} exceeds m={m}")
    a = np.zeros((m, m))
    for s, d, w in edges:
        a[s, d] += w
    if complete_diagonal:
        np.fill_diagonal(a, 0.0)
        np.fill_diagonal(a, -a.sum(axis=1))
    return CouplingMatrix(a)


def write_matrix_csv(C: CouplingMatrix, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for row in C.entries:
            w.writerow([repr(float(x) + 0.0) for x in row])

import cmath
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import solve_ivp

from cycsync.floquet import (NoOnset, StabilityParameter, critical_alpha, floquet_mode,
                             floquet_spectrum, is_unstable, monodromy, monodromy_batch,
                             onset_measure, rd_spectrum_curve, spectra_batch,
                             trace_integral)
from cycsync.models import LVParams

D_U = (1.0, 0.0, 0.0)


def scipy_monodromy(orbit, omega):
    om = np.asarray(omega, dtype=complex)
    jac = orbit.model.jacobian

    def rhs(t, y):
        Y = y.reshape(3, 3)
        return ((jac(orbit(t)) + np.diag(om)) @ Y).ravel()

    sol = solve_ivp(rhs, (0, orbit.period), np.eye(3, dtype=complex).ravel(),
                    method="DOP853", rtol=1e-12, atol=1e-14)
    return sol.y[:, -1].reshape(3, 3)


def test_neutral_spectrum(ref_orbit):
    s = floquet_spectrum(ref_orbit, StabilityParameter((0, 0, 0)))
    assert abs(s.multipliers[0] - 1) < 1e-6
    assert abs(s.multipliers[2]) < 1e-3
    assert s.leading_modulus < 1 + 1e-6


@pytest.mark.parametrize("omega", [(-0.3, 0, 0), (-0.2 - 0.4j, 0, 0), (-0.1, -0.05j, 0.02)])
def test_monodromy_matches_scipy(ref_orbit, omega):
    ours = monodromy(ref_orbit, StabilityParameter(omega))
    ref = scipy_monodromy(ref_orbit, omega)
    np.testing.assert_allclose(ours, ref, rtol=1e-6, atol=1e-7 * np.abs(ref).max())


def test_abel_identity(ref_orbit, rng):
    for _ in range(5):
        om = rng.uniform(-1.5, 0.5, 3) + 1j * rng.uniform(-1, 1, 3)
        p = StabilityParameter(tuple(om))
        s = floquet_spectrum(ref_orbit, p)
        tr = trace_integral(ref_orbit, p)
        assert abs(s.log_det - tr) <= 1e-6 * abs(tr)
        assert abs(np.sum(np.log(s.multipliers.astype(complex))).real - tr.real) <= 1e-5 * abs(tr)


def test_uniform_shift_scales_all_multipliers(ref_orbit):
    base = floquet_spectrum(ref_orbit, StabilityParameter((0, 0, 0))).multipliers
    T = ref_orbit.period
    for c in (-0.05, -0.5, -3.0):
        s = floquet_spectrum(ref_orbit, StabilityParameter((c, c, c))).multipliers
        lead = base[:2] * math.exp(c * T)
        np.testing.assert_allclose(s[:2], lead, rtol=1e-6)


def test_strongly_damped_shift_keeps_determinant(ref_orbit):
    p = StabilityParameter((-100, -100, -100))
    s = floquet_spectrum(ref_orbit, p)
    tr = trace_integral(ref_orbit, p)
    assert abs(s.log_det.real - tr.real) < 1e-6 * abs(tr)


@settings(deadline=None, max_examples=8)
@given(re=st.floats(-1.5, 0.0), im=st.floats(0.01, 1.5))
def test_conjugate_parameters_give_conjugate_spectra(ref_orbit, re, im):
    p = StabilityParameter.ratio(complex(re, im))
    a, b = spectra_batch(ref_orbit, [p, p.conj()])
    np.testing.assert_allclose(np.sort_complex(a.multipliers),
                               np.sort_complex(np.conj(b.multipliers)), atol=1e-9)


def test_batch_matches_single(ref_orbit):
    ps = [StabilityParameter.ratio(-r * cmath.exp(0.3j)) for r in (0.1, 0.5, 1.0)]
    batch = spectra_batch(ref_orbit, ps)
    for p, s in zip(ps, batch):
        one = floquet_spectrum(ref_orbit, p)
        np.testing.assert_allclose(s.multipliers, one.multipliers, rtol=1e-7, atol=1e-10)


def test_parameter_constructors():
    assert StabilityParameter.diffusive((1, 0.5, 0), 2.0).omega == (-2, -1, 0)
    assert StabilityParameter.network((0.2, 0, 0), -5).omega == (-1, 0, 0)
    with pytest.raises(ValueError):
        StabilityParameter((1, 2))
    with pytest.raises(ValueError):
        StabilityParameter((math.nan, 0, 0))


def test_is_unstable_margin():
    assert not is_unstable(1 + 1e-8)
    assert is_unstable(1 + 1e-6)


def test_period_doubling_band(ref_orbit):
    # the leading multiplier passes -1 near k^2 = 0.3844
    s = floquet_spectrum(ref_orbit, StabilityParameter.diffusive(D_U, 0.3844))
    assert s.leading.real < -1 and abs(s.leading.imag) < 1e-8
    outside = [floquet_spectrum(ref_orbit, StabilityParameter.diffusive(D_U, k2))
               for k2 in (0.30, 0.50)]
    assert all(not o.unstable() for o in outside)


@pytest.mark.filterwarnings("ignore::cycsync.floquet.BranchAmbiguity")
def test_rd_curve_branches_survive_refinement(ref_orbit):
    fine = rd_spectrum_curve(ref_orbit, D_U, np.linspace(0, 1.0, 401))
    coarse = rd_spectrum_curve(ref_orbit, D_U, np.linspace(0, 1.0, 41))
    f = np.array([s.multipliers for s in fine])
    c = np.array([s.multipliers for s in coarse])
    assert abs(f[0, 0] - 1) < 1e-6
    np.testing.assert_allclose(c, f[::10], atol=1e-8)
    # consecutive points on the fine grid stay close on every branch
    assert np.abs(np.diff(f, axis=0)).max() < 0.15


def test_rd_curve_grid_validation(ref_orbit):
    with pytest.raises(ValueError):
        rd_spectrum_curve(ref_orbit, D_U, [0.1, 0.2])


def test_onset_measure_above_threshold(ref_orbit):
    m, k2, mu = onset_measure(ref_orbit, D_U)
    assert m > 1 and 0.3 < k2 < 0.45 and mu.real < 0


def test_critical_alpha_needs_bracket():
    with pytest.raises(NoOnset):
        critical_alpha((2.25, 2.30))


def test_floquet_mode_grows_by_multiplier(ref_orbit):
    p = StabilityParameter.diffusive(D_U, 0.3844)
    t, mode, base = floquet_mode(ref_orbit, p, n_periods=2, samples=2001)
    mu = floquet_spectrum(ref_orbit, p).leading.real
    assert np.max(np.abs(mode[0])) == pytest.approx(1.0)
    np.testing.assert_allclose(mode[1000], mu * mode[0], rtol=1e-5, atol=1e-6)
    np.testing.assert_allclose(base[1000], base[0], atol=1e-8)


def test_monodromy_batch_shapes(ref_orbit):
    M, ld, ls = monodromy_batch(ref_orbit, [(0, 0, 0), (-1, 0, 0)])
    assert M.shape == (2, 3, 3) and ld.shape == (2,) and ls.shape == (2,)


def test_tangent_is_the_neutral_eigenvector(ref_orbit):
    M = monodromy(ref_orbit, StabilityParameter((0, 0, 0)))
    f = ref_orbit.model.rhs(ref_orbit.y0)
    np.testing.assert_allclose(M @ f, f, atol=1e-6 * np.linalg.norm(f))
    mu, vecs = np.linalg.eig(M)
    v = vecs[:, np.argmin(np.abs(mu - 1))]
    cos = abs(np.vdot(v, f)) / (np.linalg.norm(v) * np.linalg.norm(f))
    assert math.acos(min(cos, 1.0)) < 1e-4


def test_conjugate_monodromy_entrywise(ref_orbit):
    p = StabilityParameter((-0.3 + 0.2j, 0.1j, 0))
    np.testing.assert_allclose(monodromy(ref_orbit, p.conj()),
                               np.conj(monodromy(ref_orbit, p)), atol=1e-10)


def test_strong_damping_kills_all_multipliers(ref_orbit):
    s = floquet_spectrum(ref_orbit, StabilityParameter((-100, -100, -100)))
    assert np.all(np.abs(s.multipliers) < 1e-3)


def test_neutral_spectrum_shape(ref_orbit):
    mu = floquet_spectrum(ref_orbit, StabilityParameter((0, 0, 0))).multipliers
    assert 0 < mu[1].real < 1 and abs(mu[1].imag) < 1e-9
    assert abs(mu[2]) < 1e-6


def test_leading_multiplier_at_critical_wavenumber(ref_orbit):
    s = floquet_spectrum(ref_orbit, StabilityParameter.diffusive(D_U, 0.62 ** 2))
    assert abs(s.leading.real + 1) < 2e-2 and abs(s.leading.imag) < 1e-2


@pytest.mark.filterwarnings("ignore::cycsync.floquet.BranchAmbiguity")
def test_below_onset_every_wavenumber_is_stable():
    from cycsync.orbit import find_orbit

    orbit = find_orbit(LVParams(2.30, 0.5))
    curve = rd_spectrum_curve(orbit, D_U, np.linspace(0, 1.2, 121))
    assert max(s.leading_modulus for s in curve[1:]) < 1


def test_two_node_mode_equals_diffusive_curve(ref_orbit):
    from cycsync.spectral import reduce_network, two_node

    D = 0.17
    red = reduce_network(two_node(), ref_orbit, (D, 0, 0))
    minus = [s for z, s in zip(red.eigenvalues, red.spectra) if abs(z + 2) < 1e-9][0]
    rd = floquet_spectrum(ref_orbit, StabilityParameter.diffusive(D_U, 2 * D))
    np.testing.assert_allclose(minus.multipliers, rd.multipliers, atol=1e-8)

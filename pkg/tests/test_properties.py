import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from measkerr.fock import FockVector, apply_number_diagonal, coherent_state
from measkerr.gaussian_map import channel_params, gamma_of, siegel_uv, siegel_from_rtheta, zeta_of
from measkerr.metrology import generalized_qfi
from measkerr.protocol import NO_CORRECTION, conditioned_state, linear_correction, outcome_pdf

N = 12
amps = st.lists(st.complex_numbers(max_magnitude=5, allow_nan=False, allow_infinity=False),
                min_size=N + 1, max_size=N + 1).filter(lambda a: np.linalg.norm(a) > 1e-3)
coef = st.floats(-0.3, 0.3)
r_s = st.floats(0.0, 6.0)
theta_s = st.floats(0.01, math.pi - 0.01)


@given(amps, amps, coef, coef)
def test_number_diagonal_map_is_linear(a, b, x, y):
    fa, fb = FockVector(np.array(a)), FockVector(np.array(b))
    expo = lambda n: complex(x, y) * n * n
    sa, _ = apply_number_diagonal(fa, expo)
    sb, _ = apply_number_diagonal(fb, expo)
    sab, _ = apply_number_diagonal(FockVector(fa.amplitudes + 2 * fb.amplitudes), expo)
    np.testing.assert_allclose(sab.amplitudes, sa.amplitudes + 2 * sb.amplitudes,
                               atol=1e-9 * max(1, np.abs(sab.amplitudes).max()))


@given(amps, coef, coef)
def test_number_diagonal_maps_commute(a, x, y):
    f = FockVector(np.array(a))
    e1 = lambda n: complex(x, 0.1) * n
    e2 = lambda n: complex(-0.05, y) * n * n
    s12, _ = apply_number_diagonal(apply_number_diagonal(f, e1)[0], e2)
    s21, _ = apply_number_diagonal(apply_number_diagonal(f, e2)[0], e1)
    np.testing.assert_allclose(s12.amplitudes, s21.amplitudes,
                               atol=1e-12 * max(1, np.abs(s12.amplitudes).max()))


@given(amps, st.floats(-10, 10))
def test_imaginary_exponent_is_unitary(a, y):
    f = FockVector(np.array(a))
    _, nrm = apply_number_diagonal(f, lambda n: 1j * y * n * n)
    assert abs(nrm - f.norm()) < 1e-12 * f.norm()


@given(r_s, st.floats(0.01, math.pi / 2))
def test_gamma_odd_about_quarter_turn(r, theta):
    assert abs(gamma_of(r, math.pi - theta) + gamma_of(r, theta)) < 1e-12 * max(1, math.exp(2 * r))


@given(r_s, theta_s)
def test_siegel_u_and_zeta_positive(r, theta):
    u, _ = siegel_uv(r, theta)
    assert u > 0
    assert zeta_of(r, theta) > 0


@given(r_s, theta_s, st.floats(0.2, 2.0))
def test_chi_is_minus_gamma(r, theta, g):
    cp = channel_params(siegel_from_rtheta(r, theta), g)
    assert abs(cp.chi + cp.gamma) <= 1e-12 * max(1.0, abs(cp.gamma))


@settings(max_examples=25, deadline=None)
@given(st.floats(0.0, 3.0), st.floats(0.2, 1.4), st.floats(0.3, 1.5), st.floats(0.0, 2.5))
def test_outcome_density_normalised(r, theta, g, alpha):
    probe = coherent_state(alpha, 40)
    pdf = outcome_pdf(probe, siegel_from_rtheta(r, theta), g)
    a, b = pdf.support()
    m = np.linspace(a, b, 20001)
    assert abs(np.trapezoid(pdf(m), m) - 1) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.floats(0.5, 3.0), st.floats(0.2, 1.4), st.floats(0.3, 1.5), st.floats(0.0, 2.5),
       st.floats(-5, 10))
def test_kraus_density_equals_mixture(r, theta, g, alpha, m):
    probe = coherent_state(alpha, 40)
    anc = siegel_from_rtheta(r, theta)
    _, dens = conditioned_state(probe, anc, g, m, linear_correction(theta))
    ref = outcome_pdf(probe, anc, g)(m)[0]
    assert abs(dens - ref) <= 1e-10 * ref + 1e-300


@settings(max_examples=15, deadline=None)
@given(st.floats(1.0, 4.0), st.floats(0.1, 1.4), st.floats(0.5, 2.0))
def test_total_fisher_is_sum_of_terms(r, theta, alpha):
    for corr in (NO_CORRECTION, linear_correction(theta)):
        t = generalized_qfi(coherent_state(alpha, 40), r, theta, 1.0, corr)
        assert t.F_classical >= 0 and t.F_quantum_avg >= 0
        assert t.F_total == t.F_classical + t.F_quantum_avg

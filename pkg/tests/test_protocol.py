import math

import numpy as np
import pytest
from scipy.stats import poisson

from measkerr.errors import ThetaNearSingular
from measkerr.fock import FockVector, coherent_state, fidelity, fock_state
from measkerr.gaussian_map import channel_params, siegel_from_rtheta, solve_theta_for_gamma
from measkerr.protocol import (EXACT_CORRECTION, NO_CORRECTION, CorrectionMode,
                               conditioned_populations, conditioned_state, correction_phase,
                               kraus_factors, linear_correction, outcome_pdf, sample_outcome)
from measkerr.quadrature import integrate


def _align(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """b rotated onto a's global phase."""
    ov = np.vdot(b, a)
    return b * ov / abs(ov)


def test_pure_decay_matches_direct_weights():
    r, g, m = 3.0, 1.0, 2.7
    anc = siegel_from_rtheta(r, math.pi / 2)
    zeta = math.exp(-2 * r) / 4
    state, dens = conditioned_state(coherent_state(2, 40), anc, g, m)
    n = np.arange(41)
    w = np.sqrt(poisson.pmf(n, 4)) * np.exp(-zeta * (n - m / g) ** 2)
    np.testing.assert_allclose(state.amplitudes, w / np.linalg.norm(w), atol=1e-12)
    expected = math.sqrt(2 * zeta / (math.pi * g * g)) * np.sum(w**2)
    assert abs(dens - expected) < 1e-12 * expected


def test_kraus_split_matches_conditioned_state():
    rng = np.random.default_rng(11)
    for _ in range(10):
        r, theta, g = rng.uniform(0.2, 3), rng.uniform(0.1, 1.5), rng.uniform(0.3, 1.5)
        alpha = rng.uniform(0.5, 2.5)
        anc = siegel_from_rtheta(r, theta)
        probe = coherent_state(alpha, 40)
        m = float(outcome_pdf(probe, anc, g).sample(rng))
        f = kraus_factors(anc, g, m, 40)
        expo = f["U"] + f["Uc"] + f["K"] + f["Kc"]
        # shift by the largest real part to stay in range
        amps = probe.amplitudes * np.exp(expo - expo.real.max())
        amps /= np.linalg.norm(amps)
        state, _ = conditioned_state(probe, anc, g, m)
        np.testing.assert_allclose(_align(state.amplitudes, amps), state.amplitudes, atol=1e-10)


def test_kraus_factor_roles():
    f = kraus_factors(siegel_from_rtheta(1.0, 0.4), 1.0, 2.0, 10)
    assert np.allclose(f["U"].real, 0) and np.allclose(f["Uc"].real, 0)
    assert np.allclose(f["K"].imag, 0) and np.allclose(f["Kc"].imag, 0)
    assert np.all(f["K"][1:] < 0)


def test_zero_outcome_is_regular():
    anc = siegel_from_rtheta(1.0, 0.5)
    state, dens = conditioned_state(coherent_state(1, 20), anc, 1.0, 0.0)
    assert np.all(np.isfinite(state.amplitudes)) and dens > 0


def test_near_unitary_limit_keeps_moduli():
    anc = siegel_from_rtheta(12.0, 0.7)
    probe = coherent_state(2, 40)
    for m in (-3.0, 0.0, 1.7, 4.0, 12.0):
        state, _ = conditioned_state(probe, anc, 1.0, m)
        overlap = np.sum(np.abs(state.amplitudes) * np.abs(probe.amplitudes))
        assert 1 - overlap**2 < 1e-8


@pytest.mark.parametrize("theta", [math.pi / 4, 1.0, 1.4])
def test_unitality_at_r10(theta):
    anc = siegel_from_rtheta(10.0, theta)
    g, nbar = 1.0, 4.0
    probe = coherent_state(math.sqrt(nbar), 40)
    zeta = channel_params(anc, g).zeta
    for m in np.linspace(-3 * g * nbar, 3 * g * nbar, 13):
        _, dens = conditioned_state(probe, anc, g, float(m))
        # squared norm of the map with its m-independent prefactor removed
        kept = dens / math.sqrt(2 * zeta / (math.pi * g * g))
        assert 1 - kept < 1e-6


def test_exact_correction_gives_target_state():
    r, g, alpha = 12.0, 1.0, 2.0
    theta = solve_theta_for_gamma(r, g, math.pi / 2)
    anc = siegel_from_rtheta(r, theta)
    probe = coherent_state(alpha, 40)
    gamma = channel_params(anc, g).gamma
    n = np.arange(41)
    target = FockVector(probe.amplitudes * np.exp(-1j * gamma * n * n), normalized=True)
    rng = np.random.default_rng(0)
    pdf = outcome_pdf(probe, anc, g)
    for m in pdf.sample(rng, size=10):
        state, _ = conditioned_state(probe, anc, g, float(m), EXACT_CORRECTION)
        assert fidelity(target, state) > 1 - 1e-6


def test_linear_correction_phase_at_bias():
    anc = siegel_from_rtheta(4.0, 0.3)
    phi = correction_phase(linear_correction(0.3), anc, 1.5, 2.0)
    assert abs(phi - 0.5 * 1.5 * 2.0 / math.tan(0.3)) < 1e-14


def test_linear_correction_error_is_second_order():
    theta0, g, m = 0.5, 1.0, 3.0

    def err(d):
        anc = siegel_from_rtheta(4.0, theta0 + d)
        return correction_phase(linear_correction(theta0), anc, g, m) - 0.5 * g * m / math.tan(theta0 + d)

    ratio = err(1e-3) / err(5e-4)
    assert abs(ratio - 4) < 0.05


def test_exact_phase_tracks_cot_at_large_squeezing():
    theta, g, m = 0.8, 1.0, 2.5
    anc = siegel_from_rtheta(15.0, theta)
    phi = correction_phase(EXACT_CORRECTION, anc, g, m)
    assert abs(phi - 0.5 * g * m / math.tan(theta)) < 1e-10


def test_correction_mode_validation():
    with pytest.raises(ValueError):
        CorrectionMode("other")
    with pytest.raises(ThetaNearSingular):
        linear_correction(0.0)
    with pytest.raises(ValueError):
        CorrectionMode("linear")


def test_vacuum_pdf_single_gaussian():
    anc = siegel_from_rtheta(1.0, 0.6)
    g = 0.8
    pdf = outcome_pdf(fock_state(0, 5), anc, g)
    zeta = channel_params(anc, g).zeta
    var = g * g / (4 * zeta)
    m = np.linspace(-5, 5, 11)
    np.testing.assert_allclose(pdf(m), np.exp(-m * m / (2 * var)) / math.sqrt(2 * math.pi * var),
                               rtol=1e-13)


def test_pdf_moments_closed_form():
    anc = siegel_from_rtheta(2.0, 0.5)
    g, alpha = 1.0, 2.0
    pdf = outcome_pdf(coherent_state(alpha, 40), anc, g)
    zeta = channel_params(anc, g).zeta
    assert abs(pdf.mean() - g * alpha**2) < 1e-9
    expected = g * g * (1 / (4 * zeta) + alpha**2 * (1 + alpha**2))
    assert abs(pdf.second_moment() - expected) < 1e-9 * expected


def test_pdf_moments_by_quadrature():
    anc = siegel_from_rtheta(2.0, 0.5)
    pdf = outcome_pdf(coherent_state(2, 40), anc, 1.0)
    a, b = pdf.support()
    res = integrate(lambda m: np.stack([pdf(m), m * pdf(m), m * m * pdf(m)], axis=1), a, b,
                    rtol=1e-12)
    p0, p1, p2 = res.value
    assert abs(p0 - 1) < 1e-9
    assert abs(p1 - pdf.mean()) < 1e-8
    assert abs(p2 - pdf.second_moment()) < 1e-8 * pdf.second_moment()


def test_density_matches_pdf():
    anc = siegel_from_rtheta(1.4, 0.9)
    probe = coherent_state(1.5, 30)
    pdf = outcome_pdf(probe, anc, 0.7)
    for m in (-1.0, 0.3, 2.2, 5.0):
        _, dens = conditioned_state(probe, anc, 0.7, m)
        assert abs(dens - pdf(m)[0]) < 1e-12 * dens


def test_completeness_random_parameters():
    rng = np.random.default_rng(3)
    for _ in range(10):
        r, theta = rng.uniform(0, 4), rng.uniform(0.1, 1.5)
        g, alpha = rng.uniform(0.3, 1.5), rng.uniform(0, 3)
        anc = siegel_from_rtheta(r, theta)
        probe = coherent_state(alpha, 50)
        pdf = outcome_pdf(probe, anc, g)
        a, b = pdf.support()
        # integrate the density returned by the conditioned map itself
        res = integrate(lambda ms: np.array([conditioned_state(probe, anc, g, float(x))[1]
                                             for x in ms]), a, b, rtol=1e-9)
        assert abs(res.value[0] - 1) < 1e-6


def test_pdf_same_for_every_correction():
    anc = siegel_from_rtheta(2.0, 0.4)
    probe = coherent_state(1.5, 30)
    dens = [conditioned_state(probe, anc, 1.0, 1.3, c)[1]
            for c in (NO_CORRECTION, linear_correction(0.4), EXACT_CORRECTION)]
    assert max(dens) - min(dens) < 1e-15 * dens[0]
    # the mixture form takes no correction argument at all
    assert "correction" not in outcome_pdf.__code__.co_varnames


def test_sampling_is_deterministic():
    pdf = outcome_pdf(coherent_state(2, 40), siegel_from_rtheta(1.0, 0.5), 1.0)
    assert sample_outcome(pdf, 42) == sample_outcome(pdf, 42)
    assert sample_outcome(pdf, 42).m != sample_outcome(pdf, 43).m


@pytest.mark.parametrize("alpha", [0.0, 2.0])
def test_sample_mean(alpha):
    anc = siegel_from_rtheta(1.0, 0.5)
    pdf = outcome_pdf(coherent_state(alpha, 40), anc, 1.0)
    draws = pdf.sample(np.random.default_rng(9), size=100_000)
    sd = math.sqrt(pdf.second_moment() - pdf.mean() ** 2)
    assert abs(draws.mean() - pdf.mean()) < 4 * sd / math.sqrt(draws.size)


def test_conditioned_populations_normalised():
    p, dens = conditioned_populations(coherent_state(2, 40).populations, 0.05, 1.0,
                                      np.array([-2.0, 0.0, 4.0, 30.0]))
    np.testing.assert_allclose(p.sum(axis=1), 1, atol=1e-14)
    assert np.all(dens > 0)

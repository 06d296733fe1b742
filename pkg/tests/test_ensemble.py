import math

import numpy as np
import pytest

from measkerr.ensemble import (SpinEnsemble, atomic_protocol_check, coherent_spin_state,
                               collective_ops, convergence_rows, hp_map, hp_operator_residual,
                               hp_rotation, hp_squeezing, jz_outcome_density, recenter,
                               sample_jz_outcome, squeezed_vacuum, weak_measure_jz)
from measkerr.errors import HPViolation
from measkerr.fock import FockVector, fidelity
from measkerr.quadrature import integrate


def test_spin_half_is_pauli_over_two():
    ops = collective_ops(0.5)
    np.testing.assert_allclose(ops["X"], [[0, 0.5], [0.5, 0]], atol=1e-15)
    np.testing.assert_allclose(ops["Y"], [[0, -0.5j], [0.5j, 0]], atol=1e-15)
    np.testing.assert_allclose(ops["Z"], [[0.5, 0], [0, -0.5]], atol=1e-15)


def test_spin_one_casimir():
    ops = collective_ops(1)
    c = sum(o @ o for o in ops.values())
    np.testing.assert_allclose(c, 2 * np.eye(3), atol=1e-14)


def test_commutator_at_large_spin():
    ops = collective_ops(50)
    X, Y, Z = ops["X"], ops["Y"], ops["Z"]
    assert np.abs(X @ Y - Y @ X - 1j * Z).max() < 1e-10


def test_invalid_spin_rejected():
    with pytest.raises(ValueError):
        collective_ops(0.3)
    with pytest.raises(ValueError):
        SpinEnsemble(1, np.ones(3))


def test_coherent_spin_state_points_along_x():
    ens = coherent_spin_state(20)
    assert abs(ens.expect("X") - 20) < 1e-10
    assert abs(ens.variance("Z") - 10) < 1e-9 and abs(ens.variance("Y") - 10) < 1e-9


def test_outcome_density_integrates_to_one():
    ens = coherent_spin_state(10, sigma_meas=1.5)
    res = integrate(lambda m: jz_outcome_density(ens, m), -30, 30, rtol=1e-10)
    assert abs(res.value[0] - 1) < 1e-8


def test_kraus_density_matches_mixture():
    ens = coherent_spin_state(10, sigma_meas=1.5)
    for m in (-2.0, 0.0, 3.3):
        _, dens = weak_measure_jz(ens, m)
        assert abs(dens - jz_outcome_density(ens, m)[0]) < 1e-12 * dens


def test_very_weak_readout_leaves_state():
    ens = coherent_spin_state(10)
    post, _ = weak_measure_jz(ens, 0.7, 1e6)
    assert abs(abs(np.vdot(ens.state, post.state)) - 1) < 1e-6


def test_sharp_readout_projects():
    ens = coherent_spin_state(10)
    post, _ = weak_measure_jz(ens, 2.0, 1e-3)
    k = int(np.argmin(np.abs(post.m_z - 2)))
    assert abs(post.state[k]) ** 2 > 1 - 1e-10


def test_repeated_readout_matches_posterior_oracle():
    j = 20
    sigma = j / 2
    ens = coherent_spin_state(j, sigma_meas=sigma)
    p0 = np.abs(ens.state) ** 2
    rng = np.random.default_rng(1)
    outcomes = []
    for _ in range(20):
        m = sample_jz_outcome(ens, rng)
        outcomes.append(m)
        ens, _ = weak_measure_jz(ens, m)
    logw = -sum((ens.m_z - m) ** 2 for m in outcomes) / (2 * sigma**2)
    post = p0 * np.exp(logw - logw.max())
    post /= post.sum()
    np.testing.assert_allclose(np.abs(ens.state) ** 2, post, atol=1e-12)
    mean = post @ ens.m_z
    assert abs(ens.variance("Z") - (post @ ens.m_z**2 - mean**2)) < 1e-10
    assert ens.variance("Z") < j / 2


def test_recenter_restores_x_axis():
    ens = coherent_spin_state(30).rotate("Y", -0.2)
    back = recenter(ens)
    assert abs(back.expect("Z")) < 1e-10 and back.expect("X") > 0


def test_coherent_state_maps_to_vacuum():
    ens = coherent_spin_state(40)
    vac = hp_map(ens, n_trunc=10)
    assert abs(vac.amplitudes[0]) ** 2 > 1 - 1e-12
    R = hp_rotation(40)
    # +X becomes the top state, so <J_X> = j
    assert abs(abs((R @ ens.state)[0]) - 1) < 1e-12
    assert abs(ens.expect("X") - 40) < 1e-9 * 40


def test_operator_residual_halves_with_j():
    res = [hp_operator_residual(j) for j in (50, 100, 200, 400)]
    for a, b in zip(res, res[1:]):
        assert abs(a / b - 2) < 0.4


def test_weak_readout_gives_squeezed_vacuum():
    j = 200
    for sigma2 in (j / 4, j / 8, j / 20):
        ens, _ = weak_measure_jz(coherent_spin_state(j), 0.0, math.sqrt(sigma2))
        img = hp_map(ens, n_trunc=60)
        ref = squeezed_vacuum(hp_squeezing(j, math.sqrt(sigma2)), 60)
        assert fidelity(ref, img) > 0.99


def test_squeezed_vacuum_moments():
    r = 0.8
    sv = squeezed_vacuum(r, 80)
    n = np.arange(81)
    assert abs(sv.populations @ n - math.sinh(r) ** 2) < 1e-10


def test_zeeman_rotation_is_phase_on_hp_image():
    j, bt = 200, 0.37
    ens, _ = weak_measure_jz(coherent_spin_state(j), 0.0, math.sqrt(j / 2))
    before = hp_map(ens, n_trunc=60)
    after = hp_map(ens.rotate("X", bt), n_trunc=60)
    n = np.arange(61)
    expected = FockVector(before.amplitudes * np.exp(1j * bt * n), normalized=True)
    assert before.populations @ n <= 4
    assert fidelity(expected, after) > 0.999


def test_atomic_check_converges():
    rows = convergence_rows([100, 200, 400], seed=3)
    fids = [f for _, f in rows]
    assert fids[-1] > 0.99
    assert all(b >= a for a, b in zip(fids, fids[1:]))


def test_atomic_check_vacuum_probe():
    res = atomic_protocol_check(100, alpha=0.0)
    assert res.fidelity > 0.999


def test_hp_violation_raised():
    ens = coherent_spin_state(20).rotate("Y", 1.0)
    with pytest.raises(HPViolation):
        hp_map(ens, n_trunc=5)


def test_hp_truncation_validation():
    ens = coherent_spin_state(5)
    with pytest.raises(ValueError):
        hp_map(ens, n_trunc=10)
    with pytest.raises(ValueError):
        hp_map(ens, n_trunc=0)

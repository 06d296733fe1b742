"""Collective-spin realisation of the ancilla via the Holstein-Primakoff map.

Spin states are vectors over |j, m_z> ordered m_z = j, j-1, ..., -j, so basis
index k coincides with the Holstein-Primakoff excitation number. Spin
operators use angular-momentum units ([J_X, J_Y] = i J_Z).

The rotation R = exp(i pi J_Y / 2) exp(i pi J_X / 2) takes the +X spin
coherent state to |j, j>. In that rotated frame J_Z = j - n, J_X ~ sqrt(j) q
and J_Y ~ sqrt(j) p, which for the physical (unrotated) operators reads

    J_X -> j - n,    J_Y -> sqrt(j) q,    J_Z -> sqrt(j) p.

A weak J_Z readout is therefore a weak momentum measurement of the
bosonic mode, and a Zeeman term B J_X is a phase-space rotation.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
import math

import numpy as np
from scipy.special import gammaln

from .errors import HPViolation
from .fock import FockVector, coherent_state, fidelity, min_truncation
from .protocol import conditioned_from_lambda

HP_LEAK_TOL = 1e-3
J_MAX_DEFAULT = 400


def _check_j(j) -> float:
    two_j = 2 * j
    if abs(two_j - round(two_j)) > 1e-12 or two_j < 1:
        raise ValueError(f"j must be a positive half-integer, got {j!r}")
    return round(two_j) / 2


@lru_cache(maxsize=16)
def _ops(two_j: int):
    j = two_j / 2
    mz = j - np.arange(two_j + 1)
    # J+ |m> = sqrt(j(j+1) - m(m+1)) |m+1>; |m+1> sits one index lower
    up = np.sqrt(j * (j + 1) - mz[1:] * (mz[1:] + 1))
    jp = np.diag(up, 1).astype(complex)
    jm = jp.conj().T
    jx = (jp + jm) / 2
    jy = (jp - jm) / 2j
    jz = np.diag(mz).astype(complex)
    for a in (jx, jy, jz):
        a.flags.writeable = False
    return jx, jy, jz


def collective_ops(j) -> dict:
    """Spin-j matrices {"X", "Y", "Z"} in the m_z = j..-j basis."""
    jx, jy, jz = _ops(round(2 * _check_j(j)))
    return {"X": jx.copy(), "Y": jy.copy(), "Z": jz.copy()}


@lru_cache(maxsize=16)
def _eig(two_j: int, axis: str):
    jx, jy, _ = _ops(two_j)
    w, v = np.linalg.eigh(jx if axis == "X" else jy)
    # spectra are exactly the integers or half-integers -j..j
    w = np.round(2 * w) / 2
    v.flags.writeable = False
    return w, v


def rotation(j, axis: str, angle: float) -> np.ndarray:
    """exp(-i angle J_axis)."""
    two_j = round(2 * _check_j(j))
    if axis == "Z":
        return np.diag(np.exp(-1j * angle * (two_j / 2 - np.arange(two_j + 1))))
    if axis not in ("X", "Y"):
        raise ValueError(f"axis must be X, Y or Z, got {axis!r}")
    w, v = _eig(two_j, axis)
    return (v * np.exp(-1j * angle * w)) @ v.conj().T


def hp_rotation(j) -> np.ndarray:
    """R with R |+X coherent> = |j, j> up to phase."""
    return rotation(j, "Y", -math.pi / 2) @ rotation(j, "X", -math.pi / 2)


@dataclass(frozen=True)
class SpinEnsemble:
    """Collective spin-j state with the resolution of its J_Z readout.

    Attributes:
        j: total spin, N/2 for N two-level atoms.
        state: amplitudes over m_z = j, j-1, ..., -j.
        sigma_meas: J_Z measurement resolution in angular-momentum units.
    """

    j: float
    state: np.ndarray
    sigma_meas: float = math.inf

    def __post_init__(self):
        j = _check_j(self.j)
        psi = np.array(self.state, dtype=complex, copy=True).ravel()
        if psi.size != round(2 * j) + 1:
            raise ValueError(f"state has {psi.size} entries, spin {j} needs {round(2 * j) + 1}")
        nrm = np.linalg.norm(psi)
        if abs(nrm - 1.0) > 1e-10:
            raise ValueError(f"spin state must be normalized, norm is {nrm!r}")
        if not self.sigma_meas > 0:
            raise ValueError("sigma_meas must be positive")
        psi.flags.writeable = False
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "state", psi)

    @property
    def dim(self) -> int:
        return self.state.size

    @property
    def m_z(self) -> np.ndarray:
        return self.j - np.arange(self.dim)

    def expect(self, axis: str) -> float:
        op = _ops(round(2 * self.j))["XYZ".index(axis)]
        return float(np.vdot(self.state, op @ self.state).real)

    def variance(self, axis: str) -> float:
        op = _ops(round(2 * self.j))["XYZ".index(axis)]
        v = op @ self.state
        return float(np.vdot(v, v).real - self.expect(axis) ** 2)

    def evolve(self, unitary: np.ndarray) -> "SpinEnsemble":
        return SpinEnsemble(self.j, unitary @ self.state, self.sigma_meas)

    def rotate(self, axis: str, angle: float) -> "SpinEnsemble":
        return self.evolve(rotation(self.j, axis, angle))


def coherent_spin_state(j, polar: float = math.pi / 2, azimuth: float = 0.0,
                        sigma_meas: float = math.inf) -> SpinEnsemble:
    """exp(-i azimuth J_Z) exp(-i polar J_Y) |j, j>; the defaults point along +X."""
    j = _check_j(j)
    two_j = round(2 * j)
    k = np.arange(two_j + 1)
    c, s = math.cos(polar / 2), math.sin(polar / 2)
    with np.errstate(divide="ignore"):
        log_mod = (0.5 * (gammaln(two_j + 1) - gammaln(k + 1) - gammaln(two_j - k + 1))
                   + (two_j - k) * np.log(abs(c)) + k * np.log(abs(s)))
    sign = np.sign(c) ** (two_j - k) * np.sign(s) ** k
    amps = np.where(np.isfinite(log_mod), sign * np.exp(log_mod), 0.0)
    amps = amps * np.exp(-1j * azimuth * (j - k))
    return SpinEnsemble(j, amps / np.linalg.norm(amps), sigma_meas)


def weak_measure_jz(ens: SpinEnsemble, m: float, sigma_meas: float | None = None):
    """Apply K_m = (2 pi sigma^2)^(-1/4) exp(-(J_Z - m)^2 / (4 sigma^2)).

    Returns (post-measurement ensemble, outcome density at m).
    """
    sigma = ens.sigma_meas if sigma_meas is None else sigma_meas
    if not sigma > 0 or math.isinf(sigma):
        raise ValueError("weak measurement needs a finite positive sigma_meas")
    log_k = -(ens.m_z - m) ** 2 / (4 * sigma * sigma) - 0.25 * math.log(2 * math.pi * sigma * sigma)
    with np.errstate(divide="ignore"):
        log_amp = np.log(np.abs(ens.state)) + log_k
    finite = np.isfinite(log_amp)
    shift = np.max(log_amp[finite])
    amps = np.where(finite, np.exp(log_amp - shift), 0.0) * np.exp(1j * np.angle(ens.state))
    norm2 = float(np.sum(np.abs(amps) ** 2))
    density = math.exp(2 * shift) * norm2
    return SpinEnsemble(ens.j, amps / math.sqrt(norm2), sigma), density


def jz_outcome_density(ens: SpinEnsemble, m, sigma_meas: float | None = None) -> np.ndarray:
    """Density of weak J_Z outcomes: Gaussian mixture over the m_z populations."""
    sigma = ens.sigma_meas if sigma_meas is None else sigma_meas
    m = np.atleast_1d(np.asarray(m, dtype=float))
    p = np.abs(ens.state) ** 2
    g = np.exp(-(m[:, None] - ens.m_z[None, :]) ** 2 / (2 * sigma * sigma))
    return g @ p / math.sqrt(2 * math.pi * sigma * sigma)


def sample_jz_outcome(ens: SpinEnsemble, rng: np.random.Generator,
                      sigma_meas: float | None = None) -> float:
    sigma = ens.sigma_meas if sigma_meas is None else sigma_meas
    p = np.abs(ens.state) ** 2
    k = rng.choice(ens.dim, p=p / p.sum())
    return float(ens.m_z[k] + sigma * rng.standard_normal())


def recenter(ens: SpinEnsemble) -> SpinEnsemble:
    """Rotate about Y so the mean spin lies back on +X.

    Undoes the J_Z displacement left by a weak measurement outcome; in the
    bosonic picture this is a momentum displacement.
    """
    phi = math.atan2(ens.expect("Z"), ens.expect("X"))
    return ens.rotate("Y", phi)


def hp_map(ens: SpinEnsemble, R: np.ndarray | None = None, n_trunc: int = 40,
           leak_tol: float = HP_LEAK_TOL) -> FockVector:
    """Fock amplitudes c_k = <j, j-k| R |psi>, k <= n_trunc.

    Raises:
        HPViolation: if the weight beyond n_trunc exceeds ``leak_tol``.
    """
    if not 1 <= n_trunc < 2 * ens.j:
        raise ValueError(f"need 1 <= n_trunc < 2j, got n_trunc={n_trunc}, j={ens.j}")
    R = hp_rotation(ens.j) if R is None else R
    psi = R @ ens.state
    head = psi[: n_trunc + 1]
    leaked = max(0.0, 1.0 - float(np.sum(np.abs(head) ** 2)))
    if leaked > leak_tol:
        raise HPViolation(leaked)
    return FockVector(head / np.linalg.norm(head), normalized=True)


def hp_squeezing(j, sigma_meas: float) -> float:
    """Squeezing r of the HP image of a weakly J_Z-measured +X coherent state.

    The readout multiplies the vacuum momentum wavefunction exp(-p^2/2) by
    exp(-j p^2 / (4 sigma^2)), so exp(2 r) = 1 + j / (2 sigma^2).
    """
    return 0.5 * math.log1p(j / (2.0 * sigma_meas**2))


def squeezed_vacuum(r: float, n_trunc: int) -> FockVector:
    """Momentum-squeezed vacuum, p-variance exp(-2r)/2."""
    k = np.arange(n_trunc // 2 + 1)
    t = math.tanh(r)
    with np.errstate(divide="ignore"):
        log_c = (0.5 * gammaln(2 * k + 1) - k * math.log(2) - gammaln(k + 1)
                 + k * (math.log(t) if t > 0 else -np.inf))
    amps = np.zeros(n_trunc + 1)
    amps[0] = 1.0
    amps[2 * k[1:]] = np.exp(log_c[1:])
    amps /= np.linalg.norm(amps)
    return FockVector(amps, normalized=True)


def hp_operator_residual(j, n_levels: int = 10) -> float:
    """Spectral norm of J_-/sqrt(2j) - a^dag on the lowest n_levels HP levels.

    J_- is assembled from the physical J_Y and J_Z through R, so the value
    also exercises the frame mapping.
    """
    j = _check_j(j)
    _, jy, jz = _ops(round(2 * j))
    R = hp_rotation(j)
    jm = R @ (jy - 1j * jz) @ R.conj().T / math.sqrt(2 * j)
    adag = np.diag(np.sqrt(np.arange(1, n_levels)), -1)
    return float(np.linalg.norm(jm[:n_levels, :n_levels] - adag, 2))


def _rotated_coefficient(a: complex, phi: float) -> complex:
    """Momentum coefficient of exp(i phi n) applied to psi(p) ~ exp(-a p^2)."""
    V = np.array([[abs(a) ** 2 / a.real, a.imag / (2 * a.real)],
                  [a.imag / (2 * a.real), 1.0 / (4 * a.real)]])
    c, s = math.cos(phi), math.sin(phi)
    S = np.array([[c, -s], [s, c]])
    V = S @ V @ S.T
    return complex(1.0 / (4 * V[1, 1]), V[0, 1] / (2 * V[1, 1]))


@dataclass(frozen=True)
class AtomicCheck:
    j: float
    sigma_meas: float
    g: float
    theta: float
    alpha: complex
    m: float
    fidelity: float
    spin_state: FockVector
    boson_state: FockVector


def atomic_protocol_check(j, sigma_meas: float | None = None, g: float = 1.0,
                          theta: float = 0.3, alpha: complex = 1.0, m: float | None = None,
                          seed: int = 0, n_trunc: int | None = None) -> AtomicCheck:
    """Run the measured cross-rotation with a spin ancilla and with a bosonic one.

    Spin side: +X coherent state, weak J_Z readout at outcome 0, Zeeman
    rotation exp(-i theta J_X), coupling exp(-i g n J_Z / sqrt(j)) to the
    probe, then projection onto the J_Y eigenvalue nearest m sqrt(j). Bosonic
    side: the same sequence on an exact Gaussian ancilla, i.e. the channel
    lambda = g^2 / (4 a) with a its momentum coefficient, at the same m.

    ``sigma_meas`` defaults to sqrt(j)/2, which fixes exp(2r) = 3 for every j.
    If ``m`` is None it is drawn from the bosonic outcome density with ``seed``.

    Raises:
        HPViolation: if the prepared ancilla leaks past the HP truncation.
    """
    j = _check_j(j)
    sigma = math.sqrt(j) / 2 if sigma_meas is None else sigma_meas
    alpha = complex(alpha)
    n_trunc = min_truncation(abs(alpha) ** 2, 1e-13) + 10 if n_trunc is None else n_trunc
    probe = coherent_state(alpha, n_trunc)

    # bosonic ancilla: vacuum a = 1/2, readout adds j/(4 sigma^2), then rotation
    a = _rotated_coefficient(complex(0.5 + j / (4 * sigma * sigma)), theta)
    lam = g * g / (4 * a)

    if m is None:
        from .protocol import OutcomePdf
        pdf = OutcomePdf(probe.populations, g, lam.real)
        m = float(pdf.sample(np.random.default_rng(seed)))
    mu = float(np.round(m * math.sqrt(j)))
    if abs(mu) > j:
        raise ValueError(f"outcome m={m!r} lies outside the J_Y spectrum for j={j}")
    m_eff = mu / math.sqrt(j)

    anc = coherent_spin_state(j, sigma_meas=sigma)
    anc, _ = weak_measure_jz(anc, 0.0)
    # leak check on the prepared ancilla
    hp_map(anc, n_trunc=min(int(2 * j) - 1, 60))
    anc = anc.rotate("X", theta)

    w, v = _eig(round(2 * j), "Y")
    bra = v[:, int(np.argmin(np.abs(w - mu)))].conj()
    n = np.arange(n_trunc + 1)
    # <mu| exp(-i g n J_Z / sqrt(j)) |anc> for every probe level n
    phases = np.exp(-1j * g * np.outer(n, anc.m_z) / math.sqrt(j))
    spin_amps = probe.amplitudes * (phases @ (bra * anc.state))
    spin_state = FockVector(spin_amps / np.linalg.norm(spin_amps), normalized=True)

    boson_state, _ = conditioned_from_lambda(probe, lam, g, m_eff)
    return AtomicCheck(j, sigma, g, theta, alpha, m_eff,
                       fidelity(spin_state, boson_state), spin_state, boson_state)


def convergence_rows(j_values, **kwargs) -> list[tuple[float, float]]:
    """(j, fidelity) rows of atomic_protocol_check at a shared outcome m."""
    rows = []
    for j in j_values:
        res = atomic_protocol_check(j, **kwargs)
        rows.append((float(res.j), res.fidelity))
    return rows

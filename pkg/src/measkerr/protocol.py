"""Measurement channel acting on the probe after the cross-rotation gate.

For ancilla outcome m the probe amplitudes transform as

    c_n -> (2 zeta / (pi g^2))^(1/4) exp(-lambda (n - m/g)^2) c_n,
    lambda = zeta + i gamma,

which is the squared-generator form obtained by integrating out the ancilla
momentum. The exponent is always evaluated in the expanded quadratic form
-lambda n^2 + 2 lambda m n / g - lambda m^2 / g^2, which is regular at m = 0.
Squared norms of the transformed vector are the outcome density P(m); the
prefactor makes it integrate to one.
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import logsumexp

from .errors import NonFiniteAmplitude, ThetaNearSingular
from .fock import FockVector, fix_global_phase
from .gaussian_map import AncillaGaussian, channel_params

THETA_MIN = 1e-6


@dataclass(frozen=True)
class CorrectionMode:
    """Post-measurement phase correction exp(i phi(m) n).

    kind is "none", "linear" (first-order cot compensation about the known
    bias theta0) or "exact" (undoes the full measurement-dependent rotation;
    only meaningful when theta is known, as in state preparation).
    """

    kind: str = "none"
    theta0: float | None = None

    def __post_init__(self):
        if self.kind not in ("none", "linear", "exact"):
            raise ValueError(f"unknown correction kind {self.kind!r}")
        if self.kind == "linear":
            if self.theta0 is None:
                raise ValueError("linear correction needs theta0")
            if self.theta0 < THETA_MIN:
                raise ThetaNearSingular(f"theta0={self.theta0!r} is below {THETA_MIN}")

    def __str__(self):
        return f"linear({self.theta0!r})" if self.kind == "linear" else self.kind


NO_CORRECTION = CorrectionMode("none")
EXACT_CORRECTION = CorrectionMode("exact")


def linear_correction(theta0: float) -> CorrectionMode:
    return CorrectionMode("linear", float(theta0))


@dataclass(frozen=True)
class MeasurementOutcome:
    m: float
    prob_density: float


def correction_phase(correction: CorrectionMode, anc: AncillaGaussian, g: float, m):
    """Real coefficient phi such that the correction multiplies c_n by exp(i phi n)."""
    m = np.asarray(m, dtype=float)
    if correction.kind == "none":
        return np.zeros_like(m)
    if correction.kind == "exact":
        gamma = channel_params(anc, g).gamma
        return -2.0 * gamma * m / g
    if anc.theta is None:
        raise ValueError("linear correction needs an ancilla built from (r, theta)")
    theta0 = correction.theta0
    cot0 = 1.0 / math.tan(theta0)
    cot_lin = cot0 - (1.0 + cot0 * cot0) * (anc.theta - theta0)
    return 0.5 * g * m * cot_lin


def log_kraus_exponent(lam: complex, g: float, m: float, n: np.ndarray) -> np.ndarray:
    """-lambda (n - m/g)^2 in expanded form."""
    return -lam * n * n + 2.0 * lam * (m / g) * n - lam * (m / g) ** 2


def conditioned_from_lambda(state: FockVector, lam: complex, g: float, m: float,
                            phase_coeff: float = 0.0) -> tuple[FockVector, float]:
    """Conditioned probe state for a channel given directly by lambda.

    Returns the normalised state (first significant amplitude real-positive)
    and the outcome density at m.
    """
    zeta = lam.real
    n = np.arange(state.n_trunc + 1)
    with np.errstate(divide="ignore"):
        log_mod = np.log(np.abs(state.amplitudes))
    expo = log_kraus_exponent(lam, g, m, n) + 1j * phase_coeff * n
    log_amp = log_mod + expo.real
    finite = np.isfinite(log_amp)
    if not finite.any():
        raise NonFiniteAmplitude("all amplitudes vanish under the Kraus map")
    shift = np.max(log_amp[finite])
    amps = np.where(finite, np.exp(log_amp - shift), 0.0) * np.exp(
        1j * (np.angle(state.amplitudes) + expo.imag))
    norm2 = float(np.sum(np.abs(amps) ** 2))
    log_density = 0.5 * math.log(2.0 * zeta / (math.pi * g * g)) + 2.0 * shift + math.log(norm2)
    if not np.isfinite(log_density) or norm2 == 0.0:
        raise NonFiniteAmplitude(f"non-finite outcome density at m={m!r}")
    amps = fix_global_phase(amps / math.sqrt(norm2))
    return FockVector(amps, normalized=True), math.exp(log_density)


def conditioned_state(state: FockVector, anc: AncillaGaussian, g: float, m: float,
                      correction: CorrectionMode = NO_CORRECTION) -> tuple[FockVector, float]:
    """Normalised probe state after outcome m, and the density P(m)."""
    lam = channel_params(anc, g).lam
    phi = float(correction_phase(correction, anc, g, m))
    return conditioned_from_lambda(state, lam, g, m, phi)


def kraus_factors(anc: AncillaGaussian, g: float, m: float, n_trunc: int) -> dict:
    """The four number-diagonal exponents in the shear (sigma, beta) picture.

    Keys U, K (m-independent) and Uc, Kc (m-dependent). Their sum equals
    -lambda (n - m/g)^2 up to the n-independent term; the linear terms
    follow the expansion of (g n - m)^2.
    """
    n = np.arange(n_trunc + 1, dtype=float)
    beta, s2 = anc.beta, anc.sigma2
    mu = 4.0 * (beta**2 + 1.0 / (4.0 * s2**2))
    return {
        "U": 1j * beta * g**2 / mu * n**2,
        "K": -(g**2) / (2.0 * s2 * mu) * n**2,
        "Uc": -1j * 2.0 * beta * m * g / mu * n,
        "Kc": 2.0 * m * g / (2.0 * s2 * mu) * n,
    }


class OutcomePdf:
    """P(m) as a Gaussian mixture: weight |c_n|^2, centre g n, variance g^2/(4 zeta).

    Correction unitaries act after the measurement, so this distribution is
    the same for every CorrectionMode.
    """

    def __init__(self, weights, g: float, zeta: float):
        w = np.asarray(weights, dtype=float)
        self.weights = w / w.sum()
        self.g = float(g)
        self.zeta = float(zeta)
        self.centers = self.g * np.arange(w.size)
        self.variance = self.g**2 / (4.0 * self.zeta)
        self.std = math.sqrt(self.variance)

    def __call__(self, m):
        m = np.atleast_1d(np.asarray(m, dtype=float))
        n = np.arange(self.weights.size)
        with np.errstate(divide="ignore"):
            logw = np.log(self.weights)
        z = -2.0 * self.zeta * (n[None, :] - m[:, None] / self.g) ** 2 + logw[None, :]
        out = np.exp(logsumexp(z, axis=1)) * math.sqrt(2.0 * self.zeta / (math.pi * self.g**2))
        return out

    def mean(self) -> float:
        return float(np.dot(self.weights, self.centers))

    def second_moment(self) -> float:
        return float(self.variance + np.dot(self.weights, self.centers**2))

    def support(self, k: float = 8.0, weight_floor: float = 1e-16) -> tuple[float, float]:
        """Interval holding all components above ``weight_floor`` to k standard deviations."""
        idx = np.flatnonzero(self.weights > weight_floor)
        return (float(self.centers[idx[0]] - k * self.std),
                float(self.centers[idx[-1]] + k * self.std))

    def sample(self, rng: np.random.Generator, size=None):
        """Exact two-stage draw: component n, then its Gaussian."""
        n = rng.choice(self.weights.size, size=size, p=self.weights)
        return self.g * n + self.std * rng.standard_normal(size)


def outcome_pdf(state: FockVector, anc: AncillaGaussian, g: float) -> OutcomePdf:
    return OutcomePdf(state.populations, g, channel_params(anc, g).zeta)


def sample_outcome(pdf: OutcomePdf, rng_seed) -> MeasurementOutcome:
    """Draw one outcome; ``rng_seed`` is an int seed or a numpy Generator."""
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    m = float(pdf.sample(rng))
    return MeasurementOutcome(m, float(pdf(m)[0]))


def conditioned_populations(populations: np.ndarray, zeta: float, g: float, m: np.ndarray):
    """Normalised conditioned populations p_n(m) and densities P(m) for many m.

    The populations of the conditioned state depend only on zeta, so this is
    all the Fisher-information integrands need. Returns (p, P) with p of
    shape (len(m), N+1).
    """
    m = np.atleast_1d(np.asarray(m, dtype=float))
    n = np.arange(populations.size)
    with np.errstate(divide="ignore"):
        logw = np.log(populations)
    z = logw[None, :] - 2.0 * zeta * (n[None, :] - m[:, None] / g) ** 2
    lse = logsumexp(z, axis=1)
    p = np.exp(z - lse[:, None])
    dens = np.exp(lse) * math.sqrt(2.0 * zeta / (math.pi * g * g))
    return p, dens

"""Displacement sensing by feeding a conditioned Gaussian ancilla into the Kerr channel.

Stage 1 squeezes and rotates ancilla A1, couples it to A2 through
exp(i kappa p1 p2) and measures q1. A2 leaves with its momentum coefficient
shifted by kappa^2 / (4 w1), where w1 = u1 - i v1 is the A1 coefficient; for
large A1 squeezing at theta' = pi/4, 1/(4 w1) -> -i/4 and A2 is the squeezed
vacuum sheared by exp(i kappa^2 p^2 / 4). A2 then drives the probe exactly as
the rotated ancilla does for phase sensing, with kappa entering through v.

Gaussian states here use the same ancilla convention as the channel:
psi(p) ~ exp(-a p^2), a = u - i v, which has covariance
Vqq = |a|^2 / Re a, Vpp = 1 / (4 Re a), Vqp = Im a / (2 Re a).
"""
from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np

from .fock import FockVector, coherent_state
from .gaussian_map import AncillaGaussian, siegel_from_rtheta
from .metrology import ChannelDerivative, FisherTerms, QfiReport, fisher_from_channel, sweep


@dataclass(frozen=True)
class BootstrapParams:
    kappa: float
    r_prime: float
    r: float
    g: float = 1.0
    theta_prime: float = math.pi / 4

    def __post_init__(self):
        if self.r_prime < 0 or self.r < 0:
            raise ValueError("squeezing parameters must be non-negative")
        if not self.g > 0:
            raise ValueError("coupling g must be positive")


def covariance_from_coefficient(a: complex) -> np.ndarray:
    ar, ai = a.real, a.imag
    return np.array([[abs(a) ** 2 / ar, ai / (2 * ar)],
                     [ai / (2 * ar), 1.0 / (4 * ar)]])


def coefficient_from_covariance(V: np.ndarray) -> complex:
    vpp, vqp = V[1, 1], V[0, 1]
    return complex(1.0 / (4 * vpp), vqp / (2 * vpp))


def gaussian_fidelity(a: complex, b: complex) -> float:
    """|<psi_a|psi_b>|^2 for centred states psi(p) ~ exp(-a p^2)."""
    return float(2.0 * math.sqrt(a.real * b.real) / abs(a.conjugate() + b))


def _a2_coefficient(params: BootstrapParams) -> complex:
    return siegel_from_rtheta(params.r, 0.0).momentum_coefficient


def shear_limit(params: BootstrapParams) -> AncillaGaussian:
    """A2 in the large-r' limit: S(r)|0> sheared so that v -> v + kappa^2/4."""
    a2 = _a2_coefficient(params)
    return AncillaGaussian.from_siegel(a2.real, -(a2.imag - params.kappa**2 / 4))


def condition_two_mode(params: BootstrapParams, m: float = 0.0):
    """Finite-r' stage 1 by covariance-matrix homodyne conditioning.

    Returns the posterior A2 ancilla and its mean (q, p), which is the
    measurement-dependent displacement a later stage has to undo.
    """
    a1 = siegel_from_rtheta(params.r_prime, params.theta_prime).momentum_coefficient
    a2 = _a2_coefficient(params)
    V = np.zeros((4, 4))
    V[:2, :2] = covariance_from_coefficient(a1)
    V[2:, 2:] = covariance_from_coefficient(a2)
    # exp(i kappa p1 p2): q1 -> q1 - kappa p2, q2 -> q2 - kappa p1; ordering (q1, p1, q2, p2)
    S = np.eye(4)
    S[0, 3] = -params.kappa
    S[2, 1] = -params.kappa
    V = S @ V @ S.T
    c = V[2:, 0]
    V_post = V[2:, 2:] - np.outer(c, c) / V[0, 0]
    mean = c * m / V[0, 0]
    a = coefficient_from_covariance(V_post)
    return AncillaGaussian.from_siegel(a.real, -a.imag), mean


def effective_ancilla(params: BootstrapParams, analytic: bool = True):
    """(u_eff, v_eff) of the conditioned A2 ancilla.

    ``analytic=True`` uses the large-r' shear; otherwise the two-mode state is
    conditioned at outcome m = 0 (the posterior covariance does not depend on m).
    """
    if analytic:
        anc = shear_limit(params)
    else:
        anc, _ = condition_two_mode(params)
    return anc.u, anc.v


def kappa_channel(params: BootstrapParams, correction: str = "linear",
                  analytic: bool = True) -> ChannelDerivative:
    """Channel at the bias kappa0 and its kappa-derivative.

    A2 leaves stage 1 with coefficient w(kappa) = w2 + kappa^2 c, where
    c = -i/4 in the large-r' limit (a pure shift of v, so d/dkappa is
    (kappa/2) d/dv) and c = 1/(4 w1) at finite r'. The linear correction
    removes the measurement-dependent rotation exp(2 i gamma m n / g) to
    first order in delta-kappa about the bias.
    """
    a2 = _a2_coefficient(params)
    if analytic:
        c = -0.25j
    else:
        c = 1.0 / (4.0 * siegel_from_rtheta(params.r_prime, params.theta_prime).momentum_coefficient)
    g = params.g
    w = a2 + params.kappa**2 * c
    lam = g * g / (4 * w)
    dlam = -g * g / (4 * w * w) * (2 * params.kappa * c)
    kind = getattr(correction, "kind", correction)
    if kind not in ("none", "linear"):
        raise ValueError(f"kappa sensing supports none or linear correction, got {kind!r}")
    s = -2.0 * dlam.imag / g if kind == "linear" else 0.0
    return ChannelDerivative(lam, dlam, g, s)


def kappa_qfi(params: BootstrapParams, probe: FockVector, correction: str = "linear",
              window=None) -> FisherTerms:
    return fisher_from_channel(probe, kappa_channel(params, correction), window)[0]


def kappa_sweep(n_bar_grid, params: BootstrapParams, correction: str, n_trunc: int,
                threads: int = 1) -> QfiReport:
    ch = kappa_channel(params, correction)
    kind = getattr(correction, "kind", correction)
    meta = {"parameter": "kappa", "kappa0": params.kappa, "r_prime": params.r_prime,
            "theta_prime": params.theta_prime, "r": params.r, "g": params.g,
            "correction": kind, "m_domain": "mixture-support k=8"}
    return sweep(ch, n_bar_grid, n_trunc, threads, None, meta)


def probe_state(n_bar: float, n_trunc: int) -> FockVector:
    return coherent_state(math.sqrt(n_bar), n_trunc)

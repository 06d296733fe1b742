"""Parameter algebra for the squeezed, rotated ancilla and the channel it induces.

The ancilla after squeezing S(r) and rotation R(theta) is carried as a point
z = v + i u of the Siegel upper half plane. The channel seen by the probe
uses the ancilla momentum wavefunction exp(-(u - i v) p^2), and every
downstream strength follows from the complex number

    lambda = g^2 / (4 (u - i v)) = zeta + i gamma,

which multiplies -(n - m/g)^2 in the conditioned-state exponent. gamma is
the deterministic Kerr strength (the probe picks up exp(-i gamma n^2)) and
zeta the decay strength.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy.optimize import bisect, minimize_scalar

from .errors import NoSolution

THETA_GUARD = 1e-12


def siegel_uv(r, theta):
    """(u, v) for squeezing r and rotation theta; vectorised over both."""
    r = np.asarray(r, dtype=float)
    theta = np.asarray(theta, dtype=float)
    s, c = np.sin(theta), np.cos(theta)
    xi = np.exp(-2 * r) * s**2 + np.exp(2 * r) * c**2
    u = 1.0 / xi
    v = -np.sin(2 * theta) * np.sinh(2 * r) / xi
    return u, v


def channel_lambda(r, theta, g):
    """zeta + i gamma as a complex array."""
    u, v = siegel_uv(r, theta)
    return g**2 * (u + 1j * v) / (4 * (u**2 + v**2))


def gamma_of(r, theta, g=1.0):
    return np.imag(channel_lambda(r, theta, g))


def zeta_of(r, theta, g=1.0):
    return np.real(channel_lambda(r, theta, g))


def dlambda_dtheta(r, theta, g):
    """d(zeta + i gamma)/d theta from the cot form of the bracket.

    lambda = (g^2/4) (1 - i e c) / (e - i c) with e = exp(2r), c = cot(theta);
    d/dc of the bracket is i (1 - e^2) / (e - i c)^2 and dc/dtheta = -(1 + c^2).
    """
    theta = max(float(theta), THETA_GUARD)
    e = math.exp(2 * r)
    c = 1.0 / math.tan(theta)
    # (1 - e^2)/(e - ic)^2 written as (1/e^2 - 1)/(1 - ic/e)^2 to survive large r
    dB_dc = 1j * (1.0 / e**2 - 1.0) / (1.0 - 1j * c / e) ** 2
    return (g**2 / 4) * dB_dc * (-(1.0 + c * c))


@dataclass(frozen=True)
class AncillaGaussian:
    """Pure single-mode Gaussian ancilla in Siegel coordinates.

    ``r`` and ``theta`` are None when the state was built directly from
    (u, v), e.g. as the output of a conditioning step.
    """

    u: float
    v: float
    r: float | None = None
    theta: float | None = None

    def __post_init__(self):
        if not self.u > 0:
            raise ValueError(f"Siegel coordinate u must be positive, got {self.u!r}")

    @property
    def sigma2(self) -> float:
        return 1.0 / (2.0 * self.u)

    @property
    def beta(self) -> float:
        return -self.v

    @property
    def momentum_coefficient(self) -> complex:
        """a in psi(p) ~ exp(-a p^2)."""
        return complex(self.u, -self.v)

    @classmethod
    def from_siegel(cls, u: float, v: float) -> "AncillaGaussian":
        return cls(float(u), float(v))


def siegel_from_rtheta(r: float, theta: float) -> AncillaGaussian:
    if r < 0:
        raise ValueError(f"squeezing must be non-negative, got {r!r}")
    u, v = siegel_uv(r, theta)
    return AncillaGaussian(float(u), float(v), float(r), float(theta))


def symplectic_z(r: float, theta: float) -> complex:
    """(c + i d)/(a + i b) from the explicit 2x2 matrix product.

    Kept as an independent route for testing the closed forms in
    :func:`siegel_uv`; note it returns -v + i u, i.e. the real part carries
    the opposite sign to the v used by the channel formulas.
    """
    swap = np.array([[0.0, -1.0], [1.0, 0.0]])
    rot = np.array([[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]])
    sq = np.diag([math.exp(-r), math.exp(r)])
    (a, b), (c, d) = swap @ rot @ sq
    return (c + 1j * d) / (a + 1j * b)


@dataclass(frozen=True)
class ChannelParams:
    """Coupling g and the channel strengths derived from an ancilla.

    mu and chi are the shear-picture quantities: with sigma^2 = 1/(2u) and
    beta = -v, mu = 4 (beta^2 + 1/(4 sigma^4)) = 4 (u^2 + v^2) and the
    deterministic unitary is exp(i chi n^2), so chi = -gamma.
    """

    g: float
    mu: float
    chi: float
    gamma: float
    zeta: float
    anc: AncillaGaussian = field(repr=False, default=None)

    @property
    def lam(self) -> complex:
        return complex(self.zeta, self.gamma)


def channel_params(anc: AncillaGaussian, g: float) -> ChannelParams:
    if not g > 0:
        raise ValueError(f"coupling g must be positive, got {g!r}")
    beta, sigma2 = anc.beta, anc.sigma2
    mu = 4.0 * (beta**2 + 1.0 / (4.0 * sigma2**2))
    chi = beta * g**2 / mu
    u, v = anc.u, anc.v
    den = 4.0 * (u * u + v * v)
    return ChannelParams(g=float(g), mu=mu, chi=chi, gamma=g * g * v / den,
                         zeta=g * g * u / den, anc=anc)


def gamma_max(r: float, g: float = 1.0) -> tuple[float, float]:
    """Largest |gamma| over theta in (0, pi/2) and the angle theta_c reaching it."""
    lo, hi = 1e-6, math.pi / 2 - 1e-6
    # coarse scan to seed the bounded search; |gamma| peaks near exp(-2r) for large r
    grid = np.concatenate([np.geomspace(lo, 1e-2, 200), np.linspace(1e-2, hi, 400)])
    vals = np.abs(gamma_of(r, grid, g))
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, grid.size - 1)]
    if a == b:
        return float(vals[k]), float(grid[k])
    res = minimize_scalar(lambda t: -abs(float(gamma_of(r, t, g))), bounds=(a, b),
                          method="bounded", options={"xatol": 1e-14})
    theta_c = float(res.x)
    return abs(float(gamma_of(r, theta_c, g))), theta_c


def solve_theta_for_gamma(r: float, g: float, gamma_target: float) -> float:
    """Rotation angle theta* whose channel has gamma(theta*) = gamma_target.

    gamma is negative on (0, pi/2) and odd about pi/2, so negative targets
    are solved on the branch (theta_c, pi/2) where |gamma| falls from
    gamma_max to 0, and positive targets on its mirror image in (pi/2, pi).
    The decay strength zeta is even about pi/2, so both branches give the
    same channel up to the sign of gamma.

    Raises:
        NoSolution: if |gamma_target| > gamma_max(r, g).
    """
    if r < 0 or not g > 0:
        raise ValueError("need r >= 0 and g > 0")
    if gamma_target == 0:
        return math.pi / 2
    gmax, theta_c = gamma_max(r, g)
    target = abs(gamma_target)
    if target > gmax:
        raise NoSolution(gamma_target, gmax)

    def h(t):
        return abs(float(gamma_of(r, t, g))) - target

    grid = np.linspace(theta_c, math.pi / 2, 1001)
    vals = np.abs(gamma_of(r, grid, g)) - target
    idx = np.flatnonzero(np.sign(vals[:-1]) != np.sign(vals[1:]))
    if idx.size == 0:
        # target equals gamma_max to rounding
        theta = theta_c
    else:
        k = idx[0]
        theta = bisect(h, grid[k], grid[k + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps,
                       maxiter=200)
    return theta if gamma_target < 0 else math.pi - theta


def design_curves(r_values, theta_grid, g: float = 1.0):
    """Rows (r, theta, gamma, zeta) over the given grids."""
    rows = []
    for r in r_values:
        lam = channel_lambda(r, np.asarray(theta_grid, dtype=float), g)
        for t, val in zip(theta_grid, lam):
            rows.append((float(r), float(t), float(val.imag), float(val.real)))
    return rows

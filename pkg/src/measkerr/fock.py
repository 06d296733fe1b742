"""Truncated Fock-space states and number-diagonal operations.

Quadrature convention (shared by every module): hbar = 1, [q, p] = i,
q = (a + a^dag)/sqrt(2), p = (a - a^dag)/(i sqrt(2)), so a coherent state
|alpha> is centred at (q, p) = sqrt(2) (Re alpha, Im alpha).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .errors import DimensionMismatch, NonFiniteAmplitude, TruncationTooSmall

TAIL_TOL = 1e-10
NORM_TOL = 1e-12
# exp() overflows just above 709
_MAX_LOG = 700.0


@dataclass(frozen=True)
class FockVector:
    """Complex amplitudes c_0..c_N over number states |0>..|N>.

    The amplitude array is copied and frozen on construction so instances
    can be shared freely between threads.
    """

    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex, copy=True).ravel()
        if amps.size < 2:
            raise TruncationTooSmall("a Fock vector needs at least two levels")
        amps.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        if self.normalized and abs(self.norm() - 1.0) > 1e-10:
            raise ValueError(f"state flagged normalized has norm {self.norm()!r}")

    @property
    def n_trunc(self) -> int:
        return self.amplitudes.size - 1

    @property
    def populations(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.populations)))

    def mean_photon_number(self) -> float:
        p = self.populations
        return float(np.dot(np.arange(p.size), p) / p.sum())

    def tail_mass(self) -> float:
        """Population of the highest retained level, relative to the total."""
        p = self.populations
        return float(p[-1] / p.sum())

    def normalize(self) -> "FockVector":
        nrm = self.norm()
        if nrm == 0.0 or not np.isfinite(nrm):
            raise NonFiniteAmplitude(f"cannot normalise a state of norm {nrm!r}")
        return FockVector(self.amplitudes / nrm, normalized=True)


def fock_state(n: int, n_trunc: int) -> FockVector:
    amps = np.zeros(n_trunc + 1, dtype=complex)
    amps[n] = 1.0
    return FockVector(amps, normalized=True)


def coherent_log_amplitudes(alpha: complex, n_trunc: int) -> np.ndarray:
    """log c_n for |alpha>, untruncated normalisation (log-space factorials)."""
    n = np.arange(n_trunc + 1)
    alpha = complex(alpha)
    if alpha == 0:
        out = np.full(n.size, -np.inf, dtype=complex)
        out[0] = 0.0
        return out
    return (-0.5 * abs(alpha) ** 2 + n * np.log(abs(alpha)) - 0.5 * gammaln(n + 1)
            + 1j * n * np.angle(alpha))


def coherent_state(alpha: complex, n_trunc: int, tail_tol: float = TAIL_TOL) -> FockVector:
    """Coherent state |alpha> on levels 0..n_trunc, renormalised.

    Raises TruncationTooSmall when the Poisson weight beyond n_trunc exceeds
    ``tail_tol``.
    """
    if n_trunc < 1:
        raise TruncationTooSmall("n_trunc must be at least 1")
    nbar = abs(complex(alpha)) ** 2
    lost = float(poisson.sf(n_trunc, nbar)) if nbar > 0 else 0.0
    if lost > tail_tol:
        raise TruncationTooSmall(
            f"|alpha|^2={nbar:.4g} loses {lost:.3e} beyond n_trunc={n_trunc}"
        )
    amps = np.exp(coherent_log_amplitudes(alpha, n_trunc))
    return FockVector(amps).normalize()


def min_truncation(nbar: float, tail_tol: float = TAIL_TOL) -> int:
    """Smallest n_trunc that keeps the Poisson(nbar) tail below tail_tol."""
    if nbar <= 0:
        return 1
    return max(1, int(poisson.isf(tail_tol, nbar)))


def apply_number_diagonal(state: FockVector, phase_fn) -> tuple[FockVector, float]:
    """Multiply c_n by exp(phase_fn(n)); the result is not renormalised.

    ``phase_fn`` is either a callable on the integer array 0..N or an array
    of exponents. Returns the new state and its norm.
    """
    n = np.arange(state.n_trunc + 1)
    expo = np.asarray(phase_fn(n) if callable(phase_fn) else phase_fn, dtype=complex)
    if expo.shape != n.shape:
        raise DimensionMismatch(f"exponent shape {expo.shape} != {n.shape}")
    if not np.all(np.isfinite(expo)) or np.max(expo.real) > _MAX_LOG:
        raise NonFiniteAmplitude("number-diagonal exponent overflows")
    amps = state.amplitudes * np.exp(expo)
    if not np.all(np.isfinite(amps)):
        raise NonFiniteAmplitude("non-finite amplitude after number-diagonal map")
    out = FockVector(amps)
    return out, out.norm()


def overlap(a: FockVector, b: FockVector) -> complex:
    if a.n_trunc != b.n_trunc:
        raise DimensionMismatch(f"truncations differ: {a.n_trunc} vs {b.n_trunc}")
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def fidelity(a: FockVector, b: FockVector) -> float:
    """|<a|b>|^2 for two normalised states of equal truncation."""
    f = abs(overlap(a, b)) ** 2
    return float(min(max(f, 0.0), 1.0))


def fix_global_phase(amps: np.ndarray, threshold: float = 1e-14) -> np.ndarray:
    """Rotate so the first amplitude above ``threshold`` is real positive."""
    idx = np.flatnonzero(np.abs(amps) > threshold)
    if idx.size == 0:
        return amps
    c = amps[idx[0]]
    return amps * (abs(c) / c)


def wigner_grid(state: FockVector, q_range=(-6.0, 6.0), p_range=(-6.0, 6.0),
                resolution: int | tuple[int, int] = 201):
    """Wigner function W(q, p) of a pure state on a rectangular grid.

    Uses the normalised Laguerre recurrence for the Fock-basis Wigner
    functions W_mn (each term carries the exp(-2|a|^2) Gaussian, so no
    factorial ever overflows).

    Returns:
        (q, p, W) with W[i, k] = W(q[i], p[k]).
    """
    if isinstance(resolution, int):
        nq = np_ = resolution
    else:
        nq, np_ = resolution
    q = np.linspace(q_range[0], q_range[1], nq)
    p = np.linspace(p_range[0], p_range[1], np_)
    Q, P = np.meshgrid(q, p, indexing="ij")
    A = (Q + 1j * P) / np.sqrt(2.0)
    c = np.asarray(state.amplitudes)
    nrm2 = np.sum(np.abs(c) ** 2)
    rho = np.outer(c, c.conj()) / nrm2
    M = c.size
    sq = np.sqrt(np.arange(M + 1, dtype=float))

    wlist = [None] * M
    wlist[0] = np.exp(-2.0 * np.abs(A) ** 2) / np.pi
    W = rho[0, 0].real * wlist[0]
    for n in range(1, M):
        wlist[n] = 2.0 * A * wlist[n - 1] / sq[n]
        W = W + 2.0 * np.real(rho[0, n] * wlist[n])
    for m in range(1, M):
        temp = wlist[m]
        wlist[m] = (2.0 * np.conj(A) * temp - sq[m] * wlist[m - 1]) / sq[m]
        W = W + np.real(rho[m, m] * wlist[m])
        for n in range(m + 1, M):
            temp2 = (2.0 * A * wlist[n - 1] - sq[m] * temp) / sq[n]
            temp = wlist[n]
            wlist[n] = temp2
            W = W + 2.0 * np.real(rho[m, n] * wlist[n])
    return q, p, np.real(W)

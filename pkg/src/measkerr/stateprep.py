"""Cat and compass state preparation with full knowledge of the circuit parameters."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .fock import FockVector, coherent_state, fidelity, min_truncation
from .gaussian_map import channel_params, siegel_from_rtheta, solve_theta_for_gamma
from .protocol import EXACT_CORRECTION, conditioned_state, outcome_pdf

KIND_GAMMA = {"cat": math.pi / 2, "compass": math.pi / 4}
DEFAULT_RUNS = 50


@dataclass(frozen=True)
class PrepTarget:
    kind: str
    alpha: complex

    def __post_init__(self):
        if self.kind not in KIND_GAMMA:
            raise ValueError(f"kind must be one of {sorted(KIND_GAMMA)}, got {self.kind!r}")

    @property
    def gamma_target(self) -> float:
        return KIND_GAMMA[self.kind]

    def state(self, n_trunc: int, gamma: float | None = None) -> FockVector:
        """exp(-i gamma n^2)|alpha>; gamma defaults to the nominal target."""
        gamma = self.gamma_target if gamma is None else gamma
        coh = coherent_state(self.alpha, n_trunc)
        n = np.arange(n_trunc + 1)
        return FockVector(coh.amplitudes * np.exp(-1j * gamma * n * n), normalized=True)


def default_truncation(alpha: complex) -> int:
    return min_truncation(abs(alpha) ** 2, 1e-13) + 10


@dataclass
class PrepReport:
    kind: str
    alpha: complex
    r: float
    g: float
    theta_star: float
    zeta: float
    seed: int
    n_trunc: int
    runs: list = field(default_factory=list)

    @property
    def fidelities(self) -> np.ndarray:
        return np.array([f for _, f in self.runs])

    @property
    def outcomes(self) -> np.ndarray:
        return np.array([m for m, _ in self.runs])

    @property
    def F_avg(self) -> float:
        return float(np.mean(self.fidelities))

    @property
    def infidelity_stderr(self) -> float:
        f = self.fidelities
        return float(np.std(f, ddof=1) / math.sqrt(f.size)) if f.size > 1 else float("nan")

    @property
    def asymptote(self) -> float:
        """Leading-order average fidelity 1 - zeta |alpha|^2."""
        return 1.0 - self.zeta * abs(self.alpha) ** 2

    @property
    def m_mean_expected(self) -> float:
        return self.g * abs(self.alpha) ** 2

    @property
    def m_second_moment_expected(self) -> float:
        a2 = abs(self.alpha) ** 2
        return self.g**2 * (1.0 / (4.0 * self.zeta) + a2 * (1.0 + a2))

    def to_dict(self) -> dict:
        return {
            "kind": self.kind, "alpha": [self.alpha.real, self.alpha.imag], "r": self.r,
            "g": self.g, "theta_star": self.theta_star, "zeta": self.zeta, "seed": self.seed,
            "n_trunc": self.n_trunc, "n_runs": len(self.runs), "F_avg": self.F_avg,
            "infidelity_stderr": self.infidelity_stderr, "asymptote": self.asymptote,
            "m_mean_expected": self.m_mean_expected,
            "m_second_moment_expected": self.m_second_moment_expected,
            "runs": [{"m": m, "F_m": f} for m, f in self.runs],
        }


def _setup(alpha, r, g, kind, n_trunc):
    target = PrepTarget(kind, complex(alpha))
    theta_star = solve_theta_for_gamma(r, g, target.gamma_target)
    anc = siegel_from_rtheta(r, theta_star)
    n_trunc = default_truncation(target.alpha) if n_trunc is None else n_trunc
    probe = coherent_state(target.alpha, n_trunc)
    ideal = target.state(n_trunc, channel_params(anc, g).gamma)
    return target, theta_star, anc, probe, ideal


def prepare_once(alpha, r: float, g: float, kind: str, rng_seed, n_trunc: int | None = None):
    """One run: sample m, apply the exactly corrected Kraus map, score against the target.

    Returns (state, m, F_m).

    Raises:
        NoSolution: when r is below the squeezing threshold for ``kind``.
    """
    _, _, anc, probe, ideal = _setup(alpha, r, g, kind, n_trunc)
    rng = rng_seed if isinstance(rng_seed, np.random.Generator) else np.random.default_rng(rng_seed)
    m = float(outcome_pdf(probe, anc, g).sample(rng))
    state, _ = conditioned_state(probe, anc, g, m, EXACT_CORRECTION)
    return state, m, fidelity(ideal, state)


def average_fidelity(alpha, r: float, g: float, kind: str, n_runs: int = DEFAULT_RUNS,
                     rng_seed: int = 0, n_trunc: int | None = None) -> PrepReport:
    """Monte-Carlo mean of the conditioned fidelity; run i uses seed (rng_seed, i)."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    _, theta_star, anc, probe, ideal = _setup(alpha, r, g, kind, n_trunc)
    pdf = outcome_pdf(probe, anc, g)
    report = PrepReport(kind, complex(alpha), r, g, theta_star, channel_params(anc, g).zeta,
                        rng_seed, probe.n_trunc)
    for i in range(n_runs):
        rng = np.random.default_rng([rng_seed, i])
        m = float(pdf.sample(rng))
        state, _ = conditioned_state(probe, anc, g, m, EXACT_CORRECTION)
        report.runs.append((m, fidelity(ideal, state)))
    return report


def conditioned_fidelity_closed_form(alpha, zeta: float, g: float, m) -> np.ndarray:
    """F_m = |<alpha|K K_c|alpha>|^2 / <alpha|K^2 K_c^2|alpha> from Poisson weights."""
    n_trunc = default_truncation(alpha)
    w = coherent_state(alpha, n_trunc).populations
    n = np.arange(n_trunc + 1)
    m = np.atleast_1d(np.asarray(m, dtype=float))
    d2 = (n[None, :] - m[:, None] / g) ** 2
    # shift by the minimum exponent so neither sum underflows
    shift = np.min(d2, axis=1, keepdims=True)
    num = np.sum(w * np.exp(-zeta * (d2 - shift)), axis=1) ** 2
    den = np.sum(w * np.exp(-2 * zeta * (d2 - shift)), axis=1)
    return num / den

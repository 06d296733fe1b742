"""Adaptive composite Gauss-Legendre quadrature for vector-valued integrands.

The integrand is called on whole arrays of nodes at once, which lets the
Fisher-information code evaluate every m-node of a refinement sweep in a
single batched numpy pass. Refinement is deterministic: a panel is accepted
when its one-panel and two-half-panel estimates agree to its share of the
tolerance, otherwise it is bisected.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import QuadratureNotConverged


@dataclass
class QuadResult:
    value: np.ndarray
    error: np.ndarray
    n_panels: int
    n_evals: int


def _gl_panels(f, lefts, rights, x, w):
    """Gauss-Legendre estimate on each panel, shape (n_panels, n_components)."""
    half = 0.5 * (rights - lefts)
    mid = 0.5 * (rights + lefts)
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    vals = np.asarray(f(nodes), dtype=float)
    if vals.ndim == 1:
        vals = vals[:, None]
    vals = vals.reshape(lefts.size, x.size, -1)
    return np.einsum("pnk,n->pk", vals, w) * half[:, None], nodes.size


def integrate(f, a: float, b: float, rtol: float = 1e-8, atol: float = 0.0,
              order: int = 16, initial_panels: int = 16, max_panels: int = 200_000) -> QuadResult:
    """Integrate ``f`` over [a, b].

    Args:
        f: maps a 1-D node array to values of shape (len,) or (len, k).
        rtol, atol: per-component tolerance on the total.
        order: Gauss-Legendre points per panel.

    Raises:
        QuadratureNotConverged: if refinement exceeds ``max_panels``.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, initial_panels + 1)
    lefts, rights = edges[:-1], edges[1:]
    coarse, n_evals = _gl_panels(f, lefts, rights, x, w)

    accepted_val = np.zeros(coarse.shape[1])
    accepted_err = np.zeros(coarse.shape[1])
    total_panels = 0
    while lefts.size:
        mids = 0.5 * (lefts + rights)
        both_l = np.concatenate([lefts, mids])
        both_r = np.concatenate([mids, rights])
        halves, ne = _gl_panels(f, both_l, both_r, x, w)
        n_evals += ne
        k = lefts.size
        fine = halves[:k] + halves[k:]
        err = np.abs(fine - coarse)

        estimate = accepted_val + fine.sum(axis=0)
        tol = np.maximum(rtol * np.abs(estimate), atol)
        share = ((rights - lefts) / (b - a))[:, None]
        ok = np.all(err <= tol[None, :] * share, axis=1)

        accepted_val += fine[ok].sum(axis=0)
        accepted_err += err[ok].sum(axis=0)
        total_panels += int(ok.sum())

        keep = ~ok
        if total_panels + 2 * int(keep.sum()) > max_panels:
            raise QuadratureNotConverged(
                f"quadrature on [{a:.6g}, {b:.6g}] needs more than {max_panels} panels",
                estimate=estimate, error=err.sum(axis=0), n_panels=total_panels)
        lefts = both_l[np.concatenate([keep, keep])]
        rights = both_r[np.concatenate([keep, keep])]
        coarse = halves[np.concatenate([keep, keep])]
    return QuadResult(accepted_val, accepted_err, total_panels, n_evals)

"""Approximate cohomological equation of one KAM step.

Given the current normal form B = L_omega + G(L_omega) and the resolved
part V^co of the perturbation, build a scalar generator W such that
[B, W]/(i hbar) + V^co equals its own average up to a residual that is
quadratic in V.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractionError, ResonanceError
from .symbol import (
    VectorSymbol, grad_norm, grad_xi, lincomb, linear_bracket, bracket, midpoint_multiply,
    norm, off_average, average,
)

Z0 = 2.0


@dataclass
class CohomologySolution:
    W: object
    Vtilde: VectorSymbol
    residual: VectorSymbol
    neumann_terms: int
    neumann_norms: list = field(default_factory=list)
    grad_G: float = 0.0


def gradient_table(G):
    """``table[a][b]`` = d_b G_a for a vector of q = 0 symbols."""
    return [grad_xi(Ga).comps for Ga in G.comps]


def apply_mixing(V, table, hbar):
    """(A V)_a = sum_b mean_segment(d_b G_a) * V_b."""
    m = len(V)
    out = []
    for a in range(m):
        parts = [midpoint_multiply(table[a][b], V[b], hbar) for b in range(m)
                 if len(table[a][b]) and len(V[b])]
        out.append(lincomb([1.0] * len(parts), parts) if parts else V.space.zero())
    return VectorSymbol(out)


def neumann_resolve(Vco, G, hbar, tol=1e-16, rho=1.0, max_terms=64):
    """Solve (I + A) Vtilde = Vco by the series sum_k (-A)^k Vco.

    Returns ``(Vtilde, term_norms)``. The series is cut once a term's norm
    drops below ``tol * ||Vco||``; the contraction ``Z0 ||grad G|| < 1`` is
    required up front.
    """
    gG = grad_norm(G, rho)
    if Z0 * gG >= 1.0:
        raise ContractionError(f"Z0 * ||grad G|| = {Z0 * gG:.6g} >= 1")
    base = norm(Vco, rho)
    norms = [base]
    if base == 0.0 or gG == 0.0:
        return Vco, norms
    table = gradient_table(G)
    total = [[c] for c in Vco.comps]
    term = Vco
    for _ in range(max_terms - 1):
        term = apply_mixing(term, table, hbar) * -1.0
        nt = norm(term, rho)
        norms.append(nt)
        for a, c in enumerate(term.comps):
            total[a].append(c)
        if nt < tol * base:
            break
    out = VectorSymbol([lincomb([1.0] * len(parts), parts) for parts in total])
    return out, norms


def solve_W(Vtilde):
    """Scalar generator from the components selected by the best row of each q.

    An atom (p, q, c) of component l_q contributes (p, q, c/(i <omega_l, q>)),
    so that [L_{omega_l}, W]/(i hbar) cancels it exactly.
    """
    space = Vtilde.space
    parts = []
    for a, Va in enumerate(Vtilde.comps):
        Vo = off_average(Va)
        if len(Vo) == 0:
            continue
        sel = space.freq.best_indices(Vo.q) == a
        if not sel.any():
            continue
        piece = Vo.select(sel)
        div = piece.qf @ space.omega[a]
        if np.any(div == 0):
            raise ResonanceError("zero small divisor in the cohomological equation")
        parts.append(piece.with_coeffs(piece.c / (1j * div)))
    if not parts:
        return space.zero()
    return lincomb([1.0] * len(parts), parts)


def exact_residual(G, W, Vco, hbar):
    """[L + G, W]/(i hbar) + Vco - average(Vco), component by component."""
    om = G.space.omega
    out = []
    for a in range(len(G)):
        out.append(lincomb([1.0, 1.0, 1.0], [
            linear_bracket(W, om[a]), bracket(G[a], W, hbar), off_average(Vco[a])]))
    return VectorSymbol(out)


def solve(Vco, G, hbar, rho=1.0, neumann_tol=1e-16, max_terms=64):
    """Neumann resolve, scalar solve and exact residual in one call."""
    Voff = off_average(Vco)
    Vt, norms = neumann_resolve(Voff, G, hbar, neumann_tol, rho, max_terms)
    W = solve_W(Vt)
    res = exact_residual(G, W, Vco, hbar)
    return CohomologySolution(W=W, Vtilde=Vt, residual=res, neumann_terms=len(norms),
                              neumann_norms=norms, grad_G=grad_norm(G, rho))


def step_identity_defect(G, W, Vco, residual, hbar):
    """Largest coefficient of [B, W]/(i hbar) + Vco - average(Vco) - residual, recomputed."""
    om = G.space.omega
    worst = 0.0
    for a in range(len(G)):
        lhs = (linear_bracket(W, om[a]) + bracket(G[a], W, hbar)) + (Vco[a] - average(Vco[a]))
        diff = lhs - residual[a]
        worst = max(worst, diff.max_abs())
    return worst

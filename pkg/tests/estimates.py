"""Checkers for the fundamental norm inequalities, k = 0.

Each checker returns ``(lhs, rhs)``; the inequality holds when
``lhs <= rhs * (1 + REL) + ABS``.
"""

import math

import numpy as np

from qbnf import oracle
from qbnf.cohomology import Z0, neumann_resolve, solve_W
from qbnf.symbol import (
    VectorSymbol, bracket, grad_norm, linear_bracket, norm, op_product, split_cutoff,
)

REL = 1e-12
ABS = 1e-300


def holds(pair):
    lhs, rhs = pair
    return lhs <= rhs * (1 + REL) + ABS


def product_bound(F, G, hbar, rho):
    """||FG|| <= ||F|| ||G||."""
    return norm(op_product(F, G, hbar), rho), norm(F, rho) * norm(G, rho)


def bracket_bound(F, G, hbar, rho, delta, delta1):
    """||[F,G]/ih||_{rho-delta-delta1} <= 2/(e^2 delta1 (delta+delta1)) ||F||_rho ||G||_{rho-delta}."""
    lhs = norm(bracket(F, G, hbar), rho - delta - delta1)
    return lhs, 2 / (math.e ** 2 * delta1 * (delta + delta1)) * norm(F, rho) * norm(G, rho - delta)


def nested_bound(F, G, hbar, rho, delta, d):
    """||ad_G^d F||_{rho-delta}/d! <= (2/delta^2)^d ||F|| ||G||^d / (2 pi)."""
    X = F
    for _ in range(d):
        X = bracket(G, X, hbar)
    lhs = norm(X, rho - delta) / math.factorial(d)
    return lhs, (2 / delta ** 2) ** d * norm(F, rho) * norm(G, rho) ** d / (2 * math.pi)


def linear_bound(G, rho, delta):
    """||[L_omega, G]/ih||_{rho-delta} <= underomega/(e delta) ||G||_rho."""
    om = G.space.omega
    lhs = norm(VectorSymbol([linear_bracket(G, row) for row in om]), rho - delta)
    return lhs, G.space.underomega / (math.e * delta) * norm(G, rho)


def brjuno_divisor_bound(V, rho, M):
    """||W||_rho <= M_M ||V||_rho for V supported in 0 < |q| <= M."""
    W = solve_W(V)
    return norm(W, rho), V.space.freq.small_divisor_bound(M) * norm(V, rho)


def diophantine_divisor_bound(V, rho, d, tau, M):
    """||W||_{rho-d} <= gamma (tau/(e d))^tau ||V||_rho."""
    W = solve_W(V)
    gamma = V.space.freq.diophantine_fit(tau, M)
    return norm(W, rho - d), gamma * (tau / (math.e * d)) ** tau * norm(V, rho)


def gradient_bound(F, rho, delta):
    """||grad F||_{rho-delta} <= ||F||_rho/(e delta)."""
    return grad_norm(F, rho - delta), norm(F, rho) / (math.e * delta)


def neumann_bound(Vco, G, hbar, rho):
    """||(I+A)^{-1} Vco|| <= ||Vco||/(1 - Z0 ||grad G||)."""
    Vt, _ = neumann_resolve(Vco, G, hbar, 1e-18, rho)
    return norm(Vt, rho), norm(Vco, rho) / (1 - Z0 * grad_norm(G, rho))


def cutoff_bound(F, rho, delta, M):
    """||F^{>M}||_{rho-delta} <= e^{-delta M} ||F||_rho."""
    _, tail = split_cutoff(F, M)
    return norm(tail, rho - delta), math.exp(-delta * M) * norm(F, rho)


def operator_bound(F, hbar, rho, N=4):
    """||Op(F)||_2 <= ||F||_rho on a finite section."""
    A = oracle.to_matrix(F, N, hbar).entries
    return float(np.linalg.norm(A, 2)), norm(F, rho)


def shell_restrict(V, M):
    """Keep 0 < |q| <= M."""
    from qbnf.symbol import off_average
    return VectorSymbol([off_average(split_cutoff(c, M)[0]) for c in V.comps])

"""Closed-form constants, convergence radii and budgets of the KAM scheme.

All formulas work at a fixed Sobolev index ``k`` and take the Brjuno value
``B`` explicitly, so callers decide how the infinite sum is truncated.
"""

from dataclasses import asdict, dataclass
import math

from .freq import FrequencyMatrix

LOG2 = math.log(2.0)


def Z(k):
    """Z_k = 2 (k+1) 8^k."""
    if k < 0 or int(k) != k:
        raise ValueError("k must be a nonnegative integer")
    return 2 * (k + 1) * 8 ** int(k)


def _check(alpha, eta, C):
    if not 0 < C < eta < 1:
        raise ValueError(f"need 0 < C < eta < 1, got C={C}, eta={eta}")
    if not alpha > 0:
        raise ValueError("alpha must be positive")


def delta_const(eta, C, r_max=200):
    """Delta = -inf_{r>=1} min(2^{-r} log((1 - eta + C/r)/2), log 1/2)."""
    worst = math.log(0.5)
    for r in range(1, r_max + 1):
        worst = min(worst, 2.0 ** -r * math.log(0.5 * (1.0 - eta + C / r)))
    return -worst


def M_cap(alpha, C, k):
    return (alpha * math.e * C / (8.0 * Z(k))) ** 0.25


def E0(alpha, eta, underomega, M1):
    return (3 * alpha + (1 + eta) * underomega * M1) / ((1 - eta) ** 2 * M1)


def dio_factor(gamma, tau, d):
    """gamma (tau/(e d))^tau, with 0^0 = 1."""
    return gamma * (tau / (math.e * d)) ** tau


def E1(alpha, eta, underomega, gamma, tau):
    g = dio_factor(gamma, tau, alpha)
    return (2.0 ** (2 + tau) * alpha + 2 * (alpha + (1 + eta) * underomega * g)) / ((1 - eta) ** 2 * g)


def C_const(B, alpha, k, E):
    return 2 * B - 6 * math.log(alpha) + 6 * LOG2 + 2 * math.log(Z(k) * E)


def P_const(B, eta, C, k):
    return B + math.log(Z(k)) + 2 / math.e + delta_const(eta, C)


def D_const(B, alpha, k, E, M1, norm_V):
    return math.exp(C_const(B, alpha, k, E)) * (
        norm_V + math.exp(-alpha) * alpha ** 3 / (2 * M1 ** 2 * Z(k) * E))


def _brjuno_min(B, eta, C, k, alpha, lam=1.0):
    nu = lam ** 2 * math.exp(-B - delta_const(eta, C)) / (2 ** (1 / math.e) * Z(k))
    return min(nu, M_cap(alpha, C, k))


def radius_brjuno_raw(B, M1, underomega, alpha, eta, C, k):
    """R_k(omega) and the omega-condition, from explicit B and M_1."""
    _check(alpha, eta, C)
    if alpha >= 2 * LOG2:
        raise ValueError("Brjuno radius needs alpha < 2 log 2")
    Zk = Z(k)
    head = (3 * alpha + (1 + eta) * underomega * M1)
    R = ((1 - eta) ** 4 * M1 ** 2 / head ** 2
         * alpha ** 6 * math.exp(-2 * B) / (2 ** 6 * Zk ** 2)
         * _brjuno_min(B, eta, C, k, alpha))
    lhs = head / (2 * math.exp(alpha) * (1 - eta) ** 2 * M1 ** 3)
    rhs = alpha ** 3 * math.exp(-2 * B) / (2 ** 6 * Zk) * _brjuno_min(B, eta, C, k, alpha)
    return R, lhs <= rhs


def lambda_scaling_raw(B, M1, underomega, alpha, eta, C, k, lam=None):
    """lambda_0 and, if ``lam`` is given, the scaled radius R_{lambda,k}."""
    _check(alpha, eta, C)
    Zk = Z(k)
    mu = ((alpha + 2 * ((1 - eta) * alpha + (1 + eta) * underomega * M1))
          / (2 * math.exp(alpha) * (1 - eta) ** 2 * M1 ** 3)
          * 2 ** 6 * Zk / (alpha ** 3 * math.exp(-2 * B)))
    nu = math.exp(-B - delta_const(eta, C)) / (2 ** (1 / math.e) * Zk)
    Mc = M_cap(alpha, C, k)
    lam0 = max(mu / Mc, (mu / nu) ** (1.0 / 3.0))
    if lam is None:
        return lam0, None
    head = 3 * alpha + (1 + eta) * underomega * M1
    R = (lam * (1 - eta) ** 4 * M1 ** 2 / head ** 2
         * alpha ** 6 * math.exp(-2 * B) / (2 ** 6 * Zk ** 2)
         * _brjuno_min(B, eta, C, k, alpha, lam))
    return lam0, R


def B_alpha(gamma, tau, alpha):
    """2 log(2^tau gamma (tau/(e alpha))^tau)."""
    return 2 * math.log(2.0 ** tau * dio_factor(gamma, tau, alpha))


def radius_diophantine(underomega, alpha, eta, C, k, gamma, tau):
    """R_k^Dio(omega) and B_alpha(gamma, tau)."""
    _check(alpha, eta, C)
    Zk = Z(k)
    g = dio_factor(gamma, tau, alpha)
    head = (1 - eta) ** 2 * g / (2.0 ** (2 + tau) * alpha + 2 * (alpha + (1 + eta) * underomega * g))
    big = 2.0 ** tau * g
    cap = min(big ** -2 * math.exp(-delta_const(eta, C)) / (2 ** (1 / math.e) * Zk),
              M_cap(alpha, C, k))
    R = head ** 2 * alpha ** 6 / (2 ** 6 * Zk ** 2 * big ** 4) * cap
    return R, B_alpha(gamma, tau, alpha)


def budget_K(underomega_minus, alpha, eta, k):
    return ((1 - eta) ** 4 * alpha ** 6
            / ((alpha + 2 * (1 + eta) * underomega_minus) * 2 ** 6 * 2 ** (1 / math.e) * Z(k) ** 3))


def brjuno_budget(norm_V, underomega_minus, alpha, eta, k, B_value=None):
    """Largest admissible B for a perturbation of size ``norm_V``.

    Returns ``(max_B, ok)`` where ``max_B = log(2K / norm_V) / 3``, the
    boundary at which ``norm_V = 2K e^{-3B}``, and ``ok`` compares
    ``B_value`` against it (``None`` when no value is supplied).
    """
    if norm_V <= 0:
        return math.inf, True if B_value is not None else None
    K = budget_K(underomega_minus, alpha, eta, k)
    max_B = math.log(2 * K / norm_V) / 3.0
    ok = None if B_value is None else B_value < max_B
    return max_B, ok


@dataclass
class ConstantsReport:
    k: int
    Z_k: float
    Delta: float
    M_cap: float
    E0: float
    E: float
    E1: float | None
    C_k: float
    P: float
    D_k: float
    D_below_exp_minus_P: bool
    D_below_M: bool
    grad_ok: bool
    B: float
    B_partial: float
    B_last_increment: float
    B_tail_bound: float
    lambda0: float | None
    R_brjuno: float | None
    omega_condition_ok: bool
    R_scaled: float | None
    lam: float | None
    R_dio: float | None
    B_alpha: float | None
    gamma: float | None
    tau: float | None

    def to_dict(self):
        return asdict(self)


def constants(freq: FrequencyMatrix, k=0, alpha=0.5, eta=0.5, C=0.25, norm_V=0.0,
              grad_Vbar=0.0, K=6, tail_bound=0.0, E=None, lam=None, gamma=None, tau=None):
    """Evaluate every constant for one frequency matrix and parameter set.

    ``B`` is the partial Brjuno sum up to ``2^K`` (absolute logarithms)
    plus the caller's ``tail_bound``.
    """
    _check(alpha, eta, C)
    Zk = Z(k)
    partial, last = freq.brjuno_sum(K, absolute=True)
    B = partial + tail_bound
    M1 = freq.small_divisor_bound(1.0)
    uo = freq.underomega
    e0 = E0(alpha, eta, uo, M1)
    E_used = e0 if E is None else E
    if E_used < e0:
        raise ValueError("E must be at least E0")
    Ck = C_const(B, alpha, k, E_used)
    P = P_const(B, eta, C, k)
    Dk = D_const(B, alpha, k, E_used, M1, norm_V)
    Mc = M_cap(alpha, C, k)
    if alpha < 2 * LOG2:
        R, cond = radius_brjuno_raw(B, M1, uo, alpha, eta, C, k)
        lam0, Rs = lambda_scaling_raw(B, M1, uo, alpha, eta, C, k, lam)
    else:
        R, cond, lam0, Rs = None, False, None, None
    e1 = Rd = Ba = None
    if gamma is not None and tau is not None:
        e1 = E1(alpha, eta, uo, gamma, tau)
        Rd, Ba = radius_diophantine(uo, alpha, eta, C, k, gamma, tau)
    return ConstantsReport(
        k=k, Z_k=Zk, Delta=delta_const(eta, C), M_cap=Mc, E0=e0, E=E_used, E1=e1,
        C_k=Ck, P=P, D_k=Dk, D_below_exp_minus_P=Dk < math.exp(-P), D_below_M=Dk < Mc,
        grad_ok=grad_Vbar < (eta - C) / Zk, B=B, B_partial=partial, B_last_increment=last,
        B_tail_bound=tail_bound, lambda0=lam0, R_brjuno=R, omega_condition_ok=bool(cond),
        R_scaled=Rs, lam=lam, R_dio=Rd, B_alpha=Ba, gamma=gamma, tau=tau,
    )

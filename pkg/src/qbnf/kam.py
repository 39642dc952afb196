"""Newton/KAM iteration towards the quantum Birkhoff normal form.

Each step removes the resolved part of V_r with a generator W_r,
absorbs the average into the normal form and carries the rest
(cut-off tail, residual and Lie remainders) to the next step. The measured
norm of V_{r+1} is audited against the a-priori bound of the step.
"""

from dataclasses import asdict, dataclass, field
import logging
import math
import warnings

import numpy as np

from . import cohomology, constants as K
from .errors import ConfigError, InvariantViolation, PreconditionError, QbnfError
from .symbol import (
    VectorSymbol, average, lie_conjugate, lie_terms, lincomb, norm, split_cutoff,
)

log = logging.getLogger(__name__)

BRJUNO = "brjuno"
DIOPHANTINE = "diophantine"
Z0 = 2.0


@dataclass
class KamConfig:
    """Parameters of a run.

    ``lie_tol``, ``neumann_tol`` and ``drop_tol`` are relative to the
    initial norm ``||V_0||_rho``: Lie series stop once a term falls below
    ``lie_tol ||V_0||``, and atoms of V_{r+1} whose weighted size is below
    ``drop_tol ||V_0||`` are discarded. ``target_norm`` defaults to
    ``target_rel ||V_0||``.
    """

    mode: str = BRJUNO
    alpha: float = 0.5
    rho: float = 2.0
    eta: float = 0.5
    C: float = 0.25
    hbar: float = 1.0
    max_iter: int = 12
    lie_tol: float = 1e-17
    neumann_tol: float = 1e-16
    prune_tol: float = 1e-16
    drop_tol: float = 1e-19
    target_norm: float | None = None
    target_rel: float = 1e-12
    gamma: float | None = None
    tau: float | None = None
    dio_M_max: float = 64.0
    k: int = 0
    strict: bool = True
    audit_decomposition: bool = True
    brjuno_K: int = 6

    def validate(self):
        if self.mode not in (BRJUNO, DIOPHANTINE):
            raise ConfigError(f"mode must be {BRJUNO!r} or {DIOPHANTINE!r}")
        if not self.alpha > 0:
            raise ConfigError("alpha must be positive")
        if self.mode == BRJUNO and not self.alpha < 2 * math.log(2):
            raise ConfigError("Brjuno mode needs alpha < 2 log 2")
        if not self.rho > 2 * self.alpha:
            raise ConfigError("need rho > 2 alpha")
        if not 0 < self.C < self.eta < 1:
            raise ConfigError("need 0 < C < eta < 1")
        if not 0 <= self.hbar <= 1:
            raise ConfigError("hbar must lie in [0, 1]")
        if self.max_iter < 0:
            raise ConfigError("max_iter must be nonnegative")
        for name in ("lie_tol", "neumann_tol", "prune_tol", "target_rel"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.drop_tol < 0:
            raise ConfigError("drop_tol must be nonnegative")
        if self.tau is not None and self.tau < 0:
            raise ConfigError("tau must be nonnegative")
        return self

    def to_dict(self):
        return asdict(self)

    def rho_at(self, r):
        return self.rho - self.alpha * (2.0 - 2.0 ** (1 - r))

    def delta_at(self, r):
        return self.alpha * 2.0 ** -r

    @staticmethod
    def cutoff_at(r):
        return 2.0 ** r


@dataclass
class KamState:
    r: int
    G: VectorSymbol
    V: VectorSymbol
    rho_r: float
    Ws: list
    scale: float
    hbar: float


@dataclass
class IterationRecord:
    r: int
    rho_r: float
    delta_r: float
    M_r: float
    norm_V: float
    norm_W: float
    norm_residual: float
    norm_tail: float
    bound_F: float | None
    bound_rhs: float | None
    measured_next: float
    bound_ok: bool | None
    grad_G: float
    diag: dict = field(default_factory=dict, repr=False)

    FIELDS = ("r", "rho_r", "delta_r", "M_r", "norm_V", "norm_W", "norm_residual", "norm_tail",
              "bound_F", "bound_rhs", "measured_next", "bound_ok", "grad_G")

    def row(self):
        return [getattr(self, f) for f in self.FIELDS]


@dataclass
class BnfResult:
    B_infty: VectorSymbol
    Ws: list
    records: list
    converged: bool
    final_norm: float
    config: KamConfig
    initial_norm: float
    tail_estimate_A: float | None = None
    final_V: VectorSymbol | None = None
    first_violation: str | None = None


def _dio_constants(cfg, freq):
    tau = cfg.tau if cfg.tau is not None else float(freq.l)
    gamma = cfg.gamma if cfg.gamma is not None else freq.diophantine_fit(tau, cfg.dio_M_max)
    return gamma, tau


def step_bound(mode, norm_V, grad_G, divisor, delta, underomega, Zk, tau=None):
    """F_r (Brjuno) or F'_r (Diophantine); ``None`` when a denominator is not positive.

    ``divisor`` is M_{M_r} in Brjuno mode and gamma (tau/(e delta))^tau in
    Diophantine mode.
    """
    zg = Zk * grad_G
    if zg >= 1:
        return None
    den = 1.0 - divisor / (1.0 - zg) * Zk / delta ** 2 * norm_V
    if den <= 0:
        return None
    lead = 1.0 if mode == BRJUNO else 2.0 ** (2 + tau)
    inner = ((1.0 - zg) + divisor / delta * underomega * (1.0 + zg)) / den
    return divisor * Zk / (delta ** 2 * (1.0 - zg) ** 2) * (lead + inner)


def predicted_bound(state, cfg):
    """F_r for the current state, with G_r = ||grad(B_r - B_0)|| at rho_r."""
    freq = state.V.space.freq
    r = state.r
    delta = cfg.delta_at(r)
    nV = norm(state.V, state.rho_r)
    gG = cohomology.grad_norm(state.G, state.rho_r)
    Zk = K.Z(cfg.k)
    if cfg.mode == BRJUNO:
        div = freq.small_divisor_bound(cfg.cutoff_at(r))
        return step_bound(BRJUNO, nV, gG, div, delta, freq.underomega, Zk)
    gamma, tau = _dio_constants(cfg, freq)
    return step_bound(DIOPHANTINE, nV, gG, K.dio_factor(gamma, tau, delta), delta, freq.underomega, Zk, tau)


def _drop_small(V, rho, threshold):
    if threshold <= 0:
        return V
    return V.map(lambda s: s.select(np.abs(s.c) * s.weights(rho) >= threshold) if len(s) else s)


def _sum(parts, space):
    parts = [p for p in parts if len(p)]
    if not parts:
        return space.zero()
    return lincomb([1.0] * len(parts), parts)


def kam_step(state, cfg, audit=False):
    """One conjugation step; returns the new state and its record."""
    V, G = state.V, state.G
    space = V.space
    freq = space.freq
    om = space.omega
    hbar = state.hbar
    r = state.r
    rho_r = state.rho_r
    delta = cfg.delta_at(r)
    rho_next = rho_r - delta
    M = cfg.cutoff_at(r)
    Zk = K.Z(cfg.k)
    nV = norm(V, rho_r)
    gG = cohomology.grad_norm(G, rho_r)
    brjuno = cfg.mode == BRJUNO

    if brjuno:
        div = freq.small_divisor_bound(M)
        if r >= 1:
            lim = cfg.eta - cfg.C / r
            if Z0 * gG >= lim:
                _flag(cfg, PreconditionError("gradient_smallness", f"Z0 ||grad G_r|| = {Z0 * gG:.6g} >= {lim:.6g}"))
            lim31 = 0.5 * (1 - cfg.eta + cfg.C / r)
            if div * Zk / delta ** 2 * nV >= lim31:
                _flag(cfg, PreconditionError("perturbation_smallness", f"M Z ||V_r|| / delta^2 >= {lim31:.6g}"))
        co, tail = split_cutoff(V, M)
    else:
        gamma, tau = _dio_constants(cfg, freq)
        div = K.dio_factor(gamma, tau, delta)
        co, tail = V, space.zero_vector()

    sol = cohomology.solve(co, G, hbar, rho_r, cfg.neumann_tol)
    W = sol.W
    h = average(V)
    tol_abs = cfg.lie_tol * state.scale

    R1, R2, new_V = [], [], []
    for a in range(len(V)):
        t1 = lie_terms(V[a], W, hbar, tol_abs, rho_r)
        t2 = lie_terms(G[a], W, hbar, tol_abs, rho_r, linear=om[a])
        R1.append(_sum(t1[1:], space))
        R2.append(_sum(t2[2:], space))
        new_V.append(_sum([tail[a], sol.residual[a], R1[a], R2[a]], space))
    V_next = _drop_small(VectorSymbol(new_V), rho_next, cfg.drop_tol * state.scale)
    G_next = G + h

    diag = {
        "neumann_terms": sol.neumann_terms,
        "lie_heuristic": Z0 * norm(W, rho_r) / delta ** 2,
        "norm_R1": norm(VectorSymbol(R1), rho_next),
        "norm_R2": norm(VectorSymbol(R2), rho_next),
        "atoms_V_next": V_next.atom_count(),
        "atoms_W": len(W),
        "divisor": div,
    }

    # W size chain: Brjuno at rho_r, Diophantine at rho_r - delta
    w_anchor = rho_r if brjuno else rho_next
    nW_anchor = norm(W, w_anchor)
    w_bound = div / (1.0 - Z0 * gG) * norm(co, rho_r)
    diag["W_bound"] = w_bound
    if nW_anchor > w_bound * (1 + 1e-9) + 1e-300:
        raise InvariantViolation(f"||W_{r}|| = {nW_anchor:.6g} exceeds its bound {w_bound:.6g}")

    if audit:
        full = lie_conjugate(V + G, W, hbar, tol_abs, rho_r, linear=True)
        direct = full - G - h
        gap = norm(direct - VectorSymbol(new_V), rho_next)
        diag["decomposition_gap"] = gap
        if gap > 1e3 * tol_abs + 1e-12 * state.scale:
            raise InvariantViolation(f"step decomposition differs from the full conjugation by {gap:.3e}")

    F = step_bound(cfg.mode, nV, gG, div, delta, freq.underomega, Zk, None if brjuno else tau)
    measured = norm(V_next, rho_next)
    if F is None:
        rhs, ok = None, None
    else:
        rhs = F * nV ** 2 + (math.exp(-delta * M) * nV if brjuno else 0.0)
        ok = measured <= rhs * (1 + 1e-9)
    rec = IterationRecord(
        r=r, rho_r=rho_r, delta_r=delta, M_r=M, norm_V=nV, norm_W=norm(W, rho_r),
        norm_residual=norm(sol.residual, rho_next), norm_tail=norm(tail, rho_next),
        bound_F=F, bound_rhs=rhs, measured_next=measured, bound_ok=ok, grad_G=gG, diag=diag,
    )
    new_state = KamState(r=r + 1, G=G_next, V=V_next, rho_r=rho_next, Ws=state.Ws + [W],
                         scale=state.scale, hbar=hbar)
    return new_state, rec


def _flag(cfg, err):
    if cfg.strict:
        raise err
    warnings.warn(str(err), RuntimeWarning, stacklevel=3)


def initial_state(V0, cfg):
    scale = norm(V0, cfg.rho)
    return KamState(r=0, G=V0.space.zero_vector(), V=V0, rho_r=cfg.rho, Ws=[], scale=scale, hbar=cfg.hbar)


def tail_estimate(freq, cfg, initial_norm, n):
    """A_n = sum_{s>=n} M_{M_s} D_k^{2^s}/(1 - eta + C/s); ``inf`` when D_k >= 1.

    Divisor maxima beyond the enumerable shells are replaced by
    e^{B 2^s}, which bounds them whenever every M_{2^j} is at least 1.
    """
    rep = K.constants(freq, cfg.k, cfg.alpha, cfg.eta, cfg.C, norm_V=initial_norm, K=cfg.brjuno_K)
    D = rep.D_k
    if D >= 1:
        return math.inf
    n = max(n, 1)
    total = 0.0
    for s in range(n, n + 64):
        try:
            Ms = freq.small_divisor_bound(2.0 ** s)
        except Exception:
            Ms = math.exp(rep.B * 2.0 ** s)
        term = Ms * D ** (2.0 ** s) / (1 - cfg.eta + cfg.C / s)
        total += term
        if term < 1e-300 or term < 1e-17 * total:
            break
    return total


def run(V0, cfg=None, on_step=None):
    """Iterate KAM steps until ||V_r|| <= target or ``max_iter`` steps."""
    cfg = (cfg or KamConfig()).validate()
    space = V0.space
    if len(V0) != space.m:
        raise ConfigError(f"perturbation has {len(V0)} components, expected m = {space.m}")
    state = initial_state(V0, cfg)
    target = cfg.target_norm if cfg.target_norm is not None else cfg.target_rel * state.scale
    records = []
    first_violation = None
    if cfg.mode == BRJUNO:
        try:
            rep = K.constants(space.freq, cfg.k, cfg.alpha, cfg.eta, cfg.C, norm_V=state.scale, K=cfg.brjuno_K)
            if rep.R_brjuno is not None and state.scale > rep.R_brjuno:
                log.warning("||V|| = %.3e exceeds the sufficient radius %.3e; the bound audit still applies",
                         state.scale, rep.R_brjuno)
        except (ValueError, QbnfError) as exc:  # advisory only
            log.warning("radius check skipped: %s", exc)
    for it in range(cfg.max_iter):
        if norm(state.V, state.rho_r) <= target:
            break
        state, rec = kam_step(state, cfg, audit=cfg.audit_decomposition and it == 0)
        records.append(rec)
        if rec.bound_ok is False and first_violation is None:
            first_violation = f"step {rec.r}: measured {rec.measured_next:.6g} > bound {rec.bound_rhs:.6g}"
        if on_step is not None:
            on_step(rec)
    final = norm(state.V, state.rho_r)
    converged = final <= target
    try:
        A = tail_estimate(space.freq, cfg, state.scale, len(records)) if records else 0.0
    except Exception:
        A = None
    return BnfResult(
        B_infty=state.G, Ws=state.Ws, records=records, converged=converged, final_norm=final,
        config=cfg, initial_norm=state.scale, tail_estimate_A=A, final_V=state.V,
        first_violation=first_violation,
    )


def classical_run(V0, cfg=None):
    """The same iteration at hbar = 0, where brackets are Poisson brackets."""
    cfg = cfg or KamConfig()
    if cfg.hbar != 0:
        raise ConfigError("classical_run needs hbar = 0")
    return run(V0, cfg)


def conjugate_observable(X, result, delta, linear=None):
    """Apply exp(iW_r/hbar) . exp(-iW_r/hbar) for r = 0, 1, ... to X.

    Returns the conjugated symbol and ||conj(X) - X|| at width
    rho - 2 alpha - delta. ``linear`` marks an unbounded part L_v of X,
    which is carried implicitly.
    """
    cfg = result.config
    rho_out = cfg.rho - 2 * cfg.alpha - delta
    if rho_out <= 0:
        raise ValueError("delta leaves no analyticity width")
    Y = X
    tol = cfg.lie_tol * max(result.initial_norm, 1e-300)
    for r, W in enumerate(result.Ws):
        Y = lie_conjugate(Y, W, cfg.hbar, tol, cfg.rho_at(r), linear=linear)
    return Y, norm(Y - X, rho_out)


def observable_bound(X_bar, result, delta):
    """Bounds D/delta^2 * X_bar for ||conj(X) - X||.

    Returns ``(empirical, formula)``. The empirical value uses the measured
    generator norms, Z sum_s ||W_s|| exp(2 sum_j Z ||W_j|| / delta_j^2);
    the formula value uses D_k and is ``inf`` when the series diverges.
    """
    cfg = result.config
    Zk = K.Z(cfg.k)
    ws = [norm(W, cfg.rho_at(r)) for r, W in enumerate(result.Ws)]
    expo = sum(Zk * w / cfg.delta_at(r) ** 2 for r, w in enumerate(ws))
    emp = Zk * sum(ws) * math.exp(2 * expo)
    freq = result.B_infty.space.freq
    rep = K.constants(freq, cfg.k, cfg.alpha, cfg.eta, cfg.C, norm_V=result.initial_norm, K=cfg.brjuno_K)
    M1 = freq.small_divisor_bound(1.0)
    Dk = rep.D_k
    if Dk >= 1:
        formula = math.inf
    else:
        A = tail_estimate(freq, cfg, result.initial_norm, 1)
        Bsum = Zk / cfg.alpha ** 2 * M1 * result.initial_norm
        for j in range(1, 64):
            Bsum += Zk * 2 ** j * freq.small_divisor_bound(2.0 ** min(j, 10)) / (
                cfg.alpha ** 2 * (1 - cfg.eta + cfg.C / j)) * Dk ** (2 ** j)
        formula = Zk * (M1 * result.initial_norm + A) * math.exp(2 * Bsum)
    return emp / delta ** 2 * X_bar, formula / delta ** 2 * X_bar


def decay_fit(records):
    """Least-squares line of log ||V_r|| against 2^r.

    Uses ``norm_V`` of every record plus the final measured norm, skipping
    zeros. Returns ``None`` with fewer than two usable points.
    """
    pts = [(2.0 ** rec.r, rec.norm_V) for rec in records]
    if records:
        pts.append((2.0 ** (records[-1].r + 1), records[-1].measured_next))
    pts = [(x, math.log(y)) for x, y in pts if y > 0]
    if len(pts) < 2:
        return None
    x, y = np.array(pts).T
    slope, intercept = np.polyfit(x, y, 1)
    fit = slope * x + intercept
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum((y - fit) ** 2)) / ss if ss > 0 else 1.0
    return {"slope": float(slope), "intercept": float(intercept), "r2": r2, "points": len(pts)}

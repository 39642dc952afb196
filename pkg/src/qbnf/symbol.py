"""Finite-atom symbols and their Weyl calculus on the torus.

A symbol is a finite sum of atoms ``c exp(i<p, omega.xi> + i<q, x>)`` where
``p = pidx @ gens`` lives on a fixed additive lattice spanned by generator
vectors in R^m and ``q`` is a lattice point in Z^l. Products and brackets
are exact on this class: the Weyl product of two atoms is again an atom.
"""

from dataclasses import dataclass
import math

import numpy as np

from . import kernels
from .errors import AtomBudgetError, GeneratorMismatch, LieDivergenceError
from .freq import FrequencyMatrix

_CODE_LIMIT = 1 << 62


@dataclass(frozen=True)
class NormParams:
    """Width ``rho`` and weight ``underomega`` of the norm sum |c| e^{rho(uw|p| + |q|)}."""

    rho: float
    underomega: float

    def __post_init__(self):
        if not self.rho > 0:
            raise ValueError("rho must be positive")


class SymbolSpace:
    """Shared context of a computation: frequencies, p-generators, pruning knobs.

    Parameters
    ----------
    freq : FrequencyMatrix
    gens : array_like, shape (s, m)
        Generator vectors; an atom's real ``p`` is ``pidx @ gens``.
    prune_tol : float
        Atoms smaller than ``prune_tol`` times the reference scale of an
        operation are dropped.
    atom_budget : int
        Maximum atom count of any symbol.
    pair_budget : int
        Maximum number of atom pairs visited by one product.
    """

    def __init__(self, freq, gens=(), prune_tol=1e-16, atom_budget=2_000_000,
                 pair_budget=60_000_000):
        if not isinstance(freq, FrequencyMatrix):
            freq = FrequencyMatrix(freq)
        g = np.array(gens, dtype=float).reshape(-1, freq.m)
        if len({tuple(row) for row in g.tolist()}) != len(g):
            raise ValueError("generators must be distinct")
        g.setflags(write=False)
        self.freq = freq
        self.gens = g
        self.s = g.shape[0]
        self.m = freq.m
        self.l = freq.l
        self.gens_omega = g @ freq.omega
        self.prune_tol = float(prune_tol)
        self.atom_budget = int(atom_budget)
        self.pair_budget = int(pair_budget)

    @property
    def omega(self):
        return self.freq.omega

    @property
    def underomega(self):
        return self.freq.underomega

    def same_as(self, other):
        return self is other or (self.freq == other.freq and np.array_equal(self.gens, other.gens))

    def check(self, other):
        if not self.same_as(other):
            raise GeneratorMismatch("symbols live over different generators or frequencies")

    def norm_params(self, rho):
        return NormParams(rho, self.underomega)

    def zero(self):
        return Symbol._raw(self, np.zeros((0, self.s), np.int64), np.zeros((0, self.l), np.int64),
                           np.zeros(0, complex))

    def constant(self, c):
        return Symbol(self, np.zeros((1, self.s), np.int64), np.zeros((1, self.l), np.int64), [c])

    def from_atoms(self, atoms):
        """Build a symbol from ``(pidx, q, coeff)`` triples; repeated keys add up."""
        atoms = list(atoms)
        if not atoms:
            return self.zero()
        pidx = np.array([a[0] for a in atoms], dtype=np.int64).reshape(-1, self.s)
        q = np.array([a[1] for a in atoms], dtype=np.int64).reshape(-1, self.l)
        c = np.array([a[2] for a in atoms], dtype=complex)
        return Symbol(self, pidx, q, c)

    def zero_vector(self):
        return VectorSymbol([self.zero() for _ in range(self.m)])


def _strides(radix):
    strides = [1] * len(radix)
    total = 1
    for d in range(len(radix) - 1, -1, -1):
        strides[d] = total
        total *= int(radix[d])
    return np.array(strides, dtype=np.int64), total


def _merge(keys, c):
    """Sum coefficients of equal keys; output sorted lexicographically."""
    n, D = keys.shape
    if n == 0:
        return keys, c
    lo = keys.min(axis=0)
    radix = keys.max(axis=0) - lo + 1
    strides, total = _strides(radix)
    if total < _CODE_LIMIT:
        codes = (keys - lo) @ strides
        uniq, inv = np.unique(codes, return_inverse=True)
        out_keys = (uniq[:, None] // strides[None, :]) % radix[None, :] + lo[None, :]
    else:
        out_keys, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        uniq = out_keys
    re = np.bincount(inv, weights=c.real, minlength=len(uniq))
    im = np.bincount(inv, weights=c.imag, minlength=len(uniq))
    return out_keys.astype(np.int64), re + 1j * im


class Symbol:
    """Immutable finite atom set over a :class:`SymbolSpace`.

    Arrays ``pidx`` (n, s), ``q`` (n, l) and ``c`` (n,) are kept sorted by
    key and free of duplicates.
    """

    def __init__(self, space, pidx, q, c, ref_scale=None):
        pidx = np.asarray(pidx, dtype=np.int64).reshape(-1, space.s)
        q = np.asarray(q, dtype=np.int64).reshape(-1, space.l)
        c = np.asarray(c, dtype=complex).reshape(-1)
        if not (len(pidx) == len(q) == len(c)):
            raise ValueError("pidx, q and c must have the same length")
        keys, c = _merge(np.hstack([pidx, q]), c)
        self._set(space, keys[:, :space.s], keys[:, space.s:], c, ref_scale)

    @classmethod
    def _raw(cls, space, pidx, q, c, ref_scale=None):
        obj = cls.__new__(cls)
        obj._set(space, pidx, q, c, ref_scale)
        return obj

    def _set(self, space, pidx, q, c, ref_scale):
        if len(c):
            scale = np.abs(c).max() if ref_scale is None else ref_scale
            keep = (c != 0) & (np.abs(c) >= space.prune_tol * scale)
            if not keep.all():
                pidx, q, c = pidx[keep], q[keep], c[keep]
        if len(c) > space.atom_budget:
            raise AtomBudgetError(f"{len(c)} atoms exceed budget {space.atom_budget}")
        self.space = space
        self.pidx = np.ascontiguousarray(pidx, dtype=np.int64)
        self.q = np.ascontiguousarray(q, dtype=np.int64)
        self.c = np.ascontiguousarray(c, dtype=complex)
        for arr in (self.pidx, self.q, self.c):
            arr.setflags(write=False)
        self._cache = {}

    # derived per-atom data

    def __len__(self):
        return len(self.c)

    @property
    def keys(self):
        return np.hstack([self.pidx, self.q])

    @property
    def p(self):
        """Real p-vectors, shape (n, m)."""
        if "p" not in self._cache:
            self._cache["p"] = self.pidx @ self.space.gens if self.space.s else np.zeros((len(self), self.space.m))
        return self._cache["p"]

    @property
    def a(self):
        """The vectors ``p . omega`` in R^l, shape (n, l)."""
        if "a" not in self._cache:
            a = self.pidx @ self.space.gens_omega if self.space.s else np.zeros((len(self), self.space.l))
            self._cache["a"] = np.ascontiguousarray(a, dtype=float)
        return self._cache["a"]

    @property
    def qf(self):
        if "qf" not in self._cache:
            self._cache["qf"] = np.ascontiguousarray(self.q, dtype=float)
        return self._cache["qf"]

    @property
    def pnorm(self):
        if "pn" not in self._cache:
            self._cache["pn"] = np.linalg.norm(self.p, axis=1)
        return self._cache["pn"]

    @property
    def qnorm(self):
        if "qn" not in self._cache:
            self._cache["qn"] = np.linalg.norm(self.qf, axis=1)
        return self._cache["qn"]

    def weights(self, rho):
        return np.exp(rho * (self.space.underomega * self.pnorm + self.qnorm))

    def max_abs(self):
        return float(np.abs(self.c).max()) if len(self) else 0.0

    def is_zero(self):
        return len(self) == 0

    def atoms(self):
        """Iterate over ``(pidx tuple, q tuple, coeff)``."""
        for i in range(len(self)):
            yield tuple(int(x) for x in self.pidx[i]), tuple(int(x) for x in self.q[i]), complex(self.c[i])

    def to_dict(self):
        return {(pi, qi): ci for pi, qi, ci in self.atoms()}

    def coeff(self, pidx, q):
        """Coefficient at a key, 0 if absent."""
        mask = np.all(self.pidx == np.asarray(pidx), axis=1) & np.all(self.q == np.asarray(q), axis=1)
        idx = np.flatnonzero(mask)
        return complex(self.c[idx[0]]) if len(idx) else 0j

    def __repr__(self):
        return f"Symbol({len(self)} atoms, max|c|={self.max_abs():.3g})"

    # arithmetic sugar

    def __add__(self, other):
        return lincomb([1.0, 1.0], [self, other])

    def __sub__(self, other):
        return lincomb([1.0, -1.0], [self, other])

    def __neg__(self):
        return Symbol._raw(self.space, self.pidx, self.q, -self.c)

    def __mul__(self, k):
        if isinstance(k, (Symbol, VectorSymbol)):
            return NotImplemented
        return self.scale(k)

    __rmul__ = __mul__

    def scale(self, k):
        if k == 0:
            return self.space.zero()
        return Symbol._raw(self.space, self.pidx, self.q, self.c * k)

    def select(self, mask):
        return Symbol._raw(self.space, self.pidx[mask], self.q[mask], self.c[mask])

    def with_coeffs(self, c):
        """Same keys, new coefficients (zeros pruned)."""
        c = np.asarray(c, dtype=complex)
        keep = c != 0
        return Symbol._raw(self.space, self.pidx[keep], self.q[keep], c[keep], ref_scale=0.0)

    def adjoint(self):
        """Symbol of the operator adjoint: (p, q, c) -> (-p, -q, conj c)."""
        return Symbol(self.space, -self.pidx, -self.q, np.conj(self.c))


class VectorSymbol:
    """An m-tuple of symbols over one space."""

    def __init__(self, comps):
        comps = tuple(comps)
        if not comps:
            raise ValueError("VectorSymbol needs at least one component")
        for s in comps[1:]:
            comps[0].space.check(s.space)
        self.comps = comps

    @property
    def space(self):
        return self.comps[0].space

    def __len__(self):
        return len(self.comps)

    def __iter__(self):
        return iter(self.comps)

    def __getitem__(self, i):
        return self.comps[i]

    def __repr__(self):
        return f"VectorSymbol({[len(c) for c in self.comps]} atoms)"

    def map(self, fn):
        return VectorSymbol([fn(c) for c in self.comps])

    def __add__(self, other):
        return VectorSymbol([a + b for a, b in zip(self.comps, other.comps)])

    def __sub__(self, other):
        return VectorSymbol([a - b for a, b in zip(self.comps, other.comps)])

    def __neg__(self):
        return self.map(lambda s: -s)

    def __mul__(self, k):
        return self.map(lambda s: s.scale(k))

    __rmul__ = __mul__

    def atom_count(self):
        return sum(len(c) for c in self.comps)

    def is_zero(self):
        return all(c.is_zero() for c in self.comps)

    def max_abs(self):
        return max(c.max_abs() for c in self.comps)


# linear algebra

def lincomb(coeffs, symbols):
    """Atomwise linear combination.

    Pruning is relative to the largest input contribution so that exact
    cancellations leave no rounding debris.
    """
    if len(coeffs) != len(symbols):
        raise ValueError("coeffs and symbols differ in length")
    if not symbols:
        raise ValueError("empty combination")
    space = symbols[0].space
    for s in symbols[1:]:
        space.check(s.space)
    parts = [(k, s) for k, s in zip(coeffs, symbols) if k != 0 and len(s)]
    if not parts:
        return space.zero()
    if len(parts) == 1:
        k, s = parts[0]
        return s if k == 1 else s.scale(k)
    ref = max(abs(k) * s.max_abs() for k, s in parts)
    keys = np.vstack([s.keys for _, s in parts])
    c = np.concatenate([k * s.c for k, s in parts])
    keys, c = _merge(keys, c)
    return Symbol._raw(space, keys[:, :space.s], keys[:, space.s:], c, ref_scale=ref)


def vlincomb(coeffs, vectors):
    return VectorSymbol([lincomb(coeffs, [v[i] for v in vectors]) for i in range(len(vectors[0]))])


def _row_norms(x):
    return np.linalg.norm(x, axis=1) if len(x) else np.zeros(0)


def _combine(F, G, hbar, mode):
    F.space.check(G.space)
    space = F.space
    if len(F) == 0 or len(G) == 0:
        return space.zero()
    if len(F) * len(G) > space.pair_budget:
        raise AtomBudgetError(f"{len(F)} x {len(G)} atom pairs exceed budget {space.pair_budget}")
    ref = F.max_abs() * G.max_abs()
    if mode == kernels.BRACKET:
        ref *= (_row_norms(F.a).max() * G.qnorm.max() + F.qnorm.max() * _row_norms(G.a).max())
        if ref == 0:
            return space.zero()
    kF, kG = F.keys, G.keys
    loF, loG = kF.min(axis=0), kG.min(axis=0)
    lo = loF + loG
    radix = kF.max(axis=0) + kG.max(axis=0) - lo + 1
    strides, total = _strides(radix)
    if total < _CODE_LIMIT:
        codeF = np.ascontiguousarray((kF - loF) @ strides)
        codeG = np.ascontiguousarray((kG - loG) @ strides)
        codes, vals = kernels.combine(codeF, F.a, F.qf, F.c, codeG, G.a, G.qf, G.c, float(hbar), mode)
        keys = (codes[:, None] // strides[None, :]) % radix[None, :] + lo[None, :]
    else:
        theta = F.a @ G.qf.T - F.qf @ G.a.T
        vals = (F.c[:, None] * G.c[None, :]) * kernels.pair_factor(theta, hbar, mode)
        keys = (kF[:, None, :] + kG[None, :, :]).reshape(-1, kF.shape[1])
        keys, vals = _merge(keys, vals.ravel())
    return Symbol._raw(space, keys[:, :space.s], keys[:, space.s:], vals, ref_scale=ref)


def op_product(F, G, hbar):
    """Weyl symbol of the operator product FG."""
    return _combine(F, G, hbar, kernels.PRODUCT)


def bracket(F, G, hbar):
    """Symbol of [F, G]/(i hbar); the Poisson bracket at hbar = 0."""
    return _combine(F, G, hbar, kernels.BRACKET)


def midpoint_multiply(F, G, hbar):
    """Multiply matrix elements of G by the mean of F over the segment between their row and column.

    ``F`` must be supported on ``q = 0``. For a matrix element with row
    ``i`` and column ``j`` the factor is the integral over ``t`` in [0, 1]
    of ``F(hbar omega.(t i + (1-t) j))``.
    """
    if len(F) and np.any(F.q):
        raise ValueError("midpoint_multiply needs a q = 0 multiplier")
    return _combine(F, G, hbar, kernels.MEAN)


def linear_bracket(W, v):
    """Symbol of [L_v, W]/(i hbar) where L_v = -i hbar v.grad_x.

    ``v`` is a vector in R^l; the result is exact and independent of hbar.
    """
    v = np.asarray(v, dtype=float)
    return W.with_coeffs(-1j * (W.qf @ v) * W.c)


# norms and bounds

def norm(F, rho):
    """Weighted l1 norm; for a VectorSymbol the component norms add up."""
    r = rho.rho if isinstance(rho, NormParams) else float(rho)
    if isinstance(F, VectorSymbol):
        return float(sum(norm(c, r) for c in F.comps))
    if len(F) == 0:
        return 0.0
    return float(np.sum(np.abs(F.c) * F.weights(r)))


def bracket_bound(F, G, rho):
    """Cheap upper bound of ``norm(bracket(F, G), rho)`` for any hbar."""
    if len(F) == 0 or len(G) == 0:
        return 0.0
    wF = np.abs(F.c) * F.weights(rho)
    wG = np.abs(G.c) * G.weights(rho)
    aF, aG = _row_norms(F.a), _row_norms(G.a)
    return float(np.dot(wF, aF) * np.dot(wG, G.qnorm) + np.dot(wF, F.qnorm) * np.dot(wG, aG))


def grad_norm(G, rho):
    """Matrix norm sup_i sum_j ||d_i G_j|| of the gradient of a vector symbol."""
    comps = G.comps if isinstance(G, VectorSymbol) else (G,)
    m = comps[0].space.m
    best = 0.0
    for i in range(m):
        tot = 0.0
        for Gj in comps:
            if len(Gj):
                tot += float(np.sum(np.abs(Gj.p[:, i] * Gj.c) * Gj.weights(rho)))
        best = max(best, tot)
    return best


# restrictions and derivatives

def average(F):
    """Restriction to q = 0 atoms (the x-average)."""
    if isinstance(F, VectorSymbol):
        return F.map(average)
    return F.select(~np.any(F.q, axis=1))


def off_average(F):
    if isinstance(F, VectorSymbol):
        return F.map(off_average)
    return F.select(np.any(F.q, axis=1))


def split_cutoff(F, M):
    """Split into ``|q| <= M`` (q = 0 included) and ``|q| > M``, Euclidean norm."""
    if isinstance(F, VectorSymbol):
        pairs = [split_cutoff(c, M) for c in F.comps]
        return VectorSymbol([p[0] for p in pairs]), VectorSymbol([p[1] for p in pairs])
    n2 = np.einsum("ij,ij->i", F.q, F.q)
    inside = n2 <= M * M + 1e-9
    return F.select(inside), F.select(~inside)


def grad_xi(F):
    """Gradient with respect to Xi = omega.xi; component j multiplies by i p_j."""
    return VectorSymbol([F.with_coeffs(1j * F.p[:, j] * F.c) for j in range(F.space.m)])


def matrix_element(F, row, col, hbar):
    """<e_row, Op(F) e_col>."""
    row = np.asarray(row)
    col = np.asarray(col)
    mask = np.all(F.q == (row - col), axis=1)
    if not mask.any():
        return 0j
    phase = F.a[mask] @ ((row + col) * (0.5 * hbar))
    return complex(np.sum(F.c[mask] * np.exp(1j * phase)))


def evaluate_q0(F, Y):
    """Evaluate a q = 0 symbol as a function of Y in R^m (Y may be (n, m))."""
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    mask = ~np.any(F.q, axis=1)
    if not mask.any():
        return np.zeros(len(Y), complex)
    return np.exp(1j * (Y @ F.p[mask].T)) @ F.c[mask]


def is_hermitian(F, tol=1e-14):
    """Check c(-p, -q) = conj c(p, q) within ``tol`` relative to max |c|."""
    if len(F) == 0:
        return True
    adj = F.adjoint()
    if len(adj) != len(F) or not np.array_equal(adj.keys, F.keys):
        return False
    return bool(np.abs(adj.c - F.c).max() <= tol * F.max_abs())


def hermitian_part(F):
    """(F + F*)/2."""
    return lincomb([0.5, 0.5], [F, F.adjoint()])


# Lie series

@dataclass
class LieInfo:
    terms: int
    last_norm: float
    heuristic: float | None = None


def lie_terms(X, W, hbar, lie_tol, rho, linear=None, j_max=64):
    """Terms ``T_j = ad_W^j(X)/j!`` with ``ad_W(Y) = [Y, W]/(i hbar)``.

    ``linear`` is a vector ``v`` in R^l when ``X`` also contains the
    unbounded part ``L_v``; its bracket enters ``T_1`` exactly. The series
    stops at the first term whose norm at ``rho`` is at most ``lie_tol``;
    a rigorous a-priori bound is used to skip terms known to be that small.
    """
    terms = [X]
    if len(W) == 0:
        return terms
    cur = X
    for j in range(1, j_max + 1):
        lin = linear_bracket(W, linear) if (j == 1 and linear is not None) else None
        bound = bracket_bound(cur, W, rho) / j
        if lin is not None:
            bound += norm(lin, rho)
        if bound <= lie_tol:
            return terms
        nxt = bracket(cur, W, hbar)
        if lin is not None:
            nxt = nxt + lin
        nxt = nxt.scale(1.0 / j)
        terms.append(nxt)
        cur = nxt
        if norm(nxt, rho) <= lie_tol:
            return terms
    raise LieDivergenceError(f"Lie series above {lie_tol:g} after {j_max} terms")


def lie_conjugate(X, W, hbar, lie_tol=1e-15, rho=1.0, linear=None, j_max=64):
    """Symbol of ``exp(iW/hbar) X exp(-iW/hbar)`` as a Lie series.

    For a :class:`VectorSymbol` with ``linear=True`` component ``a`` is
    understood to carry ``L_{omega_a}``; the returned symbol omits that
    unchanged unbounded part. For a scalar symbol ``linear`` may be a
    vector in R^l. At hbar = 0 this is composition with the flow of W.
    """
    r = rho.rho if isinstance(rho, NormParams) else float(rho)
    if isinstance(X, VectorSymbol):
        om = X.space.omega
        return VectorSymbol([
            lie_conjugate(Xa, W, hbar, lie_tol, r, om[a] if linear else None, j_max)
            for a, Xa in enumerate(X.comps)])
    terms = lie_terms(X, W, hbar, lie_tol, r, linear, j_max)
    return lincomb([1.0] * len(terms), terms)


def lie_heuristic(W, rho, delta, Z0=2.0):
    """Z_0 ||W|| / delta^2, the convergence indicator of a Lie series."""
    return Z0 * norm(W, rho) / delta ** 2


# serialization

def _header(space):
    return {"omega": space.omega.tolist(), "gens": space.gens.tolist()}


def _atoms_json(F):
    return [{"p_idx": [int(x) for x in F.pidx[i]], "q": [int(x) for x in F.q[i]],
             "re": float(F.c[i].real), "im": float(F.c[i].imag)} for i in range(len(F))]


def symbol_to_json(F):
    """JSON-ready dict: header with omega and generators, plus atom records."""
    if isinstance(F, VectorSymbol):
        return {"header": _header(F.space), "components": [_atoms_json(c) for c in F.comps]}
    return {"header": _header(F.space), "atoms": _atoms_json(F)}


def space_from_header(header, **kw):
    freq = FrequencyMatrix(header["omega"])
    return SymbolSpace(freq, np.array(header["gens"], dtype=float).reshape(-1, freq.m), **kw)


def _atoms_from_json(space, records):
    if not records:
        return space.zero()
    pidx = np.array([r["p_idx"] for r in records], dtype=np.int64).reshape(-1, space.s)
    q = np.array([r["q"] for r in records], dtype=np.int64).reshape(-1, space.l)
    c = np.array([complex(r["re"], r["im"]) for r in records])
    return Symbol(space, pidx, q, c, ref_scale=0.0)


def symbol_from_json(obj, space=None):
    """Inverse of :func:`symbol_to_json`. A given ``space`` must match the header."""
    hdr = obj["header"]
    if space is None:
        space = space_from_header(hdr)
    elif not (np.array_equal(space.omega, np.array(hdr["omega"], dtype=float))
              and np.array_equal(space.gens, np.array(hdr["gens"], dtype=float).reshape(-1, space.m))):
        raise GeneratorMismatch("serialized header does not match the given space")
    if "components" in obj:
        return VectorSymbol([_atoms_from_json(space, recs) for recs in obj["components"]])
    return _atoms_from_json(space, obj["atoms"])

"""Brute-force truncated matrices on the basis {e_n : |n|_inf <= N}.

Everything here works on dense numpy arrays and is independent of the
symbol calculus except for reading atoms, so it serves as the verifier for
symbol-level identities.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvariantViolation
from .symbol import Symbol, VectorSymbol

DEFAULT_DIM_BUDGET = 6000


def lattice_box(N, l):
    """All n with |n|_inf <= N, lexicographic order, shape ((2N+1)^l, l)."""
    axes = [np.arange(-N, N + 1, dtype=np.int64)] * l
    return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, l)


def box_index(n, N):
    """Position of lattice points in :func:`lattice_box` order."""
    n = np.asarray(n)
    l = n.shape[-1]
    side = 2 * N + 1
    strides = side ** np.arange(l - 1, -1, -1)
    return (n + N) @ strides


@dataclass
class TruncatedOperator:
    N: int
    hbar: float
    entries: np.ndarray
    basis: np.ndarray = field(repr=False)

    @property
    def dim(self):
        return self.entries.shape[0]

    def interior(self, radius):
        """Boolean mask of basis states with |n|_inf <= radius."""
        return np.abs(self.basis).max(axis=1) <= radius


def to_matrix(F, N, hbar, linear=None, dim_budget=DEFAULT_DIM_BUDGET):
    """Dense matrix of Op(F) (+ L_v when ``linear`` = v in R^l is given).

    ``F`` may be ``None`` for the linear part alone.
    """
    if F is None and linear is None:
        raise ValueError("nothing to assemble")
    l = F.space.l if F is not None else len(linear)
    basis = lattice_box(N, l)
    dim = len(basis)
    if dim > dim_budget:
        raise ValueError(f"dimension {dim} exceeds budget {dim_budget}")
    A = np.zeros((dim, dim), dtype=complex)
    if linear is not None:
        A[np.arange(dim), np.arange(dim)] += hbar * (basis @ np.asarray(linear, dtype=float))
    if F is not None and len(F):
        qs, inv = np.unique(F.q, axis=0, return_inverse=True)
        inv = inv.ravel()
        for k, q in enumerate(qs):
            rows_n = basis + q
            ok = np.abs(rows_n).max(axis=1) <= N
            if not ok.any():
                continue
            cols = np.flatnonzero(ok)
            rows = box_index(rows_n[ok], N)
            mid = (2 * basis[ok] + q) * (0.5 * hbar)
            sel = inv == k
            vals = np.exp(1j * (mid @ F.a[sel].T)) @ F.c[sel]
            A[rows, cols] += vals
    return TruncatedOperator(N, hbar, A, basis)


def vector_matrices(V, N, hbar, with_linear=True):
    """Matrices of L_{omega_a} + V_a for each component."""
    om = V.space.omega
    return [to_matrix(Va, N, hbar, om[a] if with_linear else None) for a, Va in enumerate(V.comps)]


def q0_matrix(B, N, hbar, linear=None):
    """Diagonal matrix of a q = 0 symbol, evaluated exactly at hbar omega.n."""
    return to_matrix(B, N, hbar, linear)


def dense_unitary(W, N, hbar):
    """exp(iW/hbar) for a hermitian symbol W, via eigendecomposition."""
    if hbar == 0:
        raise ValueError("dense conjugation needs hbar > 0")
    Wm = to_matrix(W, N, hbar).entries
    Wm = 0.5 * (Wm + Wm.conj().T)
    lam, Q = np.linalg.eigh(Wm)
    return (Q * np.exp(1j * lam / hbar)) @ Q.conj().T


# eigensolvers

def jacobi_eigh(A, tol=1e-14, max_sweeps=60):
    """Cyclic Jacobi eigensolver for a hermitian matrix.

    Returns ascending eigenvalues and orthonormal eigenvectors as columns.
    Each 2 x 2 pivot is first made real by a diagonal phase and then
    annihilated by a plane rotation.
    """
    A = np.array(A, dtype=complex)
    n = A.shape[0]
    V = np.eye(n, dtype=complex)
    offdiag = ~np.eye(n, dtype=bool)
    scale = max(np.abs(A).max(), np.finfo(float).tiny)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.abs(A[offdiag]) ** 2))
        if off <= tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                b = abs(A[p, q])
                if b <= 1e-300:
                    continue
                phase = A[p, q] / b
                theta = 0.5 * np.arctan2(2 * b, (A[q, q] - A[p, p]).real)
                c, s = np.cos(theta), np.sin(theta)
                R = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                A[:, idx] = A[:, idx] @ R
                A[idx, :] = R.conj().T @ A[idx, :]
                V[:, idx] = V[:, idx] @ R
                A[p, q] = A[q, p] = 0.0
    else:
        raise InvariantViolation("Jacobi sweeps did not converge")
    w = np.diag(A).real
    order = np.argsort(w, kind="stable")
    return w[order], V[:, order]


def hermitian_eigs(op, method="lapack", herm_tol=1e-13):
    """Ascending eigenvalues and orthonormal eigenvectors of a hermitian matrix.

    ``method`` is ``"lapack"`` (numpy's eigh) or ``"jacobi"``. Both satisfy
    the residual contract ||Av - lambda v|| <= 1e-10 ||A||.
    """
    A = op.entries if isinstance(op, TruncatedOperator) else np.asarray(op)
    scale = max(np.abs(A).max(), 1.0)
    if np.abs(A - A.conj().T).max() > herm_tol * scale:
        raise ValueError("matrix is not hermitian within tolerance")
    Ah = 0.5 * (A + A.conj().T)
    if method == "lapack":
        w, V = np.linalg.eigh(Ah)
        order = np.argsort(w, kind="stable")
        return w[order], V[:, order]
    if method == "jacobi":
        return jacobi_eigh(Ah)
    raise ValueError(f"unknown method {method!r}")


# spectra

@dataclass
class SpectrumPair:
    n: tuple
    predicted: list
    measured: list
    overlap: float
    residual: float


@dataclass
class SpectrumReport:
    pairs: list
    interior_max_err: float
    boundary_excluded: int
    ambiguous: int
    interior_radius: int
    min_interior_overlap: float

    def to_dict(self):
        return {
            "interior_max_err": float(self.interior_max_err),
            "boundary_excluded": int(self.boundary_excluded),
            "ambiguous": int(self.ambiguous),
            "interior_radius": int(self.interior_radius),
            "min_interior_overlap": float(self.min_interior_overlap),
            "pairs": [{"n": list(p.n), "predicted": [float(x) for x in p.predicted],
                       "measured": [float(x) for x in p.measured],
                       "overlap": float(p.overlap), "residual": float(p.residual)}
                      for p in self.pairs],
        }


def predicted_eigenvalues(B_infty, n, hbar):
    """hbar <omega_i, n> + B_i(hbar omega.n) for lattice points n, shape (len(n), m)."""
    space = B_infty.space
    n = np.atleast_2d(n)
    Y = hbar * (n @ space.omega.T)
    out = np.empty((len(n), space.m))
    for i, Bi in enumerate(B_infty.comps):
        vals = Y[:, i].astype(complex)
        mask = ~np.any(Bi.q, axis=1)
        if mask.any():
            vals = vals + np.exp(1j * (Y @ Bi.p[mask].T)) @ Bi.c[mask]
        scale = max(1.0, np.abs(vals).max())
        if np.abs(vals.imag).max() > 1e-12 * scale:
            raise InvariantViolation("predicted eigenvalues have an imaginary part")
        out[:, i] = vals.real
    return out


def spectrum_compare(V, B_infty, N, hbar, interior_radius=None, strict=False, method="lapack"):
    """Match eigenpairs of L_omega + V against KAM predictions.

    The components are diagonalized jointly through a generic linear
    combination; each eigenvector is labelled by the basis state of largest
    overlap and every H_i is read off as a Rayleigh quotient.
    """
    if hbar <= 0:
        raise ValueError("spectra need hbar > 0")
    mats = [op.entries for op in vector_matrices(V, N, hbar)]
    m = len(mats)
    weights = np.array([1.0 / (1.0 + np.sqrt(2.0) * i + 0.3 * i * i) for i in range(m)])
    K = sum(w * A for w, A in zip(weights, mats))
    lam, vecs = hermitian_eigs(K, method=method)
    basis = lattice_box(N, V.space.l)
    if interior_radius is None:
        interior_radius = N // 2
    prob = np.abs(vecs) ** 2
    labels = np.argmax(prob, axis=0)
    overlaps = prob[labels, np.arange(len(lam))]
    measured = np.empty((len(lam), m))
    resid = np.zeros(len(lam))
    for i, A in enumerate(mats):
        AV = A @ vecs
        measured[:, i] = np.sum(vecs.conj() * AV, axis=0).real
        resid = np.maximum(resid, np.linalg.norm(AV - vecs * measured[:, i][None, :], axis=0))
    ns = basis[labels]
    pred = predicted_eigenvalues(B_infty, ns, hbar)
    inner = np.abs(ns).max(axis=1) <= interior_radius
    uniq, counts = np.unique(labels[inner], return_counts=True)
    ambiguous = int(np.sum(counts > 1))
    if strict and ambiguous:
        raise InvariantViolation(f"{ambiguous} lattice labels claimed by several eigenvectors")
    pairs = []
    for k in np.flatnonzero(inner):
        pairs.append(SpectrumPair(tuple(int(x) for x in ns[k]), pred[k].tolist(),
                                  measured[k].tolist(), float(overlaps[k]), float(resid[k])))
    err = float(np.abs(pred[inner] - measured[inner]).max()) if inner.any() else 0.0
    return SpectrumReport(pairs, err, int(np.sum(~inner)), ambiguous, int(interior_radius),
                          float(overlaps[inner].min()) if inner.any() else 1.0)


def commutation_check(V, N, hbar, interior_radius=None):
    """Largest 2-norm of [H_i, H_j] restricted to the interior block."""
    if len(V) < 2:
        return 0.0
    mats = vector_matrices(V, N, hbar)
    mask = mats[0].interior(N // 2 if interior_radius is None else interior_radius)
    worst = 0.0
    for i in range(len(mats)):
        for j in range(i + 1, len(mats)):
            A, B = mats[i].entries, mats[j].entries
            Cm = (A @ B - B @ A)[np.ix_(mask, mask)]
            worst = max(worst, float(np.linalg.norm(Cm, 2)))
    return worst


def conjugation_defect(X_matrix, W, X_next_matrix, N, hbar, interior_radius=None):
    """||U X U* - X_next||_2 on the interior block, U = exp(iW/hbar)."""
    U = dense_unitary(W, N, hbar)
    D = U @ X_matrix @ U.conj().T - X_next_matrix
    basis = lattice_box(N, W.space.l)
    mask = np.abs(basis).max(axis=1) <= (N // 2 if interior_radius is None else interior_radius)
    return float(np.linalg.norm(D[np.ix_(mask, mask)], 2))

"""Frequency matrices and small-divisor enumeration."""

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ResonanceError, ShellBudgetError

GOLDEN = (1.0 + math.sqrt(5.0)) / 2.0

DEFAULT_SHELL_BUDGET = 20_000_000


@dataclass
class SmallDivisorReport:
    """Tabulated small-divisor data for one frequency matrix.

    ``gamma`` and ``tau`` are only set when a Diophantine fit was requested;
    ``gamma`` is then an empirical lower bound of the true constant.
    """

    M_values: list
    brjuno_partial: list
    gamma: float | None = None
    tau: float | None = None
    no_small_divisors: bool = False

    def to_dict(self):
        return {
            "M_values": [[float(a), float(b)] for a, b in self.M_values],
            "brjuno_partial": [float(x) for x in self.brjuno_partial],
            "gamma": None if self.gamma is None else float(self.gamma),
            "gamma_is_lower_bound": self.gamma is not None,
            "tau": None if self.tau is None else float(self.tau),
            "no_small_divisors": bool(self.no_small_divisors),
        }


@dataclass
class _Shell:
    radius: float
    q: np.ndarray          # (n, l) int64, sorted by norm
    norm2: np.ndarray      # (n,) int64
    inv_div: np.ndarray    # (n,) min_i |<omega_i, q>|^{-1}
    running_max: np.ndarray = field(repr=False, default=None)


class FrequencyMatrix:
    """An m x l real matrix whose rows are the frequency vectors.

    Parameters
    ----------
    omega : array_like, shape (m, l)
    name : str, optional
        Label used in reports.
    shell_budget : int
        Maximum number of lattice points enumerated in one shell.
    """

    def __init__(self, omega, name=None, shell_budget=DEFAULT_SHELL_BUDGET):
        om = np.array(omega, dtype=float)
        if om.ndim == 1:
            om = om[None, :]
        if om.ndim != 2:
            raise ValueError("omega must be a 2-d array")
        m, l = om.shape
        if not 1 <= m <= l:
            raise ValueError(f"need 1 <= m <= l, got m={m}, l={l}")
        if not np.all(np.isfinite(om)):
            raise ValueError("omega has non-finite entries")
        sv = np.linalg.svd(om, compute_uv=False)
        if sv[-1] <= 1e-12 * max(sv[0], 1.0):
            raise ValueError("frequency rows are linearly dependent")
        om.setflags(write=False)
        self.omega = om
        self.m = m
        self.l = l
        self.name = name
        self.underomega = float(np.sum(np.linalg.norm(om, axis=1)))
        self.shell_budget = shell_budget
        self._shell = None
        self._cert = None

    def __repr__(self):
        label = f"{self.name!r}, " if self.name else ""
        return f"FrequencyMatrix({label}{self.omega.tolist()})"

    def __eq__(self, other):
        return isinstance(other, FrequencyMatrix) and np.array_equal(self.omega, other.omega)

    def __hash__(self):
        return hash(self.omega.tobytes())

    def scaled(self, lam):
        return FrequencyMatrix(lam * self.omega, shell_budget=self.shell_budget)

    def omega_dot(self, q):
        """Return ``(<omega_i, q>)_i``; ``q`` may be a single point or an (n, l) array."""
        q = np.asarray(q)
        if q.shape[-1] != self.l:
            raise ValueError(f"lattice point has {q.shape[-1]} entries, expected {self.l}")
        return q @ self.omega.T

    def best_index(self, q):
        """Index (0-based) of the row with the largest ``|<omega_i, q>|``; ties go to the smallest."""
        q = np.asarray(q)
        if not np.any(q):
            raise ValueError("best_index is undefined at q = 0")
        return int(np.argmax(np.abs(self.omega_dot(q))))

    def best_indices(self, q):
        """Vectorized ``best_index`` over the rows of an (n, l) integer array."""
        return np.argmax(np.abs(np.asarray(q) @ self.omega.T), axis=1)

    # shells

    def _enumerate(self, radius):
        R = int(math.floor(radius + 1e-9))
        side = 2 * R + 1
        if side ** self.l > self.shell_budget:
            raise ShellBudgetError(
                f"shell |q| <= {radius} needs {side ** self.l} points, budget {self.shell_budget}")
        axes = [np.arange(-R, R + 1, dtype=np.int64)] * self.l
        grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, self.l)
        n2 = np.einsum("ij,ij->i", grid, grid)
        keep = (n2 > 0) & (n2 <= radius * radius + 1e-9)
        grid, n2 = grid[keep], n2[keep]
        order = np.lexsort(tuple(grid[:, d] for d in range(self.l - 1, -1, -1)) + (n2,))
        grid, n2 = grid[order], n2[order]
        div = np.abs(grid @ self.omega.T).max(axis=1)
        with np.errstate(divide="ignore"):
            inv = np.where(div > 0, 1.0 / np.where(div > 0, div, 1.0), np.inf)
        sh = _Shell(radius, grid, n2, inv)
        sh.running_max = np.maximum.accumulate(inv) if len(inv) else inv
        return sh

    def shell(self, radius):
        """Lattice points with ``0 < |q| <= radius`` sorted by norm, and their inverse divisors."""
        if self._shell is None or self._shell.radius < radius:
            self._shell = self._enumerate(max(radius, 1.0))
        sh = self._shell
        n = int(np.searchsorted(sh.norm2, radius * radius + 1e-9, side="right"))
        return sh.q[:n], sh.norm2[:n], sh.inv_div[:n]

    def small_divisor_bound(self, M):
        """Largest inverse small divisor over the shell ``0 < |q| <= M``.

        Each lattice point uses its best row, ``min_i |<omega_i, q>|^{-1}``,
        which is the quantity that bounds the solution of the cohomological
        equation. Returns ``inf`` if the shell contains a common resonance.

        When ``Omega`` has full column rank, ``max_i |<omega_i, q>|`` is at
        least ``sigma_min |q| / sqrt(m)``, so points beyond
        :meth:`certified_radius` cannot raise the maximum and the shell is
        cut there.
        """
        if M < 1:
            raise ValueError("M must be >= 1")
        cert = self.certified_radius()
        if cert is not None:
            M = min(M, max(cert, 1.0))
        return self.small_divisor_bound_raw(M)

    def certified_radius(self):
        """Radius past which no divisor is smaller than the best one with ``|q| <= 1``.

        ``None`` unless ``Omega`` has full column rank.
        """
        if self._cert is None:
            sv = np.linalg.svd(self.omega, compute_uv=False)
            if self.m < self.l or sv[-1] <= 1e-12 * sv[0]:
                self._cert = (None,)
            else:
                d1 = 1.0 / self.small_divisor_bound_raw(1.0)
                # small slack so rounding cannot cut a tied point
                self._cert = (math.sqrt(self.m) * d1 / sv[-1] * (1 + 1e-9),)
        return self._cert[0]

    def small_divisor_bound_raw(self, M):
        """Shell maximum without the rank certificate."""
        self.shell(M)
        sh = self._shell
        n = int(np.searchsorted(sh.norm2, M * M + 1e-9, side="right"))
        return float(sh.running_max[n - 1])

    def small_divisor_profile(self, Ms):
        return [(float(M), self.small_divisor_bound(M)) for M in Ms]

    def brjuno_sum(self, K, absolute=False):
        """Partial sum ``sum_{k<=K} log(M_{2^k}) / 2^k`` and its last increment.

        With ``absolute=True`` the logarithms enter in absolute value, which
        is the variant used by the radius formulas.
        """
        if K < 0:
            raise ValueError("K must be >= 0")
        total = 0.0
        inc = 0.0
        for k in range(K + 1):
            val = math.log(self.small_divisor_bound(2.0 ** k))
            inc = (abs(val) if absolute else val) / 2.0 ** k
            total += inc
        return total, inc

    def brjuno_partials(self, K, absolute=False):
        out, total = [], 0.0
        for k in range(K + 1):
            val = math.log(self.small_divisor_bound(2.0 ** k))
            total += (abs(val) if absolute else val) / 2.0 ** k
            out.append(total)
        return out

    def diophantine_fit(self, tau, M_max):
        """Smallest gamma with ``min_i |<omega_i,q>|^{-1} <= gamma |q|^tau`` on the enumerated shell.

        This is only a lower bound for the true Diophantine constant.
        """
        q, n2, inv = self.shell(M_max)
        if np.isinf(inv).any():
            raise ResonanceError("common resonance in the enumerated shell")
        return float(np.max(inv / np.sqrt(n2.astype(float)) ** tau))

    def inverse_bound(self):
        """``l * |Omega^{-1}|`` for square matrices (operator 2-norm), else ``None``."""
        if self.m != self.l:
            return None
        return self.l * float(np.linalg.norm(np.linalg.inv(self.omega), 2))

    def report(self, K, tau=None, M_max=None):
        Ms = [2.0 ** k for k in range(K + 1)]
        rep = SmallDivisorReport(
            M_values=self.small_divisor_profile(Ms),
            brjuno_partial=self.brjuno_partials(K),
        )
        if tau is not None:
            rep.tau = float(tau)
            rep.gamma = self.diophantine_fit(tau, M_max or Ms[-1])
        rep.no_small_divisors = self.m == self.l
        return rep

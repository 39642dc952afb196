"""Ground-truth inputs: frequency presets and exactly commuting families.

A commuting family is produced by conjugating a known normal form
L_omega + B(L_omega) with exp(iW/hbar); the perturbation V_i is what remains
after subtracting L_{omega_i}. The spectrum of the result is known in advance.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import InvariantViolation
from .freq import GOLDEN, FrequencyMatrix
from .symbol import (
    SymbolSpace, Symbol, VectorSymbol, bracket, hermitian_part, lie_conjugate, linear_bracket,
    lincomb, norm, off_average,
)

_C1, _S1 = math.cos(1.0), math.sin(1.0)

PRESETS = {
    "golden_1x2": ([[1.0, GOLDEN]], "golden mean, (1, (1+sqrt 5)/2)"),
    "silver_1x2": ([[1.0, 1.0 + math.sqrt(2.0)]], "silver mean, (1, 1+sqrt 2)"),
    "cubic_1x3": ([[1.0, 2.0 ** (1 / 3), 2.0 ** (2 / 3)]], "cubic field basis (1, 2^(1/3), 2^(2/3))"),
    "identity_2x2": ([[1.0, 0.0], [0.0, 1.0]], "square, no small divisors"),
    "rot_2x2": ([[_C1, _S1], [-_S1, _C1]], "rotation by one radian, square"),
    "golden_2x2": ([[1.0, GOLDEN], [GOLDEN, -1.0]], "orthogonal golden rows, square"),
    "golden_pair_2x3": ([[1.0, GOLDEN, 0.0], [0.0, 1.0, GOLDEN]], "two golden rows in three angles"),
    "identity_3x3": ([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], "cube, no small divisors"),
}


def preset_names():
    return sorted(PRESETS)


def builtin_frequencies(name):
    """Preset frequency matrix by name; see :data:`PRESETS`."""
    try:
        rows, _ = PRESETS[name]
    except KeyError:
        raise ValueError(f"unknown frequency preset {name!r}; known: {', '.join(preset_names())}") from None
    return FrequencyMatrix(rows, name=name)


def preset_note(name):
    return PRESETS[name][1]


@dataclass
class FamilySpec:
    """Inputs of the conjugation construction.

    ``W_gen`` is a hermitian generator, ``B_gen`` the q = 0 normal form
    (linear part implicit). ``rho_gen`` is the width at which Lie series
    terms are measured and ``lie_tol`` the absolute cut-off.
    ``violate_commutation`` adds a non-commuting term of that size to the
    last component.
    """

    omega: FrequencyMatrix
    W_gen: Symbol
    B_gen: VectorSymbol
    hbar: float
    lie_tol: float = 1e-20
    rho_gen: float = 2.5
    violate_commutation: float = 0.0


def commutator_norm(V, hbar, rho):
    """Largest ||[L_i + V_i, L_j + V_j]/(i hbar)|| over pairs, at width rho."""
    om = V.space.omega
    worst = 0.0
    for i in range(len(V)):
        for j in range(i + 1, len(V)):
            c = lincomb([1.0, -1.0, 1.0], [
                linear_bracket(V[j], om[i]), linear_bracket(V[i], om[j]), bracket(V[i], V[j], hbar)])
            worst = max(worst, norm(c, rho))
    return worst


def violation_term(space, size):
    """A hermitian first-mode term that breaks commutation when added to one component."""
    q = np.zeros(space.l, dtype=np.int64)
    q[0] = 1
    p = np.zeros(space.s, dtype=np.int64)
    return hermitian_part(space.from_atoms([(p, q, 2.0 * size)]))


def generate_commuting_family(spec, check=True, comm_tol=1e-12):
    """Return ``(V, B_expected)`` with e^{iW/h}(L + B)e^{-iW/h} = L + V.

    ``B_expected`` equals ``B_gen``; adding hbar omega.n gives the exact
    spectrum. Raises :class:`InvariantViolation` if the components fail to
    commute to ``comm_tol`` relative to ``underomega ||V||`` (unless a
    violation was requested).
    """
    B = spec.B_gen
    V = lie_conjugate(B, spec.W_gen, spec.hbar, spec.lie_tol, spec.rho_gen, linear=True)
    if spec.violate_commutation:
        comps = list(V.comps)
        comps[-1] = comps[-1] + violation_term(V.space, spec.violate_commutation)
        V = VectorSymbol(comps)
    if check and len(V) > 1 and not spec.violate_commutation:
        scale = V.space.underomega * norm(V, spec.rho_gen)
        c = commutator_norm(V, spec.hbar, spec.rho_gen)
        if c > comm_tol * max(scale, 1e-300):
            raise InvariantViolation(f"generated family fails to commute: {c:.3e} vs scale {scale:.3e}")
    return V, B


def _hermitian(space, atoms):
    if not atoms:
        return space.zero()
    return hermitian_part(space.from_atoms(atoms))


def default_family(m=1, target_norm=1e-3, hbar=1.0, rho=2.0, with_B=True, b_fraction=0.3,
                   lie_tol=1e-22, violate_commutation=0.0, prune_tol=1e-16):
    """The reference test family on two angles with golden frequencies.

    ``m = 1`` uses ``golden_1x2``, ``m = 2`` uses ``golden_2x2``. The
    generator and the normal form are fixed trigonometric polynomials
    rescaled so that ``||V||_rho`` is close to ``target_norm``, with about
    ``b_fraction`` of it in the normal-form part.
    """
    if m == 1:
        freq = builtin_frequencies("golden_1x2")
        space = SymbolSpace(freq, [[0.5]], prune_tol=prune_tol)
        w_atoms = [((0,), (1, 0), 1.0), ((1,), (0, 1), 0.6), ((-1,), (1, -1), 0.3j)]
        b_atoms = [[((1,), (0, 0), 1.0), ((2,), (0, 0), 0.4j)]]
    elif m == 2:
        freq = builtin_frequencies("golden_2x2")
        space = SymbolSpace(freq, [[0.5, 0.0], [0.0, 0.5]], prune_tol=prune_tol)
        w_atoms = [((0, 0), (1, 0), 1.0), ((1, 0), (0, 1), 0.6), ((0, -1), (1, -1), 0.3j)]
        b_atoms = [[((1, 0), (0, 0), 1.0), ((1, 1), (0, 0), 0.3j)],
                   [((0, 1), (0, 0), 0.8), ((1, -1), (0, 0), 0.2)]]
    else:
        raise ValueError("default family is defined for m in {1, 2}")
    W_unit = _hermitian(space, w_atoms)
    B_unit = VectorSymbol([_hermitian(space, at) for at in b_atoms])
    b_target = b_fraction * target_norm if with_B else 0.0
    B = B_unit * (b_target / norm(B_unit, rho)) if with_B else space.zero_vector()
    # first-order size of the off-average part is linear in W
    first = sum(norm(linear_bracket(W_unit, row), rho) for row in freq.omega)
    w_scale = (target_norm - b_target) / first
    spec = FamilySpec(omega=freq, W_gen=W_unit * w_scale, B_gen=B, hbar=hbar, lie_tol=lie_tol * target_norm,
                      rho_gen=rho, violate_commutation=violate_commutation)
    return spec

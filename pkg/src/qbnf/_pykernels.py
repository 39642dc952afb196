"""Numpy implementation of the atom-pair kernels.

Used when the compiled extension is unavailable or when ``QBNF_KERNEL=python``
is set in the environment.
"""

import numpy as np

PRODUCT = 0
BRACKET = 1
MEAN = 2

_TAYLOR_CUT = 1e-4
_CHUNK_PAIRS = 1 << 21


def sinc(x):
    """sin(x)/x with a Taylor branch near zero."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < _TAYLOR_CUT
    xs = x[small]
    x2 = xs * xs
    out[small] = 1.0 - x2 / 6.0 + x2 * x2 / 120.0
    xb = x[~small]
    out[~small] = np.sin(xb) / xb
    return out


def pair_factor(theta, hbar, mode):
    """Complex factor multiplying c_F c_G for a pair with skew pairing theta."""
    if mode == PRODUCT:
        h = 0.5 * hbar * theta
        return np.cos(h) + 1j * np.sin(h)
    if mode == BRACKET:
        return theta * sinc(0.5 * hbar * theta)
    if mode == MEAN:
        return sinc(0.5 * hbar * theta).astype(complex)
    raise ValueError(f"unknown kernel mode {mode}")


def combine(codeF, aF, qF, cF, codeG, aG, qG, cG, hbar, mode):
    """Accumulate all atom pairs of F and G into merged output atoms.

    Parameters
    ----------
    codeF, codeG : int64 arrays
        Packed keys; the output key of a pair is ``codeF[i] + codeG[j]``.
    aF, aG : (n, l) float arrays
        The vectors ``p . omega`` of each atom.
    qF, qG : (n, l) float arrays
        Fourier modes of each atom.
    cF, cG : complex arrays
        Coefficients.
    hbar : float
    mode : int
        ``PRODUCT``, ``BRACKET`` or ``MEAN``.

    Returns
    -------
    codes : int64 array, sorted and unique
    coeffs : complex array
    """
    nF, nG = len(codeF), len(codeG)
    if nF == 0 or nG == 0:
        return np.empty(0, np.int64), np.empty(0, complex)
    rows = max(1, _CHUNK_PAIRS // nG)
    code_parts, val_parts = [], []
    for start in range(0, nF, rows):
        sl = slice(start, min(nF, start + rows))
        theta = aF[sl] @ qG.T - qF[sl] @ aG.T
        vals = (cF[sl, None] * cG[None, :]) * pair_factor(theta, hbar, mode)
        code_parts.append((codeF[sl, None] + codeG[None, :]).ravel())
        val_parts.append(vals.ravel())
    codes = np.concatenate(code_parts)
    vals = np.concatenate(val_parts)
    uniq, inv = np.unique(codes, return_inverse=True)
    re = np.bincount(inv, weights=vals.real, minlength=len(uniq))
    im = np.bincount(inv, weights=vals.imag, minlength=len(uniq))
    return uniq, re + 1j * im

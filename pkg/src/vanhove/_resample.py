"""Sparse-matrix resampling of grid fields at fixed sample points.

Semi-Lagrangian transport evaluates every field at the same backtraced
points step after step, so the interpolation is precompiled into a sparse
matrix once: cubic rows hold the 4x4 tensor B-spline taps in (q, p) within
one x-slice (x is never displaced), linear rows the 2x2 bilinear taps.
Cubic evaluation acts on spline-prefiltered coefficients, reproducing
scipy's interpolating B-spline; boundary taps clamp to the edge
coefficient.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage, sparse

__all__ = ["GridResampler"]


def _bspline3(t: np.ndarray) -> np.ndarray:
    """Cubic B-spline kernel, support |t| < 2."""
    at = np.abs(t)
    out = np.zeros_like(at)
    m1 = at < 1
    m2 = (at >= 1) & (at < 2)
    out[m1] = (4 - 6 * at[m1] ** 2 + 3 * at[m1] ** 3) / 6
    out[m2] = (2 - at[m2]) ** 3 / 6
    return out


def _linear_weight(t: np.ndarray) -> np.ndarray:
    return np.maximum(1.0 - np.abs(t), 0.0)


class GridResampler:
    """Evaluate fields at fixed fractional index coordinates (iq, ip).

    ``shape`` is the full field shape, (n_q, n_p) or (n_q, n_p, n_x); the
    coordinate arrays share it.  Points outside the grid evaluate to zero.
    """

    def __init__(self, shape: tuple[int, ...], iq: np.ndarray, ip: np.ndarray,
                 order: int = 3):
        if order not in (1, 3):
            raise ValueError("order must be 1 (linear) or 3 (cubic)")
        self.shape = shape
        self.order = order
        n_q, n_p = shape[0], shape[1]
        n_x = shape[2] if len(shape) == 3 else 1
        n_points = int(np.prod(shape))

        iq = np.broadcast_to(iq, shape).astype(float).ravel()
        ip = np.broadcast_to(ip, shape).astype(float).ravel()
        self.inside = ((iq >= 0) & (iq <= n_q - 1)
                       & (ip >= 0) & (ip <= n_p - 1)).reshape(shape)

        kern = _bspline3 if order == 3 else _linear_weight
        taps = range(-1, 3) if order == 3 else range(0, 2)
        base_q = np.floor(iq).astype(np.int64)
        base_p = np.floor(ip).astype(np.int64)
        fq = iq - base_q
        fp = ip - base_p
        ix = np.tile(np.arange(n_x, dtype=np.int64), n_q * n_p) \
            if len(shape) == 3 else np.zeros(n_points, np.int64)

        def mirror(idx, n):
            # Reflect out-of-range taps about the end nodes (period 2n - 2),
            # matching the prefilter's mirror boundary.
            idx = np.abs(idx)
            return np.where(idx > n - 1, 2 * (n - 1) - idx, idx)

        rows, cols, vals = [], [], []
        row_idx = np.arange(n_points, dtype=np.int64)
        for a in taps:
            wq = kern(fq - a)
            idx_q = mirror(base_q + a, n_q)
            for b in taps:
                w = wq * kern(fp - b)
                idx_p = mirror(base_p + b, n_p)
                col = (idx_q * n_p + idx_p) * n_x + ix
                rows.append(row_idx)
                cols.append(col)
                vals.append(w)
        matrix = sparse.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n_points, n_points))
        matrix = matrix.tocsr()
        matrix.sum_duplicates()
        self._matrix = matrix
        self._zero_outside = ~self.inside

    def _coefficients(self, values: np.ndarray) -> np.ndarray:
        if self.order == 1:
            return values
        def filt(v):
            c = ndimage.spline_filter1d(v, order=3, axis=0, mode="mirror")
            return ndimage.spline_filter1d(c, order=3, axis=1, mode="mirror")
        if np.iscomplexobj(values):
            return filt(values.real) + 1j * filt(values.imag)
        return filt(values)

    def __call__(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values)
        if values.shape != self.shape:
            raise ValueError(f"field shape {values.shape} != {self.shape}")
        coef = self._coefficients(values)
        if np.iscomplexobj(coef):
            # Two real matvecs: scipy's CSR kernel is much faster on reals.
            out = (self._matrix @ coef.real.ravel()
                   + 1j * (self._matrix @ coef.imag.ravel()))
        else:
            out = self._matrix @ coef.ravel()
        out = out.reshape(self.shape)
        if self._zero_outside.any():
            out = np.where(self._zero_outside, 0.0, out)
        return out

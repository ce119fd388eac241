"""Piecewise-constant signals on dyadic grids and the orthonormal Haar system.

A ``Signal1D`` holds the values of a function that is constant on each of the
``2**J`` equal cells of a dyadic window.  Inner products, norms and Haar
coefficients are exact sums over cells, so every identity of the Haar world
holds up to floating point round-off only.

Haar coefficient layout (1D, window W, resolution J): index 0 is the
coefficient of the normalised window indicator ``|W|**-1/2 * chi_W``; index
``2**j + o`` is the coefficient of ``h_I`` for the interval at depth ``j``
below W with relative offset ``o``, for ``0 <= j < J``.  The 2D layout is the
tensor product of the two 1D layouts.
"""
from __future__ import annotations

import io
import struct
from dataclasses import dataclass

import numpy as np

from .dyadic import DyadicInterval, DyadicRectangle
from .errors import PreconditionError


# ---------------------------------------------------------------------------
# index helpers
# ---------------------------------------------------------------------------

COARSE = -1  # marker depth used for the coarse (window indicator) basis element


def index_depth_offset(idx):
    """Map layout indices to (depth, relative offset); depth -1 is the coarse term."""
    idx = np.asarray(idx, dtype=np.int64)
    depth = np.where(idx > 0, np.floor(np.log2(np.maximum(idx, 1))).astype(np.int64), COARSE)
    # guard against float rounding of log2 near powers of two
    depth = np.where((idx > 0) & ((1 << np.maximum(depth, 0)) > idx), depth - 1, depth)
    depth = np.where((idx > 0) & ((1 << (np.maximum(depth, 0) + 1)) <= idx), depth + 1, depth)
    off = np.where(idx > 0, idx - (1 << np.maximum(depth, 0)), 0)
    return depth, off


def index_to_interval(window: DyadicInterval, idx: int) -> DyadicInterval | None:
    """Interval of a layout index, or None for the coarse term."""
    if idx == 0:
        return None
    j = int(idx).bit_length() - 1
    return DyadicInterval(window.level + j, (window.offset << j) + idx - (1 << j))


def interval_to_index(window: DyadicInterval, I: DyadicInterval | None) -> int:
    if I is None:
        return 0
    j = I.level - window.level
    if j < 0 or not window.contains(I):
        raise KeyError(f"{I!r} is not inside the window {window!r}")
    return (1 << j) + I.offset - (window.offset << j)


def basis_support(window: DyadicInterval, J: int) -> tuple[np.ndarray, np.ndarray]:
    """Per layout index, the support as (level, offset); the coarse term maps to the window."""
    n = 1 << J
    lv = np.empty(n, dtype=np.int64)
    of = np.empty(n, dtype=np.int64)
    lv[0], of[0] = window.level, window.offset
    for j in range(J):
        sl = slice(1 << j, 1 << (j + 1))
        lv[sl] = window.level + j
        of[sl] = (window.offset << j) + np.arange(1 << j)
    return lv, of


# ---------------------------------------------------------------------------
# signals
# ---------------------------------------------------------------------------

@dataclass
class Signal1D:
    window: DyadicInterval
    J: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (1 << self.J,):
            raise ValueError(f"expected {1 << self.J} samples, got {self.values.shape}")

    @property
    def cell(self) -> float:
        return self.window.length / (1 << self.J)

    @property
    def edges(self) -> np.ndarray:
        return self.window.left + self.cell * np.arange((1 << self.J) + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.window.left + self.cell * (np.arange(1 << self.J) + 0.5)

    @classmethod
    def zeros(cls, window, J):
        return cls(window, J, np.zeros(1 << J))

    @classmethod
    def from_function(cls, window, J, fn, order: int = 8):
        """Cell averages of ``fn`` by Gauss-Legendre quadrature on each cell."""
        x, w = np.polynomial.legendre.leggauss(order)
        s = cls.zeros(window, J)
        e = s.edges
        mid = 0.5 * (e[:-1] + e[1:])
        half = 0.5 * s.cell
        pts = mid[:, None] + half * x[None, :]
        s.values = (fn(pts) * w[None, :]).sum(axis=1) * 0.5
        return s

    @classmethod
    def indicator(cls, window, J, I: DyadicInterval, scale: float = 1.0):
        s = cls.zeros(window, J)
        lo, hi = cell_range(window, J, I)
        s.values[lo:hi] = scale
        return s

    @classmethod
    def haar(cls, window, J, I: DyadicInterval):
        if I.level >= window.level + J:
            raise ValueError("interval too small for the grid")
        s = cls.zeros(window, J)
        lo, hi = cell_range(window, J, I)
        mid = (lo + hi) // 2
        s.values[lo:mid] = I.length ** -0.5
        s.values[mid:hi] = -I.length ** -0.5
        return s

    def integral(self) -> float:
        return float(self.values.sum() * self.cell)

    def inner(self, other: "Signal1D") -> float:
        _check_same_grid(self, other)
        return float(np.dot(self.values, other.values) * self.cell)

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.floor((x - self.window.left) / self.cell).astype(np.int64)
        inside = (idx >= 0) & (idx < (1 << self.J))
        return np.where(inside, self.values[np.clip(idx, 0, (1 << self.J) - 1)], 0.0)

    def to_step(self) -> "StepFunction":
        return StepFunction(self.edges, self.values.copy())

    def __add__(self, other):
        _check_same_grid(self, other)
        return Signal1D(self.window, self.J, self.values + other.values)

    def __sub__(self, other):
        _check_same_grid(self, other)
        return Signal1D(self.window, self.J, self.values - other.values)

    def __mul__(self, c):
        return Signal1D(self.window, self.J, self.values * c)

    __rmul__ = __mul__

    def copy(self):
        return Signal1D(self.window, self.J, self.values.copy())


@dataclass
class Signal2D:
    window: DyadicRectangle
    J1: int
    J2: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (1 << self.J1, 1 << self.J2):
            raise ValueError("values shape does not match the resolutions")

    @property
    def cell_area(self) -> float:
        return self.window.i1.length / (1 << self.J1) * self.window.i2.length / (1 << self.J2)

    @property
    def axes(self) -> tuple[Signal1D, Signal1D]:
        return Signal1D.zeros(self.window.i1, self.J1), Signal1D.zeros(self.window.i2, self.J2)

    @classmethod
    def zeros(cls, window, J1, J2):
        return cls(window, J1, J2, np.zeros((1 << J1, 1 << J2)))

    @classmethod
    def tensor(cls, f1: Signal1D, f2: Signal1D):
        return cls(DyadicRectangle(f1.window, f2.window), f1.J, f2.J, np.outer(f1.values, f2.values))

    def integral(self) -> float:
        return float(self.values.sum() * self.cell_area)

    def inner(self, other: "Signal2D") -> float:
        if (self.window, self.J1, self.J2) != (other.window, other.J1, other.J2):
            raise ValueError("signals live on different grids")
        return float(np.sum(self.values * other.values) * self.cell_area)

    def __add__(self, other):
        return Signal2D(self.window, self.J1, self.J2, self.values + other.values)

    def __sub__(self, other):
        return Signal2D(self.window, self.J1, self.J2, self.values - other.values)

    def __mul__(self, c):
        return Signal2D(self.window, self.J1, self.J2, self.values * c)

    __rmul__ = __mul__


def cell_range(window: DyadicInterval, J: int, I: DyadicInterval) -> tuple[int, int]:
    """Cell index range ``[lo, hi)`` covered by I on the grid of (window, J)."""
    if not window.contains(I):
        raise ValueError(f"{I!r} is not inside {window!r}")
    d = I.level - window.level
    if d > J:
        raise ValueError(f"{I!r} is finer than the grid cells")
    rel = I.offset - (window.offset << d)
    size = 1 << (J - d)
    return rel * size, (rel + 1) * size


def _check_same_grid(a, b):
    if a.window != b.window or a.J != b.J:
        raise ValueError("signals live on different grids")


# ---------------------------------------------------------------------------
# Haar analysis and synthesis
# ---------------------------------------------------------------------------

@dataclass
class HaarCoeffs:
    """Haar coefficients in the dense tensor layout described in the module docstring.

    ``window`` is a DyadicInterval (1D) or a DyadicRectangle (2D) and
    ``resolution`` the matching J or (J1, J2).
    """

    window: object
    resolution: object
    array: np.ndarray

    @property
    def ndim(self) -> int:
        return self.array.ndim

    @property
    def coarse(self) -> float:
        return float(self.array.flat[0])

    @property
    def detail(self) -> dict:
        """Sparse view: interval (1D) or rectangle (2D) -> coefficient, nonzero entries only."""
        out = {}
        if self.ndim == 1:
            for idx in np.flatnonzero(self.array):
                if idx:
                    out[index_to_interval(self.window, int(idx))] = float(self.array[idx])
        else:
            W1, W2 = self.window.i1, self.window.i2
            nz = np.argwhere(self.array[1:, 1:] != 0) + 1
            for i, j in nz:
                R = DyadicRectangle(index_to_interval(W1, int(i)), index_to_interval(W2, int(j)))
                out[R] = float(self.array[i, j])
        return out

    def __getitem__(self, key):
        if self.ndim == 1:
            return float(self.array[interval_to_index(self.window, key)])
        if isinstance(key, DyadicRectangle):
            key = (key.i1, key.i2)
        i = interval_to_index(self.window.i1, key[0])
        j = interval_to_index(self.window.i2, key[1])
        return float(self.array[i, j])

    def __setitem__(self, key, value):
        if self.ndim == 1:
            self.array[interval_to_index(self.window, key)] = value
            return
        if isinstance(key, DyadicRectangle):
            key = (key.i1, key.i2)
        self.array[interval_to_index(self.window.i1, key[0]), interval_to_index(self.window.i2, key[1])] = value

    def energy(self) -> float:
        return float(np.sum(self.array ** 2))

    def detail_only(self) -> "HaarCoeffs":
        a = self.array.copy()
        if a.ndim == 1:
            a[0] = 0.0
        else:
            a[0, :] = 0.0
            a[:, 0] = 0.0
        return HaarCoeffs(self.window, self.resolution, a)

    @classmethod
    def zeros_like_signal(cls, f):
        if isinstance(f, Signal1D):
            return cls(f.window, f.J, np.zeros(1 << f.J))
        return cls(f.window, (f.J1, f.J2), np.zeros((1 << f.J1, 1 << f.J2)))

    @classmethod
    def from_dict(cls, window, resolution, coarse: float = 0.0, detail: dict | None = None):
        if isinstance(window, DyadicInterval):
            c = cls(window, resolution, np.zeros(1 << resolution))
        else:
            c = cls(window, tuple(resolution), np.zeros((1 << resolution[0], 1 << resolution[1])))
        c.array.flat[0] = coarse
        for k, v in (detail or {}).items():
            c[k] = v
        return c


def _forward_axis(vals: np.ndarray, window: DyadicInterval, J: int, axis: int) -> np.ndarray:
    v = np.moveaxis(vals, axis, -1)
    cell = window.length / (1 << J)
    s = v * cell
    out = np.empty_like(v)
    for j in range(J - 1, -1, -1):
        left, right = s[..., 0::2], s[..., 1::2]
        length = window.length * 2.0 ** (-j)
        out[..., (1 << j):(1 << (j + 1))] = (left - right) / np.sqrt(length)
        s = left + right
    out[..., 0] = s[..., 0] / np.sqrt(window.length)
    return np.moveaxis(out, -1, axis)


def _inverse_axis(coef: np.ndarray, window: DyadicInterval, J: int, axis: int) -> np.ndarray:
    c = np.moveaxis(coef, axis, -1)
    s = c[..., :1] * np.sqrt(window.length)
    for j in range(J):
        length = window.length * 2.0 ** (-j)
        d = c[..., (1 << j):(1 << (j + 1))] * np.sqrt(length)
        nxt = np.empty(c.shape[:-1] + (2 * s.shape[-1],))
        nxt[..., 0::2] = 0.5 * (s + d)
        nxt[..., 1::2] = 0.5 * (s - d)
        s = nxt
    cell = window.length / (1 << J)
    return np.moveaxis(s / cell, -1, axis)


def haar_forward(f) -> HaarCoeffs:
    """Exact Haar coefficients of a piecewise-constant signal (1D or 2D)."""
    if isinstance(f, Signal1D):
        return HaarCoeffs(f.window, f.J, _forward_axis(f.values, f.window, f.J, 0))
    if isinstance(f, Signal2D):
        a = _forward_axis(f.values, f.window.i1, f.J1, 0)
        a = _forward_axis(a, f.window.i2, f.J2, 1)
        return HaarCoeffs(f.window, (f.J1, f.J2), a)
    raise TypeError(f"cannot transform {type(f).__name__}")


def haar_inverse(c: HaarCoeffs):
    """Synthesis: the signal whose Haar coefficients are ``c``."""
    if c.array.ndim == 1:
        if not isinstance(c.window, DyadicInterval) or c.array.shape != (1 << int(c.resolution),):
            raise ValueError("coefficient layout inconsistent with window/resolution")
        return Signal1D(c.window, int(c.resolution), _inverse_axis(c.array, c.window, int(c.resolution), 0))
    J1, J2 = c.resolution
    if not isinstance(c.window, DyadicRectangle) or c.array.shape != (1 << J1, 1 << J2):
        raise ValueError("coefficient layout inconsistent with window/resolution")
    v = _inverse_axis(c.array, c.window.i1, J1, 0)
    v = _inverse_axis(v, c.window.i2, J2, 1)
    return Signal2D(c.window, J1, J2, v)


def haar_matrix(window: DyadicInterval, J: int) -> np.ndarray:
    """Rows are the basis functions (coarse first) as cell values."""
    return _inverse_axis(np.eye(1 << J), window, J, 1)


def average_matrix(window: DyadicInterval, J: int) -> np.ndarray:
    """Row p holds the Haar coefficients of ``|I_p|**-1 chi_{I_p}``, I_p the support of basis element p."""
    n = 1 << J
    lv, of = basis_support(window, J)
    vals = np.zeros((n, n))
    for p in range(n):
        I = DyadicInterval(int(lv[p]), int(of[p]))
        lo, hi = cell_range(window, J, I)
        vals[p, lo:hi] = 1.0 / I.length
    return _forward_axis(vals, window, J, 1)


def basis_vector(window: DyadicInterval, J: int, I: DyadicInterval | None) -> np.ndarray:
    v = np.zeros(1 << J)
    v[interval_to_index(window, I)] = 1.0
    return v


def one_vector(window: DyadicInterval, J: int) -> np.ndarray:
    """Coefficients of the window indicator, the finite-window stand-in for the constant 1."""
    v = np.zeros(1 << J)
    v[0] = np.sqrt(window.length)
    return v


# ---------------------------------------------------------------------------
# step functions on the line
# ---------------------------------------------------------------------------

@dataclass
class StepFunction:
    """Piecewise-constant function on the line, zero outside ``[breaks[0], breaks[-1])``."""

    breaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.breaks = np.asarray(self.breaks, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.breaks.shape[0] != self.values.shape[0] + 1:
            raise ValueError("need len(breaks) == len(values) + 1")

    @classmethod
    def zero(cls):
        return cls(np.array([0.0, 1.0]), np.zeros(1))

    @classmethod
    def from_intervals(cls, lefts, rights, weights) -> "StepFunction":
        """Sum of ``weights[i] * chi_[lefts[i], rights[i])``.

        Identical intervals are merged first.  Intervals of equal length that
        do not overlap (always the case for distinct dyadic intervals) are
        evaluated by lookup rather than by a running sum, so a cell that no
        interval covers is exactly zero and no cancellation error leaks into
        small values.
        """
        lefts = np.asarray(lefts, dtype=float).ravel()
        rights = np.asarray(rights, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if lefts.size == 0:
            return cls.zero()
        pts = np.unique(np.concatenate([lefts, rights]))
        keys = np.stack([rights - lefts, lefts])
        uniq, inv = np.unique(keys, axis=1, return_inverse=True)
        inv = np.asarray(inv).ravel()
        w = np.zeros(uniq.shape[1])
        np.add.at(w, inv, weights)
        lens, lo = uniq[0], uniq[1]
        mids = 0.5 * (pts[:-1] + pts[1:])
        vals = np.zeros(mids.size)
        for length in np.unique(lens):
            sel = lens == length
            a, ww = lo[sel], w[sel]
            order = np.argsort(a)
            a, ww = a[order], ww[order]
            if np.all(a[1:] >= a[:-1] + length):
                idx = np.searchsorted(a, mids, side="right") - 1
                inside = (idx >= 0) & (mids < a[np.maximum(idx, 0)] + length)
                vals += np.where(inside, ww[np.maximum(idx, 0)], 0.0)
            else:
                diff = np.zeros(pts.size)
                np.add.at(diff, np.searchsorted(pts, a), ww)
                np.add.at(diff, np.searchsorted(pts, a + length), -ww)
                vals += np.cumsum(diff)[:-1]
        return cls(pts, vals)

    @property
    def lengths(self) -> np.ndarray:
        return np.diff(self.breaks)

    def map(self, fn) -> "StepFunction":
        return StepFunction(self.breaks, fn(self.values))

    def sqrt(self) -> "StepFunction":
        return self.map(lambda v: np.sqrt(np.maximum(v, 0.0)))

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(self.breaks, x, side="right") - 1
        inside = (idx >= 0) & (idx < self.values.size)
        return np.where(inside, self.values[np.clip(idx, 0, self.values.size - 1)], 0.0)

    def refine(self, breaks) -> np.ndarray:
        """Values on the cells of a finer break sequence (zero outside the support)."""
        b = np.asarray(breaks, dtype=float)
        mids = 0.5 * (b[:-1] + b[1:])
        return self.evaluate(mids)

    def integral(self) -> float:
        return float(np.dot(self.values, self.lengths))

    def lp_norm(self, p: float) -> float:
        if np.isinf(p):
            return float(np.max(np.abs(self.values))) if self.values.size else 0.0
        return float(np.dot(np.abs(self.values) ** p, self.lengths) ** (1.0 / p))

    def measure_above(self, lam: float) -> float:
        return float(self.lengths[self.values > lam].sum())

    def weak_type_sup(self) -> float:
        """``sup_lambda lambda * |{F > lambda}|`` computed exactly from the level sets."""
        v, w = self.values, self.lengths
        pos = v > 0
        if not np.any(pos):
            return 0.0
        order = np.argsort(-v[pos], kind="stable")
        vs, ws = v[pos][order], w[pos][order]
        cum = np.cumsum(ws)
        # for lambda slightly below vs[i] the level set is every cell with value >= vs[i]
        last = np.r_[vs[1:] != vs[:-1], True]
        return float(np.max(vs[last] * cum[last]))

    def inner(self, other) -> float:
        if isinstance(other, Signal1D):
            other = other.to_step()
        pts = np.union1d(self.breaks, other.breaks)
        a, b = self.refine(pts), other.refine(pts)
        return float(np.dot(a * b, np.diff(pts)))

    def to_signal(self, window: DyadicInterval, J: int) -> Signal1D:
        """Cell averages on the grid of (window, J); exact when breaks lie on the grid."""
        s = Signal1D.zeros(window, J)
        e = s.edges
        prim = self.primitive(e)
        s.values = np.diff(prim) / s.cell
        return s

    def primitive(self, x) -> np.ndarray:
        """``int_{-inf}^x F``."""
        x = np.asarray(x, dtype=float)
        cum = np.r_[0.0, np.cumsum(self.values * self.lengths)]
        idx = np.clip(np.searchsorted(self.breaks, x, side="right") - 1, 0, self.values.size)
        base = cum[idx]
        part = np.where(idx < self.values.size,
                        (x - self.breaks[idx]) * self.values[np.minimum(idx, self.values.size - 1)], 0.0)
        out = np.where(x <= self.breaks[0], 0.0, base + part)
        return np.where(x >= self.breaks[-1], cum[-1], out)

    def __sub__(self, other):
        pts = np.union1d(self.breaks, other.breaks)
        return StepFunction(pts, self.refine(pts) - other.refine(pts))

    def __add__(self, other):
        pts = np.union1d(self.breaks, other.breaks)
        return StepFunction(pts, self.refine(pts) + other.refine(pts))


@dataclass
class StepFunction2D:
    """Piecewise-constant function on a product of break sequences, zero outside."""

    xbreaks: np.ndarray
    ybreaks: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.xbreaks = np.asarray(self.xbreaks, dtype=float)
        self.ybreaks = np.asarray(self.ybreaks, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.xbreaks.size - 1, self.ybreaks.size - 1):
            raise ValueError("values shape does not match the break sequences")

    @property
    def areas(self) -> np.ndarray:
        return np.outer(np.diff(self.xbreaks), np.diff(self.ybreaks))

    def refine(self, xb, yb) -> np.ndarray:
        xb, yb = np.asarray(xb, float), np.asarray(yb, float)
        xm, ym = 0.5 * (xb[:-1] + xb[1:]), 0.5 * (yb[:-1] + yb[1:])
        ix = np.searchsorted(self.xbreaks, xm, side="right") - 1
        iy = np.searchsorted(self.ybreaks, ym, side="right") - 1
        okx = (ix >= 0) & (ix < self.values.shape[0])
        oky = (iy >= 0) & (iy < self.values.shape[1])
        v = self.values[np.clip(ix, 0, self.values.shape[0] - 1)][:, np.clip(iy, 0, self.values.shape[1] - 1)]
        return v * okx[:, None] * oky[None, :]

    def map(self, fn) -> "StepFunction2D":
        return StepFunction2D(self.xbreaks, self.ybreaks, fn(self.values))

    def sqrt(self) -> "StepFunction2D":
        return self.map(lambda v: np.sqrt(np.maximum(v, 0.0)))

    def lp_norm(self, p: float) -> float:
        if np.isinf(p):
            return float(np.max(np.abs(self.values)))
        return float(np.sum(np.abs(self.values) ** p * self.areas) ** (1.0 / p))

    def integral(self) -> float:
        return float(np.sum(self.values * self.areas))

    def inner(self, other: "StepFunction2D") -> float:
        xb = np.union1d(self.xbreaks, other.xbreaks)
        yb = np.union1d(self.ybreaks, other.ybreaks)
        return float(np.sum(self.refine(xb, yb) * other.refine(xb, yb) * np.outer(np.diff(xb), np.diff(yb))))

    def max_abs_diff(self, other: "StepFunction2D") -> float:
        xb = np.union1d(self.xbreaks, other.xbreaks)
        yb = np.union1d(self.ybreaks, other.ybreaks)
        return float(np.max(np.abs(self.refine(xb, yb) - other.refine(xb, yb))))


def max_abs_diff(a: StepFunction, b: StepFunction) -> float:
    pts = np.union1d(a.breaks, b.breaks)
    return float(np.max(np.abs(a.refine(pts) - b.refine(pts))))


def haar_coefficients_on_line(F: StepFunction, levels) -> list[tuple[np.ndarray, np.ndarray, np.ndarray]]:
    """``<F, h_I>`` for every dyadic I at the given levels that meets the support of F.

    Returns one ``(level, offsets, coefficients)`` triple per level.  Uses the
    exact primitive of F, so the coefficients are exact up to round-off.
    """
    out = []
    lo, hi = F.breaks[0], F.breaks[-1]
    for lvl in levels:
        L = 2.0 ** (-lvl)
        o0, o1 = int(np.floor(lo / L)), int(np.ceil(hi / L))
        offs = np.arange(o0, o1, dtype=np.int64)
        a = offs * L
        P = F.primitive(np.stack([a, a + 0.5 * L, a + L]))
        c = ((P[1] - P[0]) - (P[2] - P[1])) / np.sqrt(L)
        out.append((int(lvl), offs, c))
    return out


# ---------------------------------------------------------------------------
# bump functions
# ---------------------------------------------------------------------------

def bump_profile(u):
    """``exp(-1/(1-u^2))`` on (-1, 1), zero elsewhere (infinitely smooth)."""
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    out[inside] = np.exp(-1.0 / (1.0 - u[inside] ** 2))
    return out


def bump_profile_derivative(u):
    u = np.asarray(u, dtype=float)
    out = np.zeros_like(u)
    inside = np.abs(u) < 1
    ui = u[inside]
    out[inside] = np.exp(-1.0 / (1.0 - ui ** 2)) * (-2.0 * ui / (1.0 - ui ** 2) ** 2)
    return out


def smooth_step(x):
    """C-infinity transition that is 0 for x <= 0 and 1 for x >= 1."""
    x = np.asarray(x, dtype=float)

    def g(y):
        out = np.zeros_like(y)
        pos = y > 0
        out[pos] = np.exp(-1.0 / y[pos])
        return out
    a, b = g(x), g(1.0 - x)
    return a / (a + b)


def cutoff(x):
    """Smooth even cutoff: 1 on ``|x| <= 1``, 0 on ``|x| >= 2``."""
    return 1.0 - smooth_step(np.abs(np.asarray(x, dtype=float)) - 1.0)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def _profile_l2(mean_zero: bool) -> float:
    # norm of the profile on [-1, 1] by composite Gauss-Legendre
    edges = np.linspace(-1.0, 1.0, 33)
    tot = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (a + b) + 0.5 * (b - a) * _GL_NODES
        y = bump_profile_derivative(x) if mean_zero else bump_profile(x)
        tot += 0.5 * (b - a) * np.dot(_GL_WEIGHTS, y ** 2)
    return float(np.sqrt(tot))


_PROFILE_NORMS = {False: _profile_l2(False), True: _profile_l2(True)}


@dataclass(frozen=True)
class AnalyticBump:
    """L2-normalised bump ``|I|^-1/2 * p(2(x - c)/|I|) / ||p||`` supported on ``[left, right]``."""

    left: float
    right: float
    mean_zero: bool = False

    @classmethod
    def on(cls, I: DyadicInterval | tuple, mean_zero: bool = False):
        if isinstance(I, DyadicInterval):
            return cls(I.left, I.right, mean_zero)
        return cls(float(I[0]), float(I[1]), mean_zero)

    @property
    def center(self):
        return 0.5 * (self.left + self.right)

    @property
    def width(self):
        return self.right - self.left

    def __call__(self, x):
        u = 2.0 * (np.asarray(x, dtype=float) - self.center) / self.width
        # the derivative profile is rescaled by the same L2 factor so the
        # result has unit norm for any width
        p = bump_profile_derivative(u) if self.mean_zero else bump_profile(u)
        return p * np.sqrt(2.0 / self.width) / _PROFILE_NORMS[self.mean_zero]

    @property
    def support(self):
        return self.left, self.right


@dataclass(frozen=True)
class BumpSpec:
    """Request for a bump adapted to ``interval``.

    ``order`` and ``constant`` are the declared (N, C) of the adaptedness
    inequality; ``certify`` checks a generated signal against them.  The bump is
    supported on the interval with the same centre and ``support`` times the
    length.
    """

    interval: DyadicInterval
    order: int = 2
    constant: float = 50.0
    mean_zero: bool = False
    support: float = 3.0

    def certify(self, f: "Signal1D") -> bool:
        return adaptedness_constant(f, self.interval, self.order) <= self.constant


TRUNCATION_TOLERANCE = 1e-8


def make_bump(spec: BumpSpec, resolution: int, window: DyadicInterval | None = None) -> Signal1D:
    """Cell-averaged, L2-normalised bump adapted to ``spec.interval``.

    With ``mean_zero`` the derivative of the profile is used; its cell averages
    are exact endpoint differences of the profile so the integral vanishes to
    round-off.  ``window`` defaults to the smallest dyadic ancestor of the
    interval that covers the support; ``resolution`` counts cells of the
    window.  Mass outside the window is discarded and the rest renormalised,
    provided the discarded share of the squared norm is below
    ``TRUNCATION_TOLERANCE``.
    """
    I = spec.interval
    lo, hi = I.dilate(spec.support)
    if window is None:
        window = I
        while window.left > lo or window.right < hi:
            if window.level < I.level - 62:
                raise PreconditionError("no dyadic ancestor covers the bump support; pass a window")
            window = window.parent()
            # intervals on opposite sides of 0 share no dyadic ancestor
            if (window.left >= 0) != (I.left >= 0):
                raise PreconditionError("no dyadic ancestor covers the bump support; pass a window")
    if not window.contains(I):
        raise PreconditionError("bump interval must lie inside the window")
    sig = Signal1D.zeros(window, resolution)
    if I.length / sig.cell < 16:
        raise PreconditionError("resolution too coarse: fewer than 16 samples inside the bump interval")
    ab = AnalyticBump(lo, hi, spec.mean_zero)
    lost = _squared_mass(ab, lo, min(hi, window.left)) + _squared_mass(ab, max(lo, window.right), hi)
    if lost > TRUNCATION_TOLERANCE:
        raise PreconditionError(f"window truncates {lost:.2e} of the bump's squared norm")
    if spec.mean_zero:
        # cell average of d/dx p(u(x)) is a difference of p at the cell edges
        u = 2.0 * (sig.edges - ab.center) / ab.width
        vals = np.diff(bump_profile(u)) / sig.cell
    else:
        vals = Signal1D.from_function(window, resolution, ab, order=12).values
    sig.values = vals / np.sqrt(np.sum(vals ** 2) * sig.cell)
    return sig


def _squared_mass(ab: "AnalyticBump", a: float, b: float, panels: int = 16) -> float:
    if b <= a:
        return 0.0
    e = np.linspace(a, b, panels + 1)
    x = 0.5 * (e[:-1, None] + e[1:, None]) + 0.5 * np.diff(e)[:, None] * _GL_NODES[None, :]
    return float(np.sum(0.5 * np.diff(e)[:, None] * _GL_WEIGHTS[None, :] * ab(x) ** 2))


def adaptedness_constant(f: Signal1D, I: DyadicInterval, N: int) -> float:
    """Smallest C with ``|f^(n)(x)| <= C |I|^(-1/2-n) (1 + |x - c(I)|/|I|)^(-N)`` for n = 0..N.

    Derivatives are forward differences with step one cell, evaluated at the
    centre of their stencil.
    """
    cells_in_I = I.length / f.cell
    if cells_in_I < 2 ** (N + 4) - 1e-9:
        raise ValueError(f"need at least {2 ** (N + 4)} samples inside I for order {N}")
    h = f.cell
    v = f.values
    x = f.centers
    best = 0.0
    for n in range(N + 1):
        d = np.diff(v, n=n) / h ** n if n else v
        xc = x[: x.size - n] + 0.5 * n * h
        weight = I.length ** (-0.5 - n) * (1.0 + np.abs(xc - I.center) / I.length) ** (-N)
        best = max(best, float(np.max(np.abs(d) / weight)))
    return best


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------

def signal_to_csv(f) -> str:
    buf = io.StringIO()
    if isinstance(f, Signal1D):
        buf.write(f"window_level,window_offset,J\n{f.window.level},{f.window.offset},{f.J}\n")
        buf.write("\n".join(repr(float(v)) for v in f.values) + "\n")
    else:
        w = f.window
        buf.write("w1_level,w1_offset,w2_level,w2_offset,J1,J2\n")
        buf.write(f"{w.i1.level},{w.i1.offset},{w.i2.level},{w.i2.offset},{f.J1},{f.J2}\n")
        for row in f.values:
            buf.write(",".join(repr(float(v)) for v in row) + "\n")
    return buf.getvalue()


def signal_from_csv(text: str):
    lines = [ln for ln in text.strip().splitlines()]
    head = lines[0].split(",")
    meta = [int(x) for x in lines[1].split(",")]
    if len(head) == 3:
        w = DyadicInterval(meta[0], meta[1])
        vals = np.array([float(x) for x in lines[2:]])
        return Signal1D(w, meta[2], vals)
    w = DyadicRectangle(DyadicInterval(meta[0], meta[1]), DyadicInterval(meta[2], meta[3]))
    vals = np.array([[float(x) for x in ln.split(",")] for ln in lines[2:]])
    return Signal2D(w, meta[4], meta[5], vals)


_MAGIC = b"DYS1"


def signal_to_bytes(f) -> bytes:
    if isinstance(f, Signal1D):
        head = struct.pack("<4sBqqq", _MAGIC, 1, f.window.level, f.window.offset, f.J)
    else:
        w = f.window
        head = struct.pack("<4sBqqqqqq", _MAGIC, 2, w.i1.level, w.i1.offset, w.i2.level, w.i2.offset, f.J1, f.J2)
    return head + np.ascontiguousarray(f.values, dtype="<f8").tobytes()


def signal_from_bytes(data: bytes):
    magic, dim = struct.unpack_from("<4sB", data)
    if magic != _MAGIC:
        raise ValueError("not a serialised signal")
    if dim == 1:
        _, _, lv, of, J = struct.unpack_from("<4sBqqq", data)
        off = struct.calcsize("<4sBqqq")
        return Signal1D(DyadicInterval(lv, of), J, np.frombuffer(data[off:], dtype="<f8").copy())
    _, _, l1, o1, l2, o2, J1, J2 = struct.unpack_from("<4sBqqqqqq", data)
    off = struct.calcsize("<4sBqqqqqq")
    vals = np.frombuffer(data[off:], dtype="<f8").copy().reshape(1 << J1, 1 << J2)
    return Signal2D(DyadicRectangle(DyadicInterval(l1, o1), DyadicInterval(l2, o2)), J1, J2, vals)

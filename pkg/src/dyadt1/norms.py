"""Grid norms, dyadic BMO, rectangle/product BMO estimators and H1 pre-atoms."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyadic import DyadicInterval, DyadicRectangle
from .errors import PreconditionError
from .signals import (
    AnalyticBump,
    Signal1D,
    Signal2D,
    StepFunction,
    StepFunction2D,
    basis_support,
    bump_profile,
    cell_range,
    haar_forward,
)


def lp_norm(f, p: float) -> float:
    """Exact L^p norm of a piecewise-constant function; ``p = inf`` is the max."""
    if p < 1:
        raise ValueError("p must be at least 1")
    if isinstance(f, (StepFunction, StepFunction2D)):
        return f.lp_norm(p)
    v = np.abs(f.values)
    if np.isinf(p):
        return float(v.max())
    cell = f.cell if isinstance(f, Signal1D) else f.cell_area
    return float((np.sum(v ** p) * cell) ** (1.0 / p))


def containment_matrix(window: DyadicInterval, J: int) -> np.ndarray:
    """``P[i, j] = 1`` when the support of basis element j lies inside that of i (detail indices only)."""
    n = 1 << J
    lv, of = basis_support(window, J)
    P = np.zeros((n, n))
    for i in range(1, n):
        I = DyadicInterval(int(lv[i]), int(of[i]))
        for d in range(I.level - window.level, J):
            rel = (I.offset << (d - (I.level - window.level))) - (window.offset << d)
            width = 1 << (d - (I.level - window.level))
            start = (1 << d) + rel
            P[i, start:start + width] = 1.0
    return P


def subtree_energy(f: Signal1D) -> tuple[np.ndarray, np.ndarray]:
    """Per detail index, ``sum_{J inside I} <f,h_J>^2`` and ``|I|``."""
    c = haar_forward(f).array
    J = f.J
    e = c ** 2
    e[0] = 0.0
    tot = e.copy()
    for d in range(J - 2, -1, -1):
        lo, hi = 1 << d, 1 << (d + 1)
        tot[lo:hi] += tot[2 * lo:2 * hi:2] + tot[2 * lo + 1:2 * hi:2]
    lv, _ = basis_support(f.window, J)
    return tot, 2.0 ** (-lv)


def dyadic_bmo_norm(f: Signal1D) -> float:
    """``sup_I (|I|^-1 sum_{J inside I} <f,h_J>^2)^{1/2}`` over dyadic I in the window."""
    tot, L = subtree_energy(f)
    return float(np.sqrt(np.max(tot[1:] / L[1:]))) if f.J > 0 else 0.0


def _rect_energy(f: Signal2D):
    c = haar_forward(f).array
    e = c ** 2
    e[0, :] = 0.0
    e[:, 0] = 0.0
    P1 = containment_matrix(f.window.i1, f.J1)
    P2 = containment_matrix(f.window.i2, f.J2)
    T = P1 @ e @ P2.T
    l1, _ = basis_support(f.window.i1, f.J1)
    l2, _ = basis_support(f.window.i2, f.J2)
    area = np.outer(2.0 ** (-l1), 2.0 ** (-l2))
    return e, T, area


def rect_bmo_norm(f: Signal2D) -> float:
    """Sup over single dyadic rectangles R of ``(|R|^-1 sum_{S inside R} <f,h_S>^2)^{1/2}``."""
    _, T, area = _rect_energy(f)
    v = T[1:, 1:] / area[1:, 1:]
    return float(np.sqrt(v.max())) if v.size else 0.0


def product_bmo_lowerbound(f: Signal2D, budget: int = 8) -> float:
    """Lower bound for the product BMO norm over a finite family of open sets.

    Candidates are every single dyadic rectangle plus the greedy unions of the
    first ``t <= budget`` rectangles ranked by their own squared coefficient.
    The value is nondecreasing in ``budget``.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    e, T, area = _rect_energy(f)
    best = float((T[1:, 1:] / area[1:, 1:]).max()) if T.shape[0] > 1 and T.shape[1] > 1 else 0.0
    W = f.window
    n1, n2 = 1 << f.J1, 1 << f.J2
    l1, o1 = basis_support(W.i1, f.J1)
    l2, o2 = basis_support(W.i2, f.J2)
    # cell ranges of every rectangle side
    s1 = np.array([cell_range(W.i1, f.J1, DyadicInterval(int(a), int(b))) for a, b in zip(l1, o1)])
    s2 = np.array([cell_range(W.i2, f.J2, DyadicInterval(int(a), int(b))) for a, b in zip(l2, o2)])
    flat = e[1:, 1:].ravel()
    order = np.argsort(-flat, kind="stable")[:budget]
    mask = np.zeros((n1, n2), dtype=np.int64)
    cell_area = f.cell_area
    I1, I2 = np.meshgrid(np.arange(1, n1), np.arange(1, n2), indexing="ij")
    I1, I2 = I1.ravel(), I2.ravel()
    for idx in order:
        if flat[idx] == 0:
            break
        i, j = int(I1[idx]), int(I2[idx])
        mask[s1[i, 0]:s1[i, 1], s2[j, 0]:s2[j, 1]] = 1
        # rectangles fully inside the mask: compare the mask count with the cell count
        S = np.zeros((n1 + 1, n2 + 1), dtype=np.int64)
        S[1:, 1:] = mask.cumsum(0).cumsum(1)
        a0, a1 = s1[I1, 0], s1[I1, 1]
        b0, b1 = s2[I2, 0], s2[I2, 1]
        cnt = S[a1, b1] - S[a0, b1] - S[a1, b0] + S[a0, b0]
        inside = cnt == (a1 - a0) * (b1 - b0)
        energy = float(flat[inside].sum())
        omega = float(mask.sum()) * cell_area
        best = max(best, energy / omega)
    return float(np.sqrt(best))


@dataclass
class PreAtom2D:
    rectangle: DyadicRectangle
    values: Signal2D
    scale: float
    slack: float

    def marginal_errors(self) -> tuple[float, float]:
        v = self.values.values
        h1 = self.values.window.i1.length / v.shape[0]
        h2 = self.values.window.i2.length / v.shape[1]
        return float(np.abs(v.sum(axis=0) * h1).max()), float(np.abs(v.sum(axis=1) * h2).max())

    def derivative_bounds(self) -> dict:
        """Finite-difference sups of the mixed derivatives divided by their allowed size."""
        return derivative_ratios(self.values, self.rectangle)


def derivative_ratios(f: Signal2D, R: DyadicRectangle) -> dict:
    v = f.values
    h1 = f.window.i1.length / v.shape[0]
    h2 = f.window.i2.length / v.shape[1]
    out = {}
    for a in (0, 1):
        for b in (0, 1):
            d = v
            if a:
                d = np.diff(d, axis=0) / h1
            if b:
                d = np.diff(d, axis=1) / h2
            allowed = R.i1.length ** (-a) * R.i2.length ** (-b) * R.area ** -0.5
            out[(a, b)] = float(np.abs(d).max() / allowed)
    return out


def _mean_zero_factor(window: DyadicInterval, J: int, I: DyadicInterval) -> np.ndarray:
    lo, hi = I.dilate(2.0)
    if lo < window.left or hi > window.right:
        raise PreconditionError("the window must contain the doubled rectangle")
    s = Signal1D.zeros(window, J)
    if 2 * I.length / s.cell < 16:
        raise PreconditionError("resolution too coarse for the doubled rectangle")
    ab = AnalyticBump(lo, hi, mean_zero=True)
    u = 2.0 * (s.edges - ab.center) / ab.width
    return np.diff(bump_profile(u)) / s.cell


def make_preatom(R: DyadicRectangle, window: DyadicRectangle, J1: int, J2: int) -> PreAtom2D:
    """Tensor of mean-zero profiles on the doubled sides, scaled to meet every derivative bound.

    ``slack`` is the largest ratio of a derivative sup to its allowed size
    after scaling, so it equals 1 for the binding constraint.
    """
    a = _mean_zero_factor(window.i1, J1, R.i1)
    b = _mean_zero_factor(window.i2, J2, R.i2)
    raw = Signal2D(window, J1, J2, np.outer(a, b))
    ratios = derivative_ratios(raw, R)
    scale = 1.0 / max(ratios.values())
    f = Signal2D(window, J1, J2, raw.values * scale)
    return PreAtom2D(R, f, scale, max(derivative_ratios(f, R).values()))

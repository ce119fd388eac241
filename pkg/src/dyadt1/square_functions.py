"""Square functions, their class-shifted variants and the dyadic shift operators.

A ``ShiftSpec`` fixes a scale shift ``k``, a translation band ``n`` and a
selector that picks one interval ``J(I)`` from the class ``I_{k,n}`` for every
dyadic I.  Outputs that can leave the analysis window (shifted Haar functions,
modified square functions) are returned as ``StepFunction`` objects, which
carry exact break points on the line.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dyadic import DyadicInterval, DyadicRectangle, _relative_class, class_offsets
from .errors import ConfigError
from .signals import (
    HaarCoeffs,
    Signal1D,
    Signal2D,
    StepFunction,
    StepFunction2D,
    basis_support,
    haar_coefficients_on_line,
    haar_forward,
)

SELECTORS = ("leftmost", "inverse-leftmost", "random", "identity")


def _mix(a: np.ndarray) -> np.ndarray:
    """splitmix64 finaliser on uint64 arrays."""
    z = a.astype(np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        z = z ^ (z >> np.uint64(31))
    return z


@dataclass(frozen=True)
class ShiftSpec:
    """Scale shift ``k``, band ``n`` and the rule choosing ``J(I)`` in ``I_{k,n}``.

    ``leftmost`` is total and, for ``k >= 0``, injective.  ``inverse-leftmost``
    is the partial inverse of the leftmost selector of ``(-k, n)``: it maps I to
    the unique J whose leftmost ``(-k, n)`` choice is I, and is undefined when
    no such J exists (those coefficients are dropped).  ``random`` is a seeded
    hash of I.  ``identity`` is only valid for ``k = 0, n = 1``.
    """

    k: int = 0
    n: int = 1
    selector: str = "leftmost"
    seed: int = 0
    convention: str = "literal"

    def __post_init__(self):
        if self.selector not in SELECTORS:
            raise ConfigError(f"unknown selector {self.selector!r}")
        if self.n < 1:
            raise ConfigError("n must be a positive integer")
        if self.selector == "identity" and (self.k, self.n) != (0, 1):
            raise ConfigError("the identity selector needs k = 0 and n = 1")

    @property
    def partial(self) -> bool:
        return self.selector == "inverse-leftmost"

    def reverse(self) -> "ShiftSpec":
        """The spec whose selector inverts this one (for the adjoint identity)."""
        if self.selector == "leftmost":
            return ShiftSpec(-self.k, self.n, "inverse-leftmost", self.seed, self.convention)
        if self.selector == "inverse-leftmost":
            return ShiftSpec(-self.k, self.n, "leftmost", self.seed, self.convention)
        if self.selector == "identity":
            return self
        raise ConfigError("the random selector has no canonical inverse")

    def select(self, levels, offsets):
        """Vectorised selector: returns ``(jlevel, joffset, defined_mask)``."""
        levels = np.asarray(levels, dtype=np.int64)
        offsets = np.asarray(offsets, dtype=np.int64)
        if self.selector == "identity":
            return levels.copy(), offsets.copy(), np.ones(levels.shape, bool)
        if self.selector == "leftmost":
            return _leftmost(levels, offsets, self.k, self.n, self.convention)
        if self.selector == "random":
            jl, base, rels = class_offsets(levels, offsets, self.k, self.n, self.convention)
            sizes = np.array([len(r) for r in rels], dtype=np.int64)
            if np.any(sizes == 0):
                raise ConfigError(f"empty class for k={self.k}, n={self.n}")
            salt = np.uint64((self.seed * 0x9E3779B97F4A7C15) % (1 << 64))
            h = _mix(_mix(levels.astype(np.uint64) + salt)
                     ^ offsets.astype(np.uint64))
            pick = (h % sizes.astype(np.uint64)).astype(np.int64)
            jo = base + np.array([r[p] for r, p in zip(rels, pick)], dtype=np.int64)
            return jl, jo, np.ones(levels.shape, bool)
        # inverse-leftmost: search the (k, n) class of I for the J that picks I back
        jl, base, rels = class_offsets(levels, offsets, self.k, self.n, self.convention)
        jo = np.zeros_like(offsets)
        ok = np.zeros(levels.shape, bool)
        width = max((len(r) for r in rels), default=0)
        for pos in range(width):
            cand = np.array([r[pos] if pos < len(r) else 0 for r in rels], dtype=np.int64) + base
            has = np.array([pos < len(r) for r in rels])
            bl, bo, _ = _leftmost(jl, cand, -self.k, self.n, self.convention)
            hit = has & ~ok & (bl == levels) & (bo == offsets)
            jo[hit] = cand[hit]
            ok |= hit
        return jl, jo, ok

    def select_one(self, I: DyadicInterval) -> DyadicInterval | None:
        jl, jo, ok = self.select([I.level], [I.offset])
        return DyadicInterval(int(jl[0]), int(jo[0])) if ok[0] else None


def _leftmost(levels, offsets, k, n, convention):
    if k >= 0:
        r = _relative_class(k, n, convention, 0)
        if not r:
            raise ConfigError(f"empty class for k={k}, n={n}")
        return levels + k, (offsets << k) + min(r), np.ones(levels.shape, bool)
    M = 1 << (-k)
    phase = offsets & (M - 1)
    table = np.array([min(_relative_class(k, n, convention, p)) for p in range(M)], dtype=np.int64)
    return levels + k, (offsets >> (-k)) + table[phase], np.ones(levels.shape, bool)


def injective_spec(k: int, n: int, convention: str = "literal") -> ShiftSpec:
    """An injective selector for any sign of ``k``.

    ``leftmost`` for ``k >= 0``; for ``k < 0`` the partial inverse of the
    ``(-k, n)`` leftmost rule.  With injective selection the square function
    of the shifted signal equals the modified square function exactly.
    """
    return ShiftSpec(k, n, "leftmost" if k >= 0 else "inverse-leftmost", 0, convention)


def identity_spec() -> ShiftSpec:
    return ShiftSpec(0, 1, "identity")


# ---------------------------------------------------------------------------
# helpers on coefficient layouts
# ---------------------------------------------------------------------------

def _detail_arrays(c: HaarCoeffs):
    """Per detail index of a 1D layout: (level, offset, coefficient)."""
    lv, of = basis_support(c.window, int(c.resolution))
    return lv[1:], of[1:], c.array[1:]


def _as_coeffs(f) -> HaarCoeffs:
    return f if isinstance(f, HaarCoeffs) else haar_forward(f)


# ---------------------------------------------------------------------------
# one parameter
# ---------------------------------------------------------------------------

def square_fn(f) -> Signal1D:
    """Classical dyadic square function, exact on the grid of f."""
    c = _as_coeffs(f)
    J = int(c.resolution)
    lv, of, d = _detail_arrays(c)
    W = c.window
    out = np.zeros(1 << J)
    # accumulate c_I^2 / |I| on the cells of I via a difference array
    size = (1 << J) >> (lv - W.level)
    start = (of - (W.offset << (lv - W.level))) * size
    diff = np.zeros((1 << J) + 1)
    np.add.at(diff, start, d ** 2 * 2.0 ** lv)
    np.add.at(diff, start + size, -(d ** 2) * 2.0 ** lv)
    out = np.cumsum(diff)[:-1]
    return Signal1D(W, J, np.sqrt(np.maximum(out, 0.0)))


def modified_square_fn(f, spec: ShiftSpec) -> StepFunction:
    """``(sum_I <f,h_I>^2 chi_{J(I)} / |J(I)|)^{1/2}`` with J chosen by ``spec``."""
    c = _as_coeffs(f)
    lv, of, d = _detail_arrays(c)
    jl, jo, ok = spec.select(lv, of)
    if not spec.partial and not ok.all():
        raise ConfigError("selector undefined for an interval with a coefficient")
    keep = ok & (d != 0)
    L = 2.0 ** (-jl[keep])
    return StepFunction.from_intervals(jo[keep] * L, (jo[keep] + 1) * L, d[keep] ** 2 / L).sqrt()


def class_square_fn(f, k: int, n: int, convention: str = "literal") -> StepFunction:
    """``(sum_I <f,h_I>^2 sum_{J in I_{k,n}} chi_J / |J|)^{1/2}``."""
    c = _as_coeffs(f)
    lv, of, d = _detail_arrays(c)
    nz = d != 0
    jl, base, rels = class_offsets(lv[nz], of[nz], k, n, convention)
    sizes = np.array([len(r) for r in rels], dtype=np.int64)
    if sizes.sum() == 0:
        return StepFunction.zero()
    jlev = np.repeat(jl, sizes)
    joff = np.repeat(base, sizes) + np.concatenate([np.asarray(r, np.int64) for r in rels])
    w = np.repeat(d[nz] ** 2, sizes)
    L = 2.0 ** (-jlev)
    return StepFunction.from_intervals(joff * L, (joff + 1) * L, w / L).sqrt()


def shift_op(f, spec: ShiftSpec) -> StepFunction:
    """``sum_I <f,h_I> h_{J(I)}``; the coarse term is dropped."""
    c = _as_coeffs(f)
    lv, of, d = _detail_arrays(c)
    jl, jo, ok = spec.select(lv, of)
    if not spec.partial and not ok.all():
        raise ConfigError("selector undefined for an interval with a coefficient")
    keep = ok & (d != 0)
    return _haar_sum(jl[keep], jo[keep], d[keep])


def _haar_sum(levels, offsets, coeffs) -> StepFunction:
    if levels.size == 0:
        return StepFunction.zero()
    L = 2.0 ** (-levels)
    a = offsets * L
    amp = coeffs / np.sqrt(L)
    return StepFunction.from_intervals(np.r_[a, a + L / 2], np.r_[a + L / 2, a + L], np.r_[amp, -amp])


def square_fn_line(F: StepFunction, levels) -> StepFunction:
    """Square function of a step function on the line, over the given Haar levels."""
    lefts, rights, w = [], [], []
    for lvl, offs, cf in haar_coefficients_on_line(F, levels):
        L = 2.0 ** (-lvl)
        nz = cf != 0
        lefts.append(offs[nz] * L)
        rights.append((offs[nz] + 1) * L)
        w.append(cf[nz] ** 2 / L)
    if not lefts:
        return StepFunction.zero()
    return StepFunction.from_intervals(np.concatenate(lefts), np.concatenate(rights), np.concatenate(w)).sqrt()


def shifted_levels(f, spec: ShiftSpec) -> range:
    """Haar levels occupied by ``shift_op(f, spec)``."""
    c = _as_coeffs(f)
    lo = c.window.level + spec.k
    return range(lo, lo + int(c.resolution))


def class_comparison(f, k: int, n: int, convention: str = "literal"):
    """Both sides of the class-sum comparison for ``k <= 0``.

    Left: ``S_{k,n} f^2``.  Right: for every J, the class ``J_{-k,n}`` size
    times the largest squared coefficient over that class, spread as
    ``chi_J / |J|``.  Ties in the maximising interval are broken by the
    leftmost I, which does not change the value.  Returns two step functions
    (left, right) and the class cardinality used.
    """
    if k > 0:
        raise ValueError("the comparison concerns k <= 0")
    c = _as_coeffs(f)
    lv, of, d = _detail_arrays(c)
    coef = {(int(a), int(b)): float(x) for a, b, x in zip(lv, of, d) if x != 0}
    lhs = class_square_fn(c, k, n, convention)
    if not coef:
        return lhs.map(np.square), StepFunction.zero(), 0
    lvls = np.array([key[0] for key in coef], dtype=np.int64)
    offs = np.array([key[1] for key in coef], dtype=np.int64)
    jl, base, rels = class_offsets(lvls, offs, k, n, convention)
    targets = {}
    for l_, b_, r_ in zip(jl, base, rels):
        for r in r_:
            targets[(int(l_), int(b_) + r)] = None
    tl = np.array([t[0] for t in targets], dtype=np.int64)
    to = np.array([t[1] for t in targets], dtype=np.int64)
    il, ibase, irels = class_offsets(tl, to, -k, n, convention)
    card = max(len(r) for r in irels)
    left, right, w = [], [], []
    for (l_, o_), l2, b2, r2 in zip(targets, il, ibase, irels):
        best = max((coef.get((int(l2), int(b2) + r), 0.0) ** 2 for r in r2), default=0.0)
        L = 2.0 ** (-l_)
        left.append(o_ * L)
        right.append((o_ + 1) * L)
        w.append(len(r2) * best / L)
    return lhs.map(np.square), StepFunction.from_intervals(left, right, w), card


# ---------------------------------------------------------------------------
# two parameters
# ---------------------------------------------------------------------------

def _axis_indicator_matrix(window: DyadicInterval, J: int, spec: ShiftSpec | None, mode: str,
                           k: int = 0, n: int = 1, convention: str = "literal"):
    """Per detail index i of one axis, the function placed on the line.

    mode ``"square"`` places ``sum chi_J / |J|`` (J over the class, or the
    selected J, or I itself); mode ``"haar"`` places ``h_{J(I)}``.  Returns the
    break points and a matrix ``(detail index, cell)``; row 0 (coarse) is zero.
    """
    lv, of = basis_support(window, J)
    lv, of = lv[1:], of[1:]
    rows, lefts, rights, w = [], [], [], []
    if spec is None and mode == "class":
        jl, base, rels = class_offsets(lv, of, k, n, convention)
        for i, (l_, b_, r_) in enumerate(zip(jl, base, rels)):
            L = 2.0 ** (-int(l_))
            for r in r_:
                rows.append(i)
                lefts.append((b_ + r) * L)
                rights.append((b_ + r + 1) * L)
                w.append(1.0 / L)
    else:
        if spec is None:
            jl, jo, ok = lv, of, np.ones(lv.shape, bool)
        else:
            jl, jo, ok = spec.select(lv, of)
        for i in np.flatnonzero(ok):
            L = 2.0 ** (-int(jl[i]))
            a = int(jo[i]) * L
            if mode == "haar":
                rows += [i, i]
                lefts += [a, a + L / 2]
                rights += [a + L / 2, a + L]
                w += [L ** -0.5, -(L ** -0.5)]
            else:
                rows.append(i)
                lefts.append(a)
                rights.append(a + L)
                w.append(1.0 / L)
    if not rows:
        return np.array([window.left, window.right]), np.zeros((1 << J, 1))
    lefts, rights, w, rows = map(np.asarray, (lefts, rights, w, rows))
    pts = np.unique(np.r_[lefts, rights])
    M = np.zeros((1 << J, pts.size))
    li = np.searchsorted(pts, lefts)
    ri = np.searchsorted(pts, rights)
    np.add.at(M, (rows + 1, li), w)
    np.add.at(M, (rows + 1, ri), -w)
    return pts, np.cumsum(M, axis=1)[:, :-1]


def _coeffs2(f) -> HaarCoeffs:
    c = _as_coeffs(f)
    if c.array.ndim != 2:
        raise ValueError("expected a two-parameter signal")
    return c


def _detail2(c: HaarCoeffs) -> np.ndarray:
    a = c.array.copy()
    a[0, :] = 0.0
    a[:, 0] = 0.0
    return a


def double_square_fn(f) -> Signal2D:
    """Classical double square function, exact on the grid of f."""
    c = _coeffs2(f)
    J1, J2 = c.resolution
    W = c.window
    A = _grid_indicator(W.i1, J1)
    B = _grid_indicator(W.i2, J2)
    val = A.T @ (_detail2(c) ** 2) @ B
    return Signal2D(W, J1, J2, np.sqrt(np.maximum(val, 0.0)))


def _grid_indicator(window: DyadicInterval, J: int) -> np.ndarray:
    """``(index, cell)`` matrix of ``chi_I / |I|`` on the grid; row 0 is zero."""
    lv, of = basis_support(window, J)
    M = np.zeros((1 << J, 1 << J))
    for i in range(1, 1 << J):
        d = int(lv[i]) - window.level
        size = (1 << J) >> d
        start = (int(of[i]) - (window.offset << d)) * size
        M[i, start:start + size] = 2.0 ** int(lv[i])
    return M


def double_class_square_fn(f, k, n, convention: str = "literal") -> StepFunction2D:
    """``SS_{k,n}``: every rectangle's coefficient spread over its whole class."""
    c = _coeffs2(f)
    (J1, J2), W = c.resolution, c.window
    x, A = _axis_indicator_matrix(W.i1, J1, None, "class", k[0], n[0], convention)
    y, B = _axis_indicator_matrix(W.i2, J2, None, "class", k[1], n[1], convention)
    val = A.T @ (_detail2(c) ** 2) @ B
    return StepFunction2D(x, y, np.sqrt(np.maximum(val, 0.0)))


def double_modified_square_fn(f, spec1: ShiftSpec, spec2: ShiftSpec) -> StepFunction2D:
    """Selector-based double square function."""
    c = _coeffs2(f)
    (J1, J2), W = c.resolution, c.window
    x, A = _axis_indicator_matrix(W.i1, J1, spec1, "square")
    y, B = _axis_indicator_matrix(W.i2, J2, spec2, "square")
    val = A.T @ (_detail2(c) ** 2) @ B
    return StepFunction2D(x, y, np.sqrt(np.maximum(val, 0.0)))


def double_shift_op(f, spec1: ShiftSpec, spec2: ShiftSpec, order: str = "21") -> StepFunction2D:
    """``TT_{k,n}``: the axis-2 shift applied first, then the axis-1 shift.

    ``order="12"`` applies the axis-1 shift first; both give the same result.
    """
    c = _coeffs2(f)
    (J1, J2), W = c.resolution, c.window
    x, H1 = _axis_indicator_matrix(W.i1, J1, spec1, "haar")
    y, H2 = _axis_indicator_matrix(W.i2, J2, spec2, "haar")
    C = _detail2(c)
    if order == "21":
        val = H1.T @ (C @ H2)
    elif order == "12":
        val = (H1.T @ C) @ H2
    else:
        raise ValueError("order must be '12' or '21'")
    return StepFunction2D(x, y, val)


def double_square_fn_line(F: StepFunction2D, levels1, levels2) -> StepFunction2D:
    """Double square function of a 2D step function over the given Haar levels."""
    def axis(breaks, levels):
        rows = []
        for lvl in levels:
            L = 2.0 ** (-lvl)
            o0, o1 = int(np.floor(breaks[0] / L)), int(np.ceil(breaks[-1] / L))
            for o in range(o0, o1):
                rows.append((lvl, o))
        return rows

    r1 = axis(F.xbreaks, levels1)
    r2 = axis(F.ybreaks, levels2)

    def proj(rows, breaks):
        # matrix (basis, cell of breaks) with entries int_cell h_J
        M = np.zeros((len(rows), breaks.size - 1))
        for i, (lvl, o) in enumerate(rows):
            L = 2.0 ** (-lvl)
            a, m, b = o * L, o * L + L / 2, o * L + L
            lo = np.clip(breaks[:-1], a, m)
            hi = np.clip(breaks[1:], a, m)
            M[i] += (hi - lo) * L ** -0.5
            lo = np.clip(breaks[:-1], m, b)
            hi = np.clip(breaks[1:], m, b)
            M[i] -= (hi - lo) * L ** -0.5
        return M

    P1 = proj(r1, F.xbreaks)
    P2 = proj(r2, F.ybreaks)
    coef = P1 @ F.values @ P2.T

    def ind(rows):
        lefts = np.array([o * 2.0 ** (-l) for l, o in rows])
        rights = np.array([(o + 1) * 2.0 ** (-l) for l, o in rows])
        pts = np.unique(np.r_[lefts, rights])
        mids = 0.5 * (pts[:-1] + pts[1:])
        M = ((mids[None, :] >= lefts[:, None]) & (mids[None, :] < rights[:, None])) / (rights - lefts)[:, None]
        return pts, M

    x, A = ind(r1)
    y, B = ind(r2)
    return StepFunction2D(x, y, np.sqrt(np.maximum(A.T @ coef ** 2 @ B, 0.0)))


# ---------------------------------------------------------------------------
# operator norm estimation
# ---------------------------------------------------------------------------

def _norm(F, p: float) -> float:
    if isinstance(F, (Signal1D, Signal2D)):
        v = np.abs(F.values)
        cell = F.cell if isinstance(F, Signal1D) else F.cell_area
        if np.isinf(p):
            return float(v.max())
        return float((np.sum(v ** p) * cell) ** (1.0 / p))
    return F.lp_norm(p)


def probe_signals(window, J, trials: int, seed: int, dim: int = 1):
    """Deterministic mixed probe set: Haar-sparse signals, single bumps and spikes.

    For ``dim=2`` the window is a DyadicRectangle and ``J`` a pair; the probe
    set alternates tensors of 1D probes with sparse random coefficient arrays.
    """
    from .signals import BumpSpec, haar_inverse, make_bump

    rng = np.random.default_rng(seed)
    out = []
    if dim == 2:
        for t in range(trials):
            if t % 2 == 0:
                f1 = probe_signals(window.i1, J[0], 1 + t % 3, int(rng.integers(2 ** 31)))[-1]
                f2 = probe_signals(window.i2, J[1], 1 + (t // 2) % 3, int(rng.integers(2 ** 31)))[-1]
                out.append(Signal2D.tensor(f1, f2))
            else:
                shape = (1 << J[0], 1 << J[1])
                coef = rng.normal(size=shape) * (rng.random(shape) < 8.0 / (shape[0] * shape[1]) ** 0.5)
                out.append(haar_inverse(HaarCoeffs(window, tuple(J), coef)))
        return out
    n = 1 << J
    for t in range(trials):
        kind = t % 3
        if kind == 0:
            coef = np.zeros(n)
            idx = rng.choice(np.arange(1, n), size=min(n - 1, int(rng.integers(1, 9))), replace=False)
            coef[idx] = rng.normal(size=idx.size)
            out.append(haar_inverse(HaarCoeffs(window, J, coef)))
        elif kind == 1:
            depth = int(rng.integers(1, max(2, J - 4)))
            I = DyadicInterval(window.level + depth, (window.offset << depth) + int(rng.integers(1 << depth)))
            out.append(make_bump(BumpSpec(I, mean_zero=bool(rng.integers(2)), support=1.0), J, window))
        else:
            v = np.zeros(n)
            pos = rng.choice(n, size=int(rng.integers(1, 4)), replace=False)
            v[pos] = rng.normal(size=pos.size)
            out.append(Signal1D(window, J, v))
    return out


def empirical_opnorm(op, p: float, trials: int, seed: int, window: DyadicInterval | None = None,
                     J: int = 8, dim: int = 1, signals=None) -> float:
    """Largest observed ``||op f||_p / ||f||_p`` over a seeded probe set.

    This is a lower bound on the operator norm.  ``signals`` overrides the
    generated probe set.
    """
    if not (1 < p < np.inf) and p != np.inf:
        raise ValueError("p must lie in (1, inf]")
    if trials < 1:
        raise ValueError("need at least one trial")
    if signals is None:
        if window is None:
            window = DyadicInterval(0, 0) if dim == 1 else DyadicRectangle(DyadicInterval(0, 0), DyadicInterval(0, 0))
        signals = probe_signals(window, J if dim == 1 else (J, J), trials, seed, dim)
    best = 0.0
    for f in signals:
        nf = _norm(f, p)
        if nf == 0:
            continue
        best = max(best, _norm(op(f), p) / nf)
    return best


def lp_bound(k: int, n: int, p: float) -> float:
    """Growth shape for the modified square function on L^p."""
    if k >= 0:
        return (2.0 ** k * np.log(n + 1) + 1.0) ** 0.5
    return (2.0 ** (-k) + np.log(n + 1) + 1.0) ** abs(2.0 / p - 1.0)

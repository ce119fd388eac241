"""Kernel-backed forms: truncation limits of the cancellation functionals and bump decay tables.

Every routine here works with tensor kernels ``k1(x1 - t1) k2(x2 - t2)``,
for which the pairings split into one-dimensional integrals that can be
evaluated to near machine precision.  The form is
``Lambda(f, g) = int int f(t) g(x) K(x, t) dt dx``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicInterval, DyadicRectangle, diam_union, family
from .errors import ConfigError, NumericalFailure, PreconditionError
from .kernels import ProductKernel, gauss_legendre, pv_pairing
from .signals import AnalyticBump, Signal1D, Signal2D, cutoff


def _require_tensor(K: ProductKernel):
    if not getattr(K, "is_tensor", False):
        raise ConfigError("truncation limits are implemented for tensor kernels only")
    return K.factors


# ---------------------------------------------------------------------------
# pairing of a dilated cutoff with grid cells
# ---------------------------------------------------------------------------

def cutoff_cell_integrals(k1, edges: np.ndarray, center: float, L: float, order: int = 24,
                          panels: int = 8) -> np.ndarray:
    """``int Phi((t - center)/L) int_cell k(x - t) dx dt`` for each cell between consecutive edges.

    ``Phi`` equals 1 on ``[-1, 1]``, so that part is the closed-form double
    cell integral; on the two transition bands ``L <= |t - center| <= 2L``
    the integrand is smooth as long as the cells stay inside ``[center - L,
    center + L]``, and composite Gauss-Legendre is used there.
    """
    a, b = edges[:-1], edges[1:]
    if a.min() < center - L or b.max() > center + L:
        raise PreconditionError("the cutoff must equal 1 on the cells (increase k)")
    core = k1.double_cell_integral(a, b, center - L, center + L)
    xg, wg = gauss_legendre(order)
    e = np.linspace(1.0, 2.0, panels + 1)
    u = (0.5 * (e[:-1, None] + e[1:, None]) + 0.5 * np.diff(e)[:, None] * xg[None, :]).ravel()
    w = (0.5 * np.diff(e)[:, None] * wg[None, :]).ravel() * L
    phi = cutoff(u) * w
    tail = np.zeros_like(core)
    for sgn in (1.0, -1.0):
        t = center + sgn * L * u
        tail += k1.cell_integral(a[:, None], b[:, None], t[None, :]) @ phi
    return core + tail


@dataclass
class LimitSequence:
    """Values of a truncation sequence for ``k = 1..kmax`` and their successive differences."""

    ks: list
    values: list
    differences: list = field(default_factory=list)
    prefactor: float | None = None

    def __post_init__(self):
        v = self.values
        self.differences = [abs(v[i + 1] - v[i]) for i in range(len(v) - 1)]

    @property
    def value(self) -> float:
        return self.values[-1]

    def ratios(self, floor: float = 1e-13) -> list:
        """``d_{k+1}/d_k``; None where the earlier difference is below ``floor``."""
        d = self.differences
        return [d[i + 1] / d[i] if d[i] > floor else None for i in range(len(d) - 1)]

    def cauchy_ratio(self, k_from: int = 3, floor: float = 1e-13) -> float:
        """Largest ratio of successive differences starting at ``k_from`` (0 if all vanish)."""
        r = [x for k, x in zip(self.ks[1:], self.ratios(floor)) if k >= k_from and x is not None]
        return max(r) if r else 0.0


def _check_support(f: Signal1D, I: DyadicInterval, what: str) -> tuple[int, int, np.ndarray]:
    from .signals import cell_range
    lo, hi = cell_range(f.window, f.J, I)
    if np.any(f.values[:lo] != 0) or np.any(f.values[hi:] != 0):
        raise PreconditionError(f"{what} must be supported in {I!r}")
    return lo, hi, f.edges[lo:hi + 1]


def t1_limit(K: ProductKernel, f: Signal2D, S: DyadicRectangle, kmax: int = 10,
             mean_tol: float = 1e-12) -> LimitSequence:
    """``Lambda(Phi_k, f)`` with ``Phi_k`` the cutoff dilated by ``2^k |S_i|`` about the centre of S.

    ``f`` must be supported in S and integrate to zero along each variable.
    """
    k1, k2 = _require_tensor(K)
    lo1, hi1, e1 = _check_support(Signal1D(f.window.i1, f.J1, f.values.any(axis=1).astype(float)), S.i1, "f")
    lo2, hi2, e2 = _check_support(Signal1D(f.window.i2, f.J2, f.values.any(axis=0).astype(float)), S.i2, "f")
    F = f.values[lo1:hi1, lo2:hi2]
    scale = max(float(np.abs(F).max()), 1e-300)
    if np.abs(F.sum(axis=0)).max() > mean_tol * scale * F.shape[0] or \
            np.abs(F.sum(axis=1)).max() > mean_tol * scale * F.shape[1]:
        raise PreconditionError("f must integrate to zero in each variable")
    c1, c2 = S.i1.center, S.i2.center
    ks, vals = [], []
    for k in range(1, kmax + 1):
        A1 = cutoff_cell_integrals(k1, e1, c1, 2.0 ** k * S.i1.length)
        A2 = cutoff_cell_integrals(k2, e2, c2, 2.0 ** k * S.i2.length)
        v = float(A1 @ F @ A2)
        if not math.isfinite(v):
            raise NumericalFailure(f"non-finite truncation value at k={k}")
        ks.append(k)
        vals.append(v)
    return LimitSequence(ks, vals)


def restricted_t1_limit(K: ProductKernel, phi: AnalyticBump, psi: AnalyticBump, f: Signal1D,
                        S2: DyadicInterval, kmax: int = 10, mean_tol: float = 1e-12,
                        prefactor: float | None = None) -> LimitSequence:
    """``Lambda(phi (x) Phi_k, psi (x) f)``: the first variable carries the bumps, the second the atom.

    ``f`` is a mean-zero function supported in ``S2``; ``Phi_k`` is the cutoff
    dilated by ``2^k |S2|`` about its centre.  ``prefactor`` is carried along
    for reporting only.
    """
    k1, k2 = _require_tensor(K)
    lo, hi, e = _check_support(f, S2, "f")
    F = f.values[lo:hi]
    if abs(F.sum()) > mean_tol * max(float(np.abs(F).max()), 1e-300) * F.size:
        raise PreconditionError("f must have integral zero")
    first = pv_pairing(k1, phi, psi, phi.support, psi.support)
    ks, vals = [], []
    for k in range(1, kmax + 1):
        A = cutoff_cell_integrals(k2, e, S2.center, 2.0 ** k * S2.length)
        ks.append(k)
        vals.append(float(first * (A @ F)))
    return LimitSequence(ks, vals, prefactor=prefactor)


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, float]:
    """Least squares with intercept; returns (coefficients, R^2)."""
    X = np.column_stack([np.ones(len(y)), x])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    resid = y - X @ coef
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(resid @ resid) / ss if ss > 0 else 1.0
    return coef, r2


@dataclass
class SweepResult:
    rows: list
    slope: float
    r2: float


def restricted_geometry_sweep(K: ProductKernel, es=(1, 2, 3, 4, 5), R: DyadicInterval = DyadicInterval(0, 0),
                              gap: float = 3.0, delta: float = 1.0, kmax: int = 6) -> SweepResult:
    """Size dependence of the restricted value when the two bumps sit on different intervals.

    ``phi`` is adapted to R, ``psi`` is a mean-zero bump on the interval of
    length ``2^-e |R|`` starting ``gap * |R|`` to the right of R.  The limit in
    the second variable uses a Haar atom on ``[0, 1)``.  Returns rows
    ``(e, |value|, prefactor)`` and the fitted slope of ``log |value|``
    against ``log(|S|/|R|)``.
    """
    W2 = DyadicInterval(-1, 0)
    atom = Signal1D.haar(W2, 6, DyadicInterval(0, 0))
    phi = AnalyticBump.on(R)
    rows = []
    for e in es:
        lvl = R.level + e
        off = int(round((R.right + gap * R.length) * 2.0 ** lvl))
        S = DyadicInterval(lvl, off)
        psi = AnalyticBump.on(S, mean_zero=True)
        pref = (S.length / R.length) ** (0.5 + delta) * (diam_union(R, S) / R.length) ** (-(1 + delta))
        seq = restricted_t1_limit(K, phi, psi, atom, DyadicInterval(0, 0), kmax, prefactor=pref)
        rows.append((e, abs(seq.value), pref))
    x = np.log([2.0 ** -e for e, _, _ in rows])
    y = np.log([v for _, v, _ in rows])
    coef, r2 = _fit(x[:, None], y)
    return SweepResult(rows, float(coef[1]), r2)


# ---------------------------------------------------------------------------
# bump decay experiment
# ---------------------------------------------------------------------------

def decay_table_1d(k1, es, ms, I: DyadicInterval = DyadicInterval(0, 0), support: float = 1.0,
                   convention: str = "literal") -> dict:
    """``max |<k psi_I, psi_J>|`` over the class of I for each (e, m), with mean-zero bumps.

    Entries that fail to evaluate are NaN.
    """
    out = {}
    psi_I = AnalyticBump(*I.dilate(support), mean_zero=True)
    for e in es:
        for m in ms:
            best = 0.0
            try:
                for J in family(I, e, m, convention=convention):
                    psi_J = AnalyticBump(*J.dilate(support), mean_zero=True)
                    v = pv_pairing(k1, psi_I, psi_J, psi_I.support, psi_J.support)
                    if not np.isfinite(v):
                        raise NumericalFailure("non-finite pairing")
                    best = max(best, abs(v))
            except NumericalFailure:
                best = float("nan")
            out[(e, m)] = best
    return out


@dataclass
class DecayExperiment:
    rows: list                 # (e1, e2, m1, m2, value)
    eccentricity_slopes: tuple
    distance_slopes: tuple
    r2: float
    excluded: int

    def summary(self) -> dict:
        return {"eccentricity_slope_1": self.eccentricity_slopes[0],
                "eccentricity_slope_2": self.eccentricity_slopes[1],
                "distance_slope_1": self.distance_slopes[0],
                "distance_slope_2": self.distance_slopes[1],
                "r2": self.r2, "excluded": self.excluded}


def bump_decay_experiment(K: ProductKernel, es=(1, 2, 3, 4, 5), ms=(2, 4, 8, 16, 32),
                          R: DyadicRectangle | None = None, support: float = 1.0,
                          executor=None) -> DecayExperiment:
    """Table of ``|Lambda(psi_R, psi_S)|`` (largest over S in the class) and fitted log-log slopes.

    For a tensor kernel the pairing of tensor bumps factorises, and the class
    of rectangles is the product of the interval classes, so the table entry
    is the product of the one-dimensional maxima.  The regression is
    ``log value ~ c + a_i log(|S_i|/|R_i|) + b_i log m_i``; zero entries (zero
    form) are reported but excluded from the fit, as are failed entries.
    """
    k1, k2 = _require_tensor(K)
    R = R or DyadicRectangle(DyadicInterval(0, 0), DyadicInterval(0, 0))
    jobs = [(k1, es, ms, R.i1, support), (k2, es, ms, R.i2, support)]
    if executor is None:
        t1, t2 = (decay_table_1d(*j) for j in jobs)
    else:
        t1, t2 = executor.map(_star_table, jobs)
    rows = []
    for e1 in es:
        for e2 in es:
            for m1 in ms:
                for m2 in ms:
                    rows.append((e1, e2, m1, m2, t1[(e1, m1)] * t2[(e2, m2)]))
    arr = np.array(rows, dtype=float)
    ok = np.isfinite(arr[:, 4]) & (arr[:, 4] > 0)
    excluded = int((~ok).sum())
    if ok.sum() < 6:
        return DecayExperiment(rows, (float("nan"),) * 2, (float("nan"),) * 2, float("nan"), excluded)
    A = arr[ok]
    x = np.column_stack([-A[:, 0] * np.log(2), -A[:, 1] * np.log(2), np.log(A[:, 2]), np.log(A[:, 3])])
    coef, r2 = _fit(x, np.log(A[:, 4]))
    return DecayExperiment(rows, (float(coef[1]), float(coef[2])), (float(coef[3]), float(coef[4])), r2, excluded)


def _star_table(args):
    return decay_table_1d(*args)

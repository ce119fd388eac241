"""Finite bilinear forms on the truncated 2D Haar span, paraproducts and the cancellation reduction.

A form on a grid ``(window, J1, J2)`` is stored as a dense matrix
``M[p, q] = Lambda(h_p, h_q)`` over flattened tensor indices
``p = i * 2**J2 + j``, where ``(i, j)`` are the 1D layout indices of
:mod:`dyadt1.signals` (index 0 being the normalised window indicator).  The
associated operator satisfies ``<T f, g> = Lambda(f, g)``.

The constant function 1 is represented by the window indicator, whose only
nonzero coefficient is ``sqrt(|W1| |W2|)`` at ``(0, 0)``.

Averages ``phi_R = |R|^-1 chi_R`` play the role of the smooth approximate
identities and the Haar functions that of the wavelets in every paraproduct.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .dyadic import DyadicInterval, DyadicRectangle, diam_union
from .errors import ConfigError, PreconditionError
from .signals import (
    HaarCoeffs,
    Signal2D,
    average_matrix,
    basis_support,
    haar_forward,
    haar_inverse,
    haar_matrix,
    index_to_interval,
    interval_to_index,
)

DISJOINT, EQUAL, INSIDE, CONTAINS = 0, 1, 2, 3


# ---------------------------------------------------------------------------
# the form container
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FiniteBilinearForm:
    window: DyadicRectangle
    J1: int
    J2: int
    matrix: np.ndarray
    name: str = "form"

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float)
        n = (1 << self.J1) * (1 << self.J2)
        if m.shape == (1 << self.J1, 1 << self.J2, 1 << self.J1, 1 << self.J2):
            m = m.reshape(n, n)
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match the grid ({n} x {n})")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def shape2(self) -> tuple[int, int]:
        return 1 << self.J1, 1 << self.J2

    @property
    def tensor(self) -> np.ndarray:
        """The matrix as ``M4[p1, p2, q1, q2]``."""
        n1, n2 = self.shape2
        return self.matrix.reshape(n1, n2, n1, n2)

    @classmethod
    def zeros_like(cls, other: "FiniteBilinearForm", name: str = "zero") -> "FiniteBilinearForm":
        return cls(other.window, other.J1, other.J2, np.zeros_like(other.matrix), name)

    def _same(self, M, name) -> "FiniteBilinearForm":
        return FiniteBilinearForm(self.window, self.J1, self.J2, M, name)

    def coefficients(self, f) -> np.ndarray:
        """Flattened Haar coefficients of a signal, coefficient object or raw array."""
        if isinstance(f, Signal2D):
            if (f.window, f.J1, f.J2) != (self.window, self.J1, self.J2):
                raise ValueError("signal lives on a different grid")
            return haar_forward(f).array.ravel()
        if isinstance(f, HaarCoeffs):
            return f.array.ravel()
        a = np.asarray(f, dtype=float)
        if a.size != self.matrix.shape[0]:
            raise ValueError("coefficient vector has the wrong length")
        return a.ravel()

    def __call__(self, f, g) -> float:
        return float(self.coefficients(f) @ self.matrix @ self.coefficients(g))

    evaluate = __call__

    def apply(self, f) -> Signal2D:
        """The operator T with ``<T f, g> = Lambda(f, g)``."""
        c = self.matrix.T @ self.coefficients(f)
        return haar_inverse(HaarCoeffs(self.window, (self.J1, self.J2), c.reshape(self.shape2)))

    def __add__(self, other):
        return self._same(self.matrix + other.matrix, f"({self.name}+{other.name})")

    def __sub__(self, other):
        return self._same(self.matrix - other.matrix, f"({self.name}-{other.name})")

    def __mul__(self, c: float):
        return self._same(self.matrix * c, f"{c}*{self.name}")

    __rmul__ = __mul__

    def one(self) -> np.ndarray:
        """Coefficients of the window indicator, standing in for the constant 1."""
        return tensor_coeffs(one_1d(self.window.i1, self.J1), one_1d(self.window.i2, self.J2))

    def to_records(self, tol: float = 0.0) -> list[tuple]:
        """Sparse coordinate list ``(R1, R2, S1, S2, value)``; None marks the window indicator."""
        n1, n2 = self.shape2
        W1, W2 = self.window.i1, self.window.i2
        out = []
        for p, q in np.argwhere(np.abs(self.matrix) > tol):
            p1, p2 = divmod(int(p), n2)
            q1, q2 = divmod(int(q), n2)
            out.append((index_to_interval(W1, p1), index_to_interval(W2, p2),
                        index_to_interval(W1, q1), index_to_interval(W2, q2), float(self.matrix[p, q])))
        return out

    @classmethod
    def from_records(cls, window: DyadicRectangle, J1: int, J2: int, records, name: str = "form"):
        n1, n2 = 1 << J1, 1 << J2
        M = np.zeros((n1 * n2, n1 * n2))
        for R1, R2, S1, S2, v in records:
            p = interval_to_index(window.i1, R1) * n2 + interval_to_index(window.i2, R2)
            q = interval_to_index(window.i1, S1) * n2 + interval_to_index(window.i2, S2)
            M[p, q] += v
        return cls(window, J1, J2, M, name)


def one_1d(window: DyadicInterval, J: int) -> np.ndarray:
    v = np.zeros(1 << J)
    v[0] = np.sqrt(window.length)
    return v


def tensor_coeffs(a1, a2) -> np.ndarray:
    """Flattened coefficients of ``f1 (x) f2`` from the 1D coefficient vectors."""
    return np.outer(a1, a2).ravel()


def _permuted(L: FiniteBilinearForm, axes, name) -> FiniteBilinearForm:
    return FiniteBilinearForm(L.window, L.J1, L.J2, L.tensor.transpose(axes).copy(), name)


def adjoint_forms(L: FiniteBilinearForm) -> tuple[FiniteBilinearForm, FiniteBilinearForm, FiniteBilinearForm]:
    """Partial adjoints and the full adjoint.

    ``L1(f, g) = L(g1 (x) f2, f1 (x) g2)``, ``L2(f, g) = L(f1 (x) g2, g1 (x) f2)``
    and ``L*(f, g) = L(g, f)``, extended from tensors by linearity.
    """
    if not isinstance(L, FiniteBilinearForm):
        raise ConfigError("adjoints are only available for matrix-backed forms")
    return (_permuted(L, (2, 1, 0, 3), f"{L.name}_1"),
            _permuted(L, (0, 3, 2, 1), f"{L.name}_2"),
            _permuted(L, (2, 3, 0, 1), f"{L.name}*"))


def probe_ratio(L: FiniteBilinearForm, pairs, p: float = 2.0) -> float:
    """``max |L(f, g)| / (||f||_p ||g||_p')`` over the given signal pairs."""
    from .norms import lp_norm

    q = np.inf if p == 1 else (1.0 if np.isinf(p) else p / (p - 1))
    best = 0.0
    for f, g in pairs:
        den = lp_norm(f, p) * lp_norm(g, q)
        if den > 0:
            best = max(best, abs(L(f, g)) / den)
    return best


# ---------------------------------------------------------------------------
# the nine-term representation
# ---------------------------------------------------------------------------

def relation_matrix(window: DyadicInterval, J: int) -> np.ndarray:
    """``rel[p, q]`` between the supports of basis elements p and q.

    Values: DISJOINT, EQUAL, INSIDE (support of p strictly inside that of q)
    or CONTAINS (support of p strictly contains that of q).  The window
    indicator is constant on the window, so it is ranked as a strict ancestor
    of every detail element (its support is placed one level above).
    """
    lv, of = basis_support(window, J)
    lv[0], of[0] = window.level - 1, window.offset >> 1
    Lp, Lq = lv[:, None], lv[None, :]
    Op, Oq = of[:, None], of[None, :]
    p_in_q = (Lp >= Lq) & ((Op >> np.maximum(Lp - Lq, 0)) == Oq)
    q_in_p = (Lq >= Lp) & ((Oq >> np.maximum(Lq - Lp, 0)) == Op)
    rel = np.full(p_in_q.shape, DISJOINT, dtype=np.int8)
    rel[p_in_q & ~q_in_p] = INSIDE
    rel[q_in_p & ~p_in_q] = CONTAINS
    rel[p_in_q & q_in_p] = EQUAL
    return rel


# (relation in coordinate 1, relation in coordinate 2) -> class name, with p the
# index of f (the input) and q the index of g (the test function)
NINE_CLASSES = {
    (EQUAL, EQUAL): "diagonal",
    (CONTAINS, CONTAINS): "t1_class",
    (INSIDE, INSIDE): "t1star_class",
    (INSIDE, CONTAINS): "t11_class",
    (CONTAINS, INSIDE): "t11star_class",
    (EQUAL, CONTAINS): "half_t_h_one",
    (EQUAL, INSIDE): "half_tstar_h_one",
    (CONTAINS, EQUAL): "half_t_one_h",
    (INSIDE, EQUAL): "half_tstar_one_h",
}

HALF_CLASSES = ("half_t_h_one", "half_tstar_h_one", "half_t_one_h", "half_tstar_one_h")


@dataclass
class NineTermDecomposition:
    """Per-class sums of ``f_p g_q M[p, q]``; ``terms`` holds the (p, q, value) arrays per class."""

    diagonal: float = 0.0
    t1_class: float = 0.0
    t1star_class: float = 0.0
    t11_class: float = 0.0
    t11star_class: float = 0.0
    half_t_h_one: float = 0.0
    half_tstar_h_one: float = 0.0
    half_t_one_h: float = 0.0
    half_tstar_one_h: float = 0.0
    terms: dict = field(default_factory=dict, repr=False)

    @property
    def half_paraproducts(self) -> dict:
        return {k: getattr(self, k) for k in HALF_CLASSES}

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in NINE_CLASSES.values()}

    @property
    def total(self) -> float:
        return float(np.sum(list(self.as_dict().values())))

    def nonzero_classes(self, tol: float = 0.0) -> list[str]:
        return [k for k, v in self.as_dict().items() if abs(v) > tol]


def class_labels(window: DyadicRectangle, J1: int, J2: int) -> np.ndarray:
    """Flattened class label per index pair: -1 for disjoint supports, else 0..8 in NINE_CLASSES order."""
    return _class_labels(window, J1, J2)


@lru_cache(maxsize=16)
def _class_labels(window: DyadicRectangle, J1: int, J2: int) -> np.ndarray:
    r1 = relation_matrix(window.i1, J1)
    r2 = relation_matrix(window.i2, J2)
    n1, n2 = 1 << J1, 1 << J2
    R1 = np.broadcast_to(r1[:, None, :, None], (n1, n2, n1, n2))
    R2 = np.broadcast_to(r2[None, :, None, :], (n1, n2, n1, n2))
    lab = np.full((n1, n2, n1, n2), -1, dtype=np.int8)
    for c, key in enumerate(NINE_CLASSES):
        lab[(R1 == key[0]) & (R2 == key[1])] = c
    lab = lab.reshape(n1 * n2, n1 * n2)
    lab.setflags(write=False)
    return lab


def check_support_preserving(L: FiniteBilinearForm, tol: float = 0.0) -> None:
    lab = class_labels(L.window, L.J1, L.J2)
    bad = np.argwhere((lab < 0) & (np.abs(L.matrix) > tol))
    if bad.size:
        p, q = (int(v) for v in bad[0])
        n2 = 1 << L.J2
        W1, W2 = L.window.i1, L.window.i2
        R = (index_to_interval(W1, p // n2), index_to_interval(W2, p % n2))
        S = (index_to_interval(W1, q // n2), index_to_interval(W2, q % n2))
        raise PreconditionError(
            f"form is not support preserving: Lambda(h_R, h_S) = {L.matrix[p, q]!r} for disjoint R={R}, S={S} "
            f"({len(bad)} offending pairs)")


def haar_representation(L: FiniteBilinearForm, f, g, check: bool = True, keep_terms: bool = True) -> NineTermDecomposition:
    """Split ``<T f, g>`` into the nine classes of index pairs with intersecting supports.

    Two dyadic rectangles that meet are nested in each coordinate, so each
    coordinate is equal, inside or containing; the nine combinations are the
    classes.  A support-preserving T has no entries on disjoint pairs, hence
    the nine sums add up to ``<T f, g>``.
    """
    if check:
        check_support_preserving(L)
    a, b = L.coefficients(f), L.coefficients(g)
    lab = class_labels(L.window, L.J1, L.J2)
    contrib = a[:, None] * L.matrix * b[None, :]
    out = NineTermDecomposition()
    for c, name in enumerate(NINE_CLASSES.values()):
        mask = lab == c
        setattr(out, name, float(np.sum(contrib[mask])))
        if keep_terms:
            p, q = np.nonzero(mask & (contrib != 0))
            out.terms[name] = (p, q, contrib[p, q])
    return out


def half_term_form(L: FiniteBilinearForm, f, g, which: str) -> float:
    """The half-paraproduct terms written with restricted operator values.

    ``half_t_h_one``: ``sum_R <f, h_R1 (x) phi_R2> <g, h_R> <T(h_R1 (x) 1), h_R>``
    and its three relatives (adjoint and/or other coordinate), where R runs
    over index pairs whose varying coordinate is a detail index.  For an
    operator that acts locally like multiplication in that coordinate this
    equals the corresponding class of :func:`haar_representation`.
    """
    n1, n2 = L.shape2
    F = L.coefficients(f).reshape(n1, n2)
    G = L.coefficients(g).reshape(n1, n2)
    M4 = L.tensor
    s1, s2 = np.sqrt(L.window.i1.length), np.sqrt(L.window.i2.length)
    P1 = average_matrix(L.window.i1, L.J1)
    P2 = average_matrix(L.window.i2, L.J2)
    i1, i2 = np.arange(n1), np.arange(n2)
    if which == "half_t_h_one":
        tv = s2 * M4[i1, 0, i1, :]            # <T(h_R1 (x) 1), h_R>
        w = G * (F @ P2.T) * tv               # <f, h_R1 (x) phi_R2>
        return float(np.sum(w[:, 1:]))
    if which == "half_tstar_h_one":
        tv = s2 * M4[i1, :, i1, 0]            # <T*(h_R1 (x) 1), h_R> = Lambda(h_R, h_R1 (x) 1)
        w = F * (G @ P2.T) * tv
        return float(np.sum(w[:, 1:]))
    if which == "half_t_one_h":
        tv = s1 * M4[0, i2, :, i2].T          # <T(1 (x) h_R2), h_R>
        w = G * (P1 @ F) * tv
        return float(np.sum(w[1:, :]))
    if which == "half_tstar_one_h":
        tv = s1 * M4[:, i2, 0, i2]            # Lambda(h_R, 1 (x) h_R2)
        w = F * (P1 @ G) * tv
        return float(np.sum(w[1:, :]))
    raise ValueError(f"unknown half term {which!r}")


# ---------------------------------------------------------------------------
# paraproducts
# ---------------------------------------------------------------------------

def _coeff_array(b, window: DyadicRectangle | None = None, res=None) -> tuple[np.ndarray, DyadicRectangle, int, int]:
    if isinstance(b, Signal2D):
        return haar_forward(b).array, b.window, b.J1, b.J2
    if isinstance(b, HaarCoeffs):
        return b.array, b.window, b.resolution[0], b.resolution[1]
    raise TypeError("symbol must be a Signal2D or 2D HaarCoeffs")


def _require_detail(B: np.ndarray, what: str, allow_partial: bool = False, tol: float = 1e-12) -> None:
    scale = max(1.0, float(np.abs(B).max()))
    if allow_partial:
        if abs(B[0, 0]) > tol * scale:
            raise PreconditionError(f"{what}: the symbol has a nonzero mean over the window")
        return
    if np.abs(B[0, :]).max() > tol * scale or np.abs(B[:, 0]).max() > tol * scale:
        raise PreconditionError(f"{what}: the symbol must have mean zero in each variable (detail coefficients only)")


def paraproduct_classical(b, extended: bool = False) -> FiniteBilinearForm:
    """``sum_R <b, h_R> <f, phi_R> <g, h_R>``.

    ``extended`` also admits rectangles with one side equal to the window (the
    coefficients of b against ``h_R1 (x) 1`` and ``1 (x) h_R2``); the
    reduction uses this so that ``Lambda(1, .)`` is reproduced on every test
    function, at the price of the partial vanishing identities.
    """
    B, W, J1, J2 = _coeff_array(b)
    _require_detail(B, "classical paraproduct", allow_partial=extended)
    B = B.copy()
    B[0, 0] = 0.0
    P1 = average_matrix(W.i1, J1)
    P2 = average_matrix(W.i2, J2)
    # M4[p1, p2, q1, q2] = B[q1, q2] <phi_q1, h_p1> <phi_q2, h_p2>
    M4 = np.einsum("cd,ca,db->abcd", B, P1, P2)
    return FiniteBilinearForm(W, J1, J2, M4, "classical_paraproduct")


def paraproduct_mixed(b) -> FiniteBilinearForm:
    """``sum_R <b, h_R> <f, phi_R1 (x) h_R2> <g, h_R1 (x) phi_R2>``."""
    B, W, J1, J2 = _coeff_array(b)
    _require_detail(B, "mixed paraproduct")
    P1 = average_matrix(W.i1, J1)
    P2 = average_matrix(W.i2, J2)
    # R = (q1, p2)
    M4 = np.einsum("cb,ca,bd->abcd", B, P1, P2)
    return FiniteBilinearForm(W, J1, J2, M4, "mixed_paraproduct")


def decay_bound(R: DyadicInterval, S: DyadicInterval, delta: float) -> float:
    """``(min/max)^(1/2+delta) (diam(R u S)/max)^-(1+delta)`` for the side lengths of R and S."""
    lo, hi = sorted((R.length, S.length))
    return (lo / hi) ** (0.5 + delta) * (diam_union(R, S) / hi) ** (-(1.0 + delta))


@dataclass
class BmoSequence:
    """Functions ``b_{R2,S2}`` of the other variable, indexed by pairs of intervals.

    ``index_window`` / ``index_J`` describe the grid the pair indices live on;
    each entry is a Signal1D on a common grid.  ``constant`` is the declared
    constant of the decay condition (``inf`` disables the check).
    """

    index_window: DyadicInterval
    index_J: int
    entries: dict
    delta: float = 1.0
    constant: float = float("inf")

    def __post_init__(self):
        grids = {(s.window, s.J) for s in self.entries.values()}
        if len(grids) > 1:
            raise ValueError("all entries must share one grid")

    @property
    def grid(self) -> tuple[DyadicInterval, int] | None:
        for s in self.entries.values():
            return s.window, s.J
        return None

    def coefficient_tensor(self, window: DyadicInterval, J: int) -> np.ndarray:
        """``B[R2, S2, R1] = <b_{R2,S2}, h_R1>`` with coarse slots left at zero."""
        n, m = 1 << self.index_J, 1 << J
        B = np.zeros((n, n, m))
        for (R, S), s in self.entries.items():
            if (s.window, s.J) != (window, J):
                raise ValueError("entry grid does not match the form grid")
            c = haar_forward(s).array.copy()
            c[0] = 0.0
            B[interval_to_index(self.index_window, R), interval_to_index(self.index_window, S)] = c
        B[0, :, :] = 0.0
        B[:, 0, :] = 0.0
        return B

    @classmethod
    def from_tensor(cls, B: np.ndarray, index_window: DyadicInterval, index_J: int,
                    window: DyadicInterval, J: int, delta: float = 1.0, tol: float = 0.0) -> "BmoSequence":
        entries = {}
        n = 1 << index_J
        for a in range(1, n):
            for c in range(1, n):
                v = B[a, c].copy()
                v[0] = 0.0
                if np.abs(v).max() > tol:
                    s = haar_inverse(HaarCoeffs(window, J, v))
                    entries[(index_to_interval(index_window, a), index_to_interval(index_window, c))] = s
        return cls(index_window, index_J, entries, delta)


@dataclass
class BmoSequenceReport:
    ratios: dict
    max_ratio: float
    offending: list

    @property
    def passed(self) -> bool:
        return not self.offending


def bmo_sequence_check(b: BmoSequence) -> BmoSequenceReport:
    """Per-entry dyadic BMO norm divided by the decay bound."""
    from .norms import dyadic_bmo_norm

    ratios = {}
    for (R, S), s in b.entries.items():
        ratios[(R, S)] = dyadic_bmo_norm(s) / decay_bound(R, S, b.delta)
    mx = max(ratios.values(), default=0.0)
    bad = sorted((k for k, v in ratios.items() if v > b.constant), key=lambda k: -ratios[k])
    return BmoSequenceReport(ratios, float(mx), bad)


def _third_tensor(B: np.ndarray, P: np.ndarray) -> np.ndarray:
    # M4[p1, R2, R1, S2] = B[R2, S2, R1] <phi_R1, h_p1>
    return np.einsum("bdc,ca->abcd", B, P)


def paraproduct_third(b: BmoSequence, validate: bool = True) -> FiniteBilinearForm:
    """``sum_{R2,S2} sum_R1 <b_{R2,S2}, h_R1> <f, phi_R1 (x) h_R2> <g, h_R1 (x) h_S2>``."""
    if validate:
        rep = bmo_sequence_check(b)
        if rep.offending:
            raise PreconditionError(f"decay condition violated for {rep.offending[:5]} "
                                    f"({len(rep.offending)} entries, max ratio {rep.max_ratio:.3g})")
    grid = b.grid
    if grid is None:
        raise PreconditionError("empty sequence: the grid of the function variable is unknown")
    W1, J1 = grid
    B = b.coefficient_tensor(W1, J1)
    M4 = _third_tensor(B, average_matrix(W1, J1))
    return FiniteBilinearForm(DyadicRectangle(W1, b.index_window), J1, b.index_J, M4, "third_paraproduct")


# ---------------------------------------------------------------------------
# reduction to the special cancellation form
# ---------------------------------------------------------------------------

CANCELLATION_FAMILIES = ("T(1)", "T*(1)", "T1(1)", "T1*(1)",
                         "T(h x 1)", "T(1 x h)", "T*(h x 1)", "T*(1 x h)")


def cancellation_values(L: FiniteBilinearForm) -> dict:
    """The eight families of restricted values on Haar test functions, as arrays.

    1. ``L(1, h_S)``            2. ``L(h_R, 1)``
    3. ``L(h_R1 x 1, 1 x h_S2)`` 4. ``L(1 x h_R2, h_S1 x 1)``
    5. ``L(h_R1 x 1, h_S)``     6. ``L(1 x h_R2, h_S)``
    7. ``L(h_R, h_S1 x 1)``     8. ``L(h_R, 1 x h_S2)``
    with every h a detail Haar function (or a tensor of two).
    """
    M = L.tensor
    s1, s2 = np.sqrt(L.window.i1.length), np.sqrt(L.window.i2.length)
    D = slice(1, None)
    t1 = s1 * s2 * M[0, 0].copy()
    t1[0, 0] = 0.0
    t2 = s1 * s2 * M[:, :, 0, 0].copy()
    t2[0, 0] = 0.0
    return {
        "T(1)": t1,
        "T*(1)": t2,
        "T1(1)": s1 * s2 * M[D, 0, 0, D],
        "T1*(1)": s1 * s2 * M[0, D, D, 0],
        "T(h x 1)": s2 * M[D, 0, D, D],
        "T(1 x h)": s1 * M[0, D, D, D],
        "T*(h x 1)": s2 * M[D, D, D, 0],
        "T*(1 x h)": s1 * M[D, D, 0, D],
    }


def eight_cancellation_values(L: FiniteBilinearForm) -> dict:
    """Largest absolute value in each of the eight cancellation families."""
    return {k: float(np.abs(v).max()) if v.size else 0.0 for k, v in cancellation_values(L).items()}


@dataclass
class Reduction:
    tilde: FiniteBilinearForm
    paraproducts: dict
    symbols: dict
    residuals: dict

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())


def reduce_to_special_cancellation(L: FiniteBilinearForm) -> Reduction:
    """Subtract eight paraproducts so that every cancellation family vanishes.

    Stage one reads ``b1..b4`` off ``L`` (the restricted values on constants)
    and subtracts two classical and two mixed paraproducts; stage two reads
    the four interval-pair sequences off the remainder and subtracts the
    third-type paraproducts.  The classical and mixed paraproducts reproduce
    their own family among the first four and vanish on the other three (they
    do feed the restricted families, which is why those are read off the
    remainder); each third-type paraproduct reproduces its restricted family
    of the remainder and vanishes on the other seven.  The result therefore
    has all eight families zero.
    """
    if not isinstance(L, FiniteBilinearForm):
        raise ConfigError("reduction needs a matrix-backed form")
    W, J1, J2 = L.window, L.J1, L.J2
    n1, n2 = L.shape2
    M = L.tensor
    s1, s2 = np.sqrt(W.i1.length), np.sqrt(W.i2.length)
    P1, P2 = average_matrix(W.i1, J1), average_matrix(W.i2, J2)
    res = (J1, J2)

    B1 = s1 * s2 * M[0, 0].copy()
    B1[0, 0] = 0.0
    B2 = s1 * s2 * M[:, :, 0, 0].copy()
    B2[0, 0] = 0.0
    B3 = np.zeros((n1, n2))
    B3[1:, 1:] = s1 * s2 * M[1:, 0, 0, 1:]
    B4 = np.zeros((n1, n2))
    B4[1:, 1:] = s1 * s2 * M[0, 1:, 1:, 0].T   # B4[q1, p2] = L(1 x h_p2, h_q1 x 1)

    forms = {
        "b1": paraproduct_classical(HaarCoeffs(W, res, B1), extended=True),
        "b2": _transpose(paraproduct_classical(HaarCoeffs(W, res, B2), extended=True)),
        "b3": _transpose(paraproduct_mixed(HaarCoeffs(W, res, B3))),
        "b4": paraproduct_mixed(HaarCoeffs(W, res, B4)),
    }
    rest = L.matrix - sum(F.matrix for F in forms.values())
    R4 = rest.reshape(n1, n2, n1, n2)

    D = slice(1, None)
    # b6[R2, S2, R1] = rest(1 x h_R2, h_R1 x h_S2)
    B6 = np.zeros((n2, n2, n1))
    B6[D, D, D] = s1 * R4[0, D, D, D].transpose(0, 2, 1)
    # b5[R1, S1, S2] = rest(h_R1 x 1, h_S1 x h_S2)
    B5 = np.zeros((n1, n1, n2))
    B5[D, D, D] = s2 * R4[D, 0, D, D]
    # b7[Q1, P1, P2] = rest(h_P1 x h_P2, h_Q1 x 1)
    B7 = np.zeros((n1, n1, n2))
    B7[D, D, D] = s2 * R4[D, D, D, 0].transpose(2, 0, 1)
    # b8[Q2, P2, P1] = rest(h_P1 x h_P2, 1 x h_Q2)
    B8 = np.zeros((n2, n2, n1))
    B8[D, D, D] = s1 * R4[D, D, 0, D].transpose(2, 1, 0)

    third = {
        "b5": np.einsum("acd,db->abcd", B5, P2),
        "b6": np.einsum("bdc,ca->abcd", B6, P1),
        "b7": np.einsum("cab,bd->abcd", B7, P2),
        "b8": np.einsum("dba,ac->abcd", B8, P1),
    }
    for k, T4 in third.items():
        forms[k] = FiniteBilinearForm(W, J1, J2, T4, f"third_paraproduct_{k}")
    tilde_m = rest - sum(forms[k].matrix for k in third)
    tilde = FiniteBilinearForm(W, J1, J2, tilde_m, f"{L.name}~")

    symbols = {
        "b1": HaarCoeffs(W, res, B1), "b2": HaarCoeffs(W, res, B2),
        "b3": HaarCoeffs(W, res, B3), "b4": HaarCoeffs(W, res, B4),
        "b5": BmoSequence.from_tensor(B5, W.i1, J1, W.i2, J2),
        "b6": BmoSequence.from_tensor(B6, W.i2, J2, W.i1, J1),
        "b7": BmoSequence.from_tensor(B7, W.i1, J1, W.i2, J2),
        "b8": BmoSequence.from_tensor(B8, W.i2, J2, W.i1, J1),
    }
    return Reduction(tilde, forms, symbols, eight_cancellation_values(tilde))


def _transpose(F: FiniteBilinearForm) -> FiniteBilinearForm:
    return FiniteBilinearForm(F.window, F.J1, F.J2, F.matrix.T.copy(), F.name + "^t")


# ---------------------------------------------------------------------------
# forms from tensor kernels
# ---------------------------------------------------------------------------

def kernel_matrix_1d(k, window: DyadicInterval, J: int) -> np.ndarray:
    """``M[p, q] = int int h_p(t) h_q(x) k(x - t) dt dx`` from exact cell-pair integrals."""
    n = 1 << J
    e = window.left + window.length * np.arange(n + 1) / n
    a, b = e[:-1, None], e[1:, None]
    c, d = e[None, :-1], e[None, 1:]
    KC = k.double_cell_integral(a, b, c, d)     # x in cell a, t in cell c
    H = haar_matrix(window, J)
    return H @ KC.T @ H.T


def form_from_kernel(K, window: DyadicRectangle, J1: int, J2: int) -> FiniteBilinearForm:
    """Matrix of ``int int f(t) g(x) K(x, t) dt dx`` in the Haar basis, for tensor kernels."""
    if not getattr(K, "is_tensor", False):
        raise ConfigError("matrix assembly is implemented for tensor kernels only")
    M1 = kernel_matrix_1d(K.factors[0], window.i1, J1)
    M2 = kernel_matrix_1d(K.factors[1], window.i2, J2)
    return FiniteBilinearForm(window, J1, J2, np.kron(M1, M2), K.name)


def random_support_preserving(window: DyadicRectangle, J1: int, J2: int, seed: int,
                              density: float = 1.0) -> FiniteBilinearForm:
    """Random matrix supported on index pairs whose rectangles intersect."""
    rng = np.random.default_rng(seed)
    lab = class_labels(window, J1, J2)
    M = rng.standard_normal(lab.shape)
    keep = (lab >= 0) & (rng.random(lab.shape) < density)
    return FiniteBilinearForm(window, J1, J2, np.where(keep, M, 0.0), f"random_sp[{seed}]")

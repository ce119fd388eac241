"""Product singular kernels, their condition checkers and truncated kernel operators.

Point convention: a product kernel is evaluated as ``K(x1, x2, t1, t2)`` and the
associated form is ``Lambda(f, g) = int int f(t) g(x) K(x, t) dt dx``.  Checks
that concern the displacement ``u = x - t`` use ``K~(x, u) = K(x, x - u)``.

All checkers return measured constants; deciding pass or fail is left to the
caller.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .errors import ConfigError, NumericalFailure


@lru_cache(maxsize=64)
def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(n)


def _xlogx(u):
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(a > 0, u * np.log(np.where(a > 0, a, 1.0)), 0.0)


# ---------------------------------------------------------------------------
# one-dimensional convolution kernels k(x - t)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Kernel1D:
    """A convolution kernel ``k(x - t)`` with closed-form first and second primitives."""

    scale: float = 1.0
    name: str = "kernel"
    odd: bool = False
    delta: float = 1.0
    size_constant: float = 1.0

    def k(self, u):
        raise NotImplementedError

    def prim(self, u):
        raise NotImplementedError

    def prim2(self, u):
        raise NotImplementedError

    def __call__(self, x, t):
        return self.k(np.asarray(x, dtype=float) - np.asarray(t, dtype=float))

    def cell_integral(self, a, b, t):
        """``int_a^b k(x - t) dx`` (principal value when t lies inside)."""
        t = np.asarray(t, dtype=float)
        return self.prim(b - t) - self.prim(a - t)

    def double_cell_integral(self, a, b, c, d):
        """``int_a^b int_c^d k(x - t) dt dx`` (principal value across the diagonal)."""
        return self.prim2(b - c) - self.prim2(a - c) - self.prim2(b - d) + self.prim2(a - d)


@dataclass(frozen=True)
class Hilbert1D(Kernel1D):
    """``scale / (x - t)``."""

    name: str = "hilbert"
    odd: bool = True

    def k(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return self.scale / u

    def prim(self, u):
        with np.errstate(divide="ignore"):
            return self.scale * np.log(np.abs(np.asarray(u, dtype=float)))

    def prim2(self, u):
        u = np.asarray(u, dtype=float)
        return self.scale * (_xlogx(u) - u)


@dataclass(frozen=True)
class AbsInverse1D(Kernel1D):
    """``scale / |x - t|``; even, so its annulus integrals grow logarithmically."""

    name: str = "abs_inverse"

    def k(self, u):
        with np.errstate(divide="ignore"):
            return self.scale / np.abs(np.asarray(u, dtype=float))

    def prim(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return self.scale * np.sign(u) * np.log(np.abs(u))

    def prim2(self, u):
        a = np.abs(np.asarray(u, dtype=float))
        return self.scale * (_xlogx(a) - a)


@dataclass(frozen=True)
class SmoothHilbert1D(Kernel1D):
    """``scale * u / (u^2 + eps^2)``: a Hilbert kernel with the singularity smoothed at scale eps."""

    eps: float = 0.25
    name: str = "smooth_hilbert"
    odd: bool = True

    def k(self, u):
        u = np.asarray(u, dtype=float)
        return self.scale * u / (u * u + self.eps ** 2)

    def prim(self, u):
        u = np.asarray(u, dtype=float)
        return 0.5 * self.scale * np.log(u * u + self.eps ** 2)

    def prim2(self, u):
        u = np.asarray(u, dtype=float)
        e = self.eps
        return 0.5 * self.scale * (u * np.log(u * u + e * e) - 2 * u + 2 * e * np.arctan(u / e))


@dataclass(frozen=True)
class Lorentz1D(Kernel1D):
    """``scale / (1 + u^2)``: integrable and even."""

    name: str = "lorentz"

    def k(self, u):
        u = np.asarray(u, dtype=float)
        return self.scale / (1.0 + u * u)

    def prim(self, u):
        return self.scale * np.arctan(np.asarray(u, dtype=float))

    def prim2(self, u):
        u = np.asarray(u, dtype=float)
        return self.scale * (u * np.arctan(u) - 0.5 * np.log1p(u * u))


@dataclass(frozen=True)
class Zero1D(Kernel1D):
    name: str = "zero"
    odd: bool = True
    size_constant: float = 0.0

    def k(self, u):
        return np.zeros(np.shape(u))

    def prim(self, u):
        return np.zeros(np.shape(u))

    def prim2(self, u):
        return np.zeros(np.shape(u))


# ---------------------------------------------------------------------------
# product kernels
# ---------------------------------------------------------------------------

@dataclass
class ProductKernel:
    """``K(x1, x2, t1, t2)`` with declared smoothness exponent and size constant.

    ``factors`` is set for tensor kernels ``k1(x1 - t1) k2(x2 - t2)``, which
    enables fast exact paths in the operators built on top.
    """

    evaluator: Callable
    delta: float = 1.0
    declared_C: float = 1.0
    factors: tuple[Kernel1D, Kernel1D] | None = None
    name: str = "kernel"
    approximate: bool = False
    is_complex: bool = False
    convolution: bool = True

    def __call__(self, x1, x2, t1, t2):
        return self.evaluator(np.asarray(x1, float), np.asarray(x2, float), np.asarray(t1, float), np.asarray(t2, float))

    def displacement(self, x1, x2, u1, u2):
        x1, x2 = np.asarray(x1, float), np.asarray(x2, float)
        return self(x1, x2, x1 - np.asarray(u1, float), x2 - np.asarray(u2, float))

    @classmethod
    def tensor(cls, k1: Kernel1D, k2: Kernel1D, name: str | None = None, delta: float | None = None):
        def ev(x1, x2, t1, t2):
            return k1(x1, t1) * k2(x2, t2)
        return cls(ev, delta if delta is not None else min(k1.delta, k2.delta),
                   k1.size_constant * abs(k1.scale) * k2.size_constant * abs(k2.scale), (k1, k2),
                   name or f"{k1.name}x{k2.name}")

    def scaled(self, c: float) -> "ProductKernel":
        ev = self.evaluator
        factors = None
        if self.factors is not None:
            k1, k2 = self.factors
            factors = (type(k1)(**{**k1.__dict__, "scale": k1.scale * c}), k2)
        return ProductKernel(lambda *a: c * ev(*a), self.delta, abs(c) * self.declared_C, factors,
                             f"{c}*{self.name}", self.approximate, self.is_complex, self.convolution)

    @property
    def is_tensor(self) -> bool:
        return self.factors is not None


@dataclass
class MixedHomogeneityKernel(ProductKernel):
    """Convolution kernel ``K1(u) K2(u)`` in the displacement ``u = x - t``.

    ``K1(d u1, d^a u2) = d^-n K1(u)`` and ``K2(d^b u1, d u2) = d^-m K2(u)``.
    """

    K1: Callable | None = None
    K2: Callable | None = None
    a: float = 1.0
    b: float = 1.0
    n: float = 1.0
    m: float = 1.0

    @classmethod
    def build(cls, K1, K2, a, b, n, m, name="mixed_homogeneity", delta=1.0, C=1.0, is_complex=False):
        def ev(x1, x2, t1, t2):
            u1, u2 = x1 - t1, x2 - t2
            return K1(u1, u2) * K2(u1, u2)
        return cls(ev, delta, C, None, name, False, is_complex, True, K1, K2, a, b, n, m)

    def homogeneity_errors(self, samples: int = 200, seed: int = 0, dilations=(0.25, 0.5, 2.0, 4.0)) -> dict:
        """Largest relative homogeneity defect of each factor over sampled rays."""
        rng = np.random.default_rng(seed)
        u1 = rng.choice([-1, 1], samples) * 2.0 ** rng.uniform(-4, 3, samples)
        u2 = rng.choice([-1, 1], samples) * 2.0 ** rng.uniform(-4, 3, samples)
        e1 = e2 = 0.0
        for d in dilations:
            r1 = self.K1(d * u1, d ** self.a * u2) * d ** self.n
            ref1 = self.K1(u1, u2)
            e1 = max(e1, float(np.max(np.abs(r1 - ref1) / np.abs(ref1))))
            r2 = self.K2(d ** self.b * u1, d * u2) * d ** self.m
            ref2 = self.K2(u1, u2)
            e2 = max(e2, float(np.max(np.abs(r2 - ref2) / np.abs(ref2))))
        return {"K1": e1, "K2": e2}


def fefferman_stein_kernel(n: int = 1) -> MixedHomogeneityKernel:
    """``t1 / (t1^2 + t2^2) * 1 / (t1^2 + i t2)`` in the displacement (one-dimensional first variable)."""
    if n != 1:
        raise ConfigError("only the n = 1 instance is implemented")

    def K1(u1, u2):
        return u1 / (u1 * u1 + u2 * u2)

    def K2(u1, u2):
        return 1.0 / (u1 * u1 + 1j * u2)

    return MixedHomogeneityKernel.build(K1, K2, a=1.0, b=0.5, n=1, m=1, name="fefferman_stein",
                                        delta=1.0, C=1.0, is_complex=True)


def tabulated_kernel(path: str) -> ProductKernel:
    """Convolution kernel sampled on a grid of displacements, read from CSV.

    The file has a header row ``u1,u2,value`` and one row per grid node.
    Values between nodes come from multilinear interpolation, so the kernel is
    flagged approximate.
    """
    from scipy.interpolate import RegularGridInterpolator

    with open(path, newline="") as fh:
        rows = [r for r in csv.DictReader(fh)]
    if not rows or not {"u1", "u2", "value"} <= set(rows[0]):
        raise ConfigError("tabulated kernel CSV needs columns u1,u2,value")
    u1 = np.array([float(r["u1"]) for r in rows])
    u2 = np.array([float(r["u2"]) for r in rows])
    val = np.array([float(r["value"]) for r in rows])
    g1, g2 = np.unique(u1), np.unique(u2)
    if g1.size * g2.size != val.size:
        raise ConfigError("tabulated kernel samples do not form a full grid")
    grid = np.full((g1.size, g2.size), np.nan)
    grid[np.searchsorted(g1, u1), np.searchsorted(g2, u2)] = val
    interp = RegularGridInterpolator((g1, g2), grid, bounds_error=False, fill_value=0.0)

    def ev(x1, x2, t1, t2):
        u1_, u2_ = np.broadcast_arrays(x1 - t1, x2 - t2)
        return interp(np.stack([u1_.ravel(), u2_.ravel()], axis=-1)).reshape(u1_.shape)

    return ProductKernel(ev, 1.0, float(np.nanmax(np.abs(grid))), None, f"tabulated:{path}", approximate=True)


def _zero_kernel() -> ProductKernel:
    k = ProductKernel.tensor(Zero1D(), Zero1D(), "zero")
    k.declared_C = 0.0
    return k


KERNELS: dict[str, Callable[..., ProductKernel]] = {
    "tensor_hilbert": lambda scale=1.0: ProductKernel.tensor(Hilbert1D(scale), Hilbert1D(), "tensor_hilbert"),
    "abs_product": lambda: ProductKernel.tensor(AbsInverse1D(), AbsInverse1D(), "abs_product"),
    "zero": _zero_kernel,
    "smooth_tensor_hilbert": lambda eps=0.25: ProductKernel.tensor(
        SmoothHilbert1D(eps=eps), SmoothHilbert1D(eps=eps), "smooth_tensor_hilbert"),
    "lorentz_hilbert": lambda: ProductKernel.tensor(Lorentz1D(), Hilbert1D(), "lorentz_hilbert"),
    "fefferman_stein": fefferman_stein_kernel,
    "tabulated": tabulated_kernel,
}


def kernel_from_registry(name: str, params: dict | None = None) -> ProductKernel:
    if name not in KERNELS:
        raise ConfigError(f"unknown kernel {name!r}; known: {sorted(KERNELS)}")
    try:
        return KERNELS[name](**(params or {}))
    except TypeError as exc:
        raise ConfigError(f"bad parameters for kernel {name!r}: {exc}") from exc


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------

SEPARATION_RANGE = (-8.0, 3.0)  # log2 range of |x_i - t_i|


def _separations(rng, n, lo=SEPARATION_RANGE[0], hi=SEPARATION_RANGE[1]):
    return rng.choice([-1.0, 1.0], n) * 2.0 ** rng.uniform(lo, hi, n)


def _grid_separations(per_axis: int = 12):
    mags = 2.0 ** np.linspace(*SEPARATION_RANGE, per_axis)
    return np.r_[-mags[::-1], mags]


def sample_points(samples: int, seed: int):
    """Points ``(x, u)`` with ``u = x - t``: a deterministic log grid plus seeded random draws."""
    rng = np.random.default_rng(seed)
    g = _grid_separations()
    G1, G2 = np.meshgrid(g, g, indexing="ij")
    u1 = np.r_[G1.ravel(), _separations(rng, samples)]
    u2 = np.r_[G2.ravel(), _separations(rng, samples)]
    x1 = np.r_[np.zeros(G1.size), rng.uniform(-1, 1, samples)]
    x2 = np.r_[np.zeros(G1.size), rng.uniform(-1, 1, samples)]
    return x1, x2, u1, u2


# ---------------------------------------------------------------------------
# size and smoothness
# ---------------------------------------------------------------------------

def check_size(K: ProductKernel, samples: int = 4000, seed: int = 0) -> float:
    """``sup |K(x,t)| |x1 - t1| |x2 - t2|`` over sampled points."""
    x1, x2, u1, u2 = sample_points(samples, seed)
    v = np.abs(K.displacement(x1, x2, u1, u2)) * np.abs(u1) * np.abs(u2)
    return float(np.max(v))


def double_difference(K: ProductKernel, x, t, xp, tp):
    """``K(x,t) - K((x1,x2'),(t1,t2')) - K((x1',x2),(t1',t2)) + K(x',t')``."""
    x1, x2 = x
    t1, t2 = t
    y1, y2 = xp
    s1, s2 = tp
    return K(x1, x2, t1, t2) - K(x1, y2, t1, s2) - K(y1, x2, s1, t2) + K(y1, y2, s1, s2)


def _perturbations(rng, u, n_random):
    """Perturbations (dx, dt) with ``2 (|dx| + |dt|) <= |u|``, including the extreme corners."""
    a = np.abs(u)
    corners = [(0.5, 0.0), (-0.5, 0.0), (0.0, 0.5), (0.0, -0.5), (0.25, -0.25), (-0.25, 0.25)]
    out = [(np.full_like(u, cx) * a, np.full_like(u, ct) * a) for cx, ct in corners]
    for _ in range(n_random):
        total = 0.5 * a * rng.uniform(0, 1, u.size) ** 0.5
        share = rng.uniform(0, 1, u.size)
        out.append((rng.choice([-1, 1], u.size) * total * share,
                    rng.choice([-1, 1], u.size) * total * (1 - share)))
    return out


def check_product_smoothness(K: ProductKernel, samples: int = 2000, seed: int = 0, random_perturbations: int = 4) -> float:
    """Sup of the normalised double difference over admissible sampled quadruples."""
    rng = np.random.default_rng(seed)
    x1, x2, u1, u2 = sample_points(samples, seed)
    t1, t2 = x1 - u1, x2 - u2
    d = K.delta
    p1 = _perturbations(rng, u1, random_perturbations)
    p2 = _perturbations(rng, u2, random_perturbations)
    best = 0.0
    for dx1, dt1 in p1:
        for dx2, dt2 in p2:
            s1 = np.abs(dx1) + np.abs(dt1)
            s2 = np.abs(dx2) + np.abs(dt2)
            ok = (2 * s1 <= np.abs(u1)) & (2 * s2 <= np.abs(u2)) & (s1 > 0) & (s2 > 0)
            if not ok.any():
                continue
            dd = double_difference(K, (x1, x2), (t1, t2), (x1 + dx1, x2 + dx2), (t1 + dt1, t2 + dt2))
            bound = (s1 ** d * np.abs(u1) ** (-1 - d)) * (s2 ** d * np.abs(u2) ** (-1 - d))
            r = np.abs(dd[ok]) / bound[ok]
            best = max(best, float(np.max(r)))
    return best


def check_partial_smoothness(K: ProductKernel, samples: int = 2000, seed: int = 0, axis: int = 0,
                             random_perturbations: int = 4) -> float:
    """Single-coordinate smoothness: ``|K(x,t) - K(x',t')|`` with only coordinate ``axis`` moved."""
    rng = np.random.default_rng(seed)
    x1, x2, u1, u2 = sample_points(samples, seed)
    t1, t2 = x1 - u1, x2 - u2
    d = K.delta
    u_move, u_keep = (u1, u2) if axis == 0 else (u2, u1)
    best = 0.0
    for dx, dt in _perturbations(rng, u_move, random_perturbations):
        s = np.abs(dx) + np.abs(dt)
        ok = (2 * s <= np.abs(u_move)) & (s > 0)
        if axis == 0:
            diff = K(x1, x2, t1, t2) - K(x1 + dx, x2, t1 + dt, t2)
        else:
            diff = K(x1, x2, t1, t2) - K(x1, x2 + dx, t1, t2 + dt)
        bound = s ** d * np.abs(u_move) ** (-1 - d) / np.abs(u_keep)
        best = max(best, float(np.max(np.abs(diff[ok]) / bound[ok])))
    return best


# ---------------------------------------------------------------------------
# annulus integrals
# ---------------------------------------------------------------------------

def _log_nodes(a: float, b: float, n: int):
    """Gauss-Legendre nodes in ``v = ln u`` on ``[a, b]``, one panel per unit of ``ln``."""
    la, lb = np.log(a), np.log(b)
    panels = max(1, int(np.ceil(lb - la)))
    e = np.linspace(la, lb, panels + 1)
    x, w = gauss_legendre(n)
    v = (0.5 * (e[:-1, None] + e[1:, None]) + 0.5 * np.diff(e)[:, None] * x[None, :]).ravel()
    wv = (0.5 * np.diff(e)[:, None] * w[None, :]).ravel()
    u = np.exp(v)
    return u, wv * u


def _refine(compute, tol: float, start: int, max_nodes: int, what: str):
    n = start
    prev = compute(n)
    while True:
        n2 = 2 * n
        cur = compute(n2)
        if np.all(np.abs(cur - prev) <= tol * np.maximum(1.0, np.abs(cur))):
            return cur
        if n2 >= max_nodes:
            raise NumericalFailure(f"{what}: quadrature did not settle (last change {np.max(np.abs(cur - prev)):.3e})")
        prev, n = cur, n2


def annulus_integral(K: ProductKernel, a1, b1, a2, b2, x=(0.0, 0.0), tol: float = 1e-10,
                     start: int = 8, max_nodes: int = 256) -> complex | float:
    """``int_{a1<|u1|<b1} int_{a2<|u2|<b2} K~(x, u) du`` with the four sign patterns paired per node."""

    def compute(n):
        u1, w1 = _log_nodes(a1, b1, n)
        u2, w2 = _log_nodes(a2, b2, n)
        U1, U2 = np.meshgrid(u1, u2, indexing="ij")
        s = 0
        for s1 in (1.0, -1.0):
            for s2 in (1.0, -1.0):
                s = s + K.displacement(x[0], x[1], s1 * U1, s2 * U2)
        return np.asarray(w1 @ s @ w2)

    v = _refine(compute, tol, start, max_nodes, "annulus integral")
    return complex(v) if np.iscomplexobj(v) else float(v)


def annulus_closed_form_abs(a1, b1, a2, b2) -> float:
    """Integral of ``1/(|u1||u2|)`` over the product annulus, all four quadrants."""
    return 4.0 * np.log(b1 / a1) * np.log(b2 / a2)


@dataclass
class AnnulusReport:
    constant: float
    values: list = field(default_factory=list)
    growing: bool = False
    small_sup: float = 0.0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.growing and not self.failures


def check_annulus_cancellation(K: ProductKernel, alphas, betas, x=(0.0, 0.0), tol: float = 1e-10) -> AnnulusReport:
    """Sup of ``|int over the product annulus|`` over all ``(alpha_i, beta_i)`` pairs from the lists.

    Growth is flagged when the sup over the full grid exceeds 1.5 times the
    sup over the pairs whose log aspect ``ln(beta/alpha)`` is at most half the
    largest one.
    """
    pairs = [(a, b) for a in alphas for b in betas if a < b]
    if not pairs:
        raise ValueError("need at least one alpha < beta pair")
    lmax = max(np.log(b / a) for a, b in pairs)
    rows, fails = [], []
    sup_all = sup_small = 0.0
    for a1, b1 in pairs:
        for a2, b2 in pairs:
            try:
                v = abs(annulus_integral(K, a1, b1, a2, b2, x, tol))
            except NumericalFailure as exc:
                fails.append(((a1, b1, a2, b2), str(exc)))
                continue
            rows.append((a1, b1, a2, b2, v))
            sup_all = max(sup_all, v)
            if max(np.log(b1 / a1), np.log(b2 / a2)) <= lmax / 2 + 1e-12:
                sup_small = max(sup_small, v)
    growing = sup_all > 1.5 * sup_small and sup_all > 1e-9
    return AnnulusReport(sup_all, rows, growing, sup_small, fails)


def annulus_profile(K: ProductKernel, a: float, b: float, u_other, axis: int, x=(0.0, 0.0),
                    tol: float = 1e-10, start: int = 8, max_nodes: int = 256):
    """``int_{a<|u_axis|<b} K~(x, u) du_axis`` for every value of the other displacement."""
    u_other = np.asarray(u_other, dtype=float)

    def compute(n):
        u, w = _log_nodes(a, b, n)
        if axis == 1:
            vals = K.displacement(x[0], x[1], u_other[:, None], u[None, :]) + \
                K.displacement(x[0], x[1], u_other[:, None], -u[None, :])
        else:
            vals = K.displacement(x[0], x[1], u[None, :], u_other[:, None]) + \
                K.displacement(x[0], x[1], -u[None, :], u_other[:, None])
        return vals @ w

    return _refine(compute, tol, start, max_nodes, "annulus profile")


def check_mixed_kernel_cancellation(K: ProductKernel, alphas2, betas2, samples: int = 400, seed: int = 0,
                                    tol: float = 1e-10) -> dict:
    """Size and smoothness constants of the one-variable kernels obtained by integrating out one displacement.

    For axis 2: ``K1(u1) = int_{a<|u2|<b} K~(0, u1, u2) du2`` and its size
    ``sup |K1(u1)| |u1|`` and smoothness
    ``sup |K1(u1) - K1(u1')| / (|u1 - u1'|^delta |u1|^{-1-delta})``.  Axis 1 is
    symmetric.  Every ``(alpha, beta)`` pair from the lists is used.
    """
    rng = np.random.default_rng(seed)
    grid = _grid_separations(16)
    u = np.r_[grid, _separations(rng, samples)]
    shift_frac = np.r_[np.full(grid.size, 0.5), rng.uniform(-0.5, 0.5, samples)]
    up = u + shift_frac * np.abs(u)
    d = K.delta
    out = {}
    for axis, key in ((1, "K1"), (0, "K2")):
        size = smooth = 0.0
        for a in alphas2:
            for b in betas2:
                if a >= b:
                    continue
                v = annulus_profile(K, a, b, u, axis, tol=tol)
                vp = annulus_profile(K, a, b, up, axis, tol=tol)
                size = max(size, float(np.max(np.abs(v) * np.abs(u))))
                s = np.abs(up - u)
                ok = s > 0
                smooth = max(smooth, float(np.max(np.abs(v - vp)[ok] / (s[ok] ** d * np.abs(u[ok]) ** (-1 - d)))))
        out[key] = {"size": size, "smoothness": smooth}
    return out


# ---------------------------------------------------------------------------
# principal value pairings in one variable
# ---------------------------------------------------------------------------

def _panel_nodes(a, b, n, panels):
    e = np.linspace(a, b, panels + 1)
    x, w = gauss_legendre(n)
    pts = 0.5 * (e[:-1, None] + e[1:, None]) + 0.5 * np.diff(e)[:, None] * x[None, :]
    wts = 0.5 * np.diff(e)[:, None] * w[None, :]
    return pts.ravel(), wts.ravel()


@dataclass(frozen=True)
class PairingRule:
    """Quadrature nodes ``(x, t)`` with weights that already include ``psi(x) phi(t)``.

    The nodes depend only on the two supports, so one rule serves every
    kernel paired against the same bumps.
    """

    x: np.ndarray
    t: np.ndarray
    w: np.ndarray

    def __call__(self, k: Callable):
        return _real_if(np.sum(self.w * k(self.x, self.t)))


def pairing_rule(phi: Callable, psi: Callable, phi_supp, psi_supp, order: int = 16,
                 panels: int = 8, depth: int = 48, eps: float = 0.0) -> PairingRule:
    """Nodes and weights for ``int int psi(x) phi(t) k(x, t) dt dx`` as a principal value across ``x = t``.

    Separated supports use a plain product rule.  Otherwise the pairing is
    written in the displacement ``u = x - t`` and the nodes for ``u`` and
    ``-u`` carry matching weights, so odd singular parts cancel; the ``u``
    range is split geometrically toward 0.  ``eps > 0`` truncates
    ``|u| <= eps``.
    """
    pa, pb = phi_supp
    qa, qb = psi_supp
    if pb < qa or qb < pa:
        t, wt = _panel_nodes(pa, pb, order, panels)
        x, wx = _panel_nodes(qa, qb, order, panels)
        w = (psi(x) * wx)[:, None] * (phi(t) * wt)[None, :]
        X, T = np.meshgrid(x, t, indexing="ij")
        return PairingRule(X, T, w)
    U = max(abs(qb - pa), abs(qa - pb))
    lo = max(eps, U * 2.0 ** (-depth))
    edges = U * 2.0 ** (-np.arange(0, depth + 1, dtype=float))
    kinks = np.abs([qa - pa, qb - pb, qa - pb, qb - pa])
    edges = np.unique(np.clip(np.r_[edges, kinks], lo, U))
    xg, wg = gauss_legendre(order)
    u = (0.5 * (edges[:-1, None] + edges[1:, None]) + 0.5 * np.diff(edges)[:, None] * xg[None, :]).ravel()
    wu = (0.5 * np.diff(edges)[:, None] * wg[None, :]).ravel()
    xs, ws = _panel_nodes(0.0, 1.0, order, panels)
    Xs, Ts, Ws = [], [], []
    for sgn in (1.0, -1.0):
        us = sgn * u
        # x runs over supp(psi) intersected with supp(phi) + u
        a = np.maximum(qa, pa + us)
        b = np.minimum(qb, pb + us)
        width = np.maximum(b - a, 0.0)
        X = a[:, None] + width[:, None] * xs[None, :]
        T = X - us[:, None]
        Xs.append(X)
        Ts.append(T)
        Ws.append(psi(X) * phi(T) * (wu[:, None] * width[:, None] * ws[None, :]))
    # interleave the two signs so that u and -u sit next to each other
    return PairingRule(np.stack(Xs, 1), np.stack(Ts, 1), np.stack(Ws, 1))


def pv_pairing(k: Callable, phi: Callable, psi: Callable, phi_supp, psi_supp, order: int = 16,
               panels: int = 8, depth: int = 48, eps: float = 0.0) -> complex | float:
    """``int int psi(x) phi(t) k(x, t) dt dx`` as a principal value across ``x = t`` (see :func:`pairing_rule`)."""
    return pairing_rule(phi, psi, phi_supp, psi_supp, order, panels, depth, eps)(k)


def _real_if(v):
    v = np.asarray(v)
    if np.iscomplexobj(v):
        return complex(v)
    return float(v)


def bump_pairing(k1: Kernel1D | Callable, phi, psi, order: int = 16, panels: int = 8) -> float:
    """``<k phi, psi>`` for two analytic bumps with ``support`` attributes."""
    return pv_pairing(k1, phi, psi, phi.support, psi.support, order=order, panels=panels)


# ---------------------------------------------------------------------------
# truncated operator on a grid
# ---------------------------------------------------------------------------

def _axis_matrix(k: Kernel1D, centers: np.ndarray, h: float, eps: float) -> np.ndarray:
    d = centers[:, None] - centers[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        m = np.where(np.abs(d) > eps, k.k(d), 0.0)
    return m * h


def apply_kernel_operator(K: ProductKernel, f, eps=(1e-3, 1e-3), max_cells: int = 1 << 12):
    """Doubly truncated midpoint-rule operator ``sum_{|x_i - t_i| > eps_i} f(t) K(x, t) dA(t)``.

    Tensor kernels use the separable form ``A1 F A2^T``.  Other kernels are
    evaluated cell by cell and are limited to ``max_cells`` grid cells.
    Complex kernels return a ``(real, imag)`` pair of signals.
    """
    from .signals import Signal2D

    e1, e2 = eps
    if e1 <= 0 or e2 <= 0:
        raise ValueError("truncation radii must be positive")
    W = f.window
    n1, n2 = f.values.shape
    h1, h2 = W.i1.length / n1, W.i2.length / n2
    c1 = W.i1.left + h1 * (np.arange(n1) + 0.5)
    c2 = W.i2.left + h2 * (np.arange(n2) + 0.5)
    if K.is_tensor:
        A1 = _axis_matrix(K.factors[0], c1, h1, e1)
        A2 = _axis_matrix(K.factors[1], c2, h2, e2)
        return Signal2D(W, f.J1, f.J2, A1 @ f.values @ A2.T)
    if n1 * n2 > max_cells:
        raise ValueError(f"generic kernels are limited to {max_cells} cells")
    X1, X2 = np.meshgrid(c1, c2, indexing="ij")
    out = np.zeros((n1, n2), dtype=complex if K.is_complex else float)
    for i in range(n1):
        for j in range(n2):
            mask = (np.abs(c1[i] - X1) > e1) & (np.abs(c2[j] - X2) > e2)
            with np.errstate(divide="ignore", invalid="ignore"):
                kv = K(c1[i], c2[j], X1, X2)
            out[i, j] = np.sum(np.where(mask, kv, 0.0) * f.values) * h1 * h2
    if K.is_complex:
        return Signal2D(W, f.J1, f.J2, out.real), Signal2D(W, f.J1, f.J2, out.imag)
    return Signal2D(W, f.J1, f.J2, out)


def hilbert_indicator(x, a: float, b: float):
    """Closed form ``int_a^b dt / (x - t)`` for x outside ``[a, b]``."""
    x = np.asarray(x, dtype=float)
    return np.log(np.abs(x - a)) - np.log(np.abs(x - b))


# ---------------------------------------------------------------------------
# mixed weak boundedness / kernel condition
# ---------------------------------------------------------------------------

def restricted_pairing(K: ProductKernel, axis: int, x_free: float, t_free: float, phi, psi,
                       order: int = 16, panels: int = 8, rule: PairingRule | None = None):
    """``int int phi(t) psi(x) K dt dx`` over coordinate ``axis``, the other coordinate frozen at (x_free, t_free).

    A precomputed ``rule`` for the same bumps skips rebuilding the nodes.
    """
    if axis == 1:
        def k(x, t):
            return K(x_free, x, t_free, t)
    else:
        def k(x, t):
            return K(x, x_free, t, t_free)
    if rule is None:
        rule = pairing_rule(phi, psi, phi.support, psi.support, order=order, panels=panels)
    return rule(k)


@dataclass
class MixedWBCZReport:
    size: float
    smoothness: float
    samples: int


def mixed_wbcz_check(K: ProductKernel, I, pairs=None, samples: int = 24, seed: int = 0, axis: int = 1,
                     support: float = 3.0) -> MixedWBCZReport:
    """Measured constants for the mixed weak-boundedness / kernel condition.

    The bumps ``phi_I`` are the L2-normalised analytic bumps adapted to I in
    the integrated coordinate ``axis``; the other coordinate is a point pair
    ``(t, x)``.  Reports ``sup |Lambda_{t,x}(phi_I, phi_I)| |t - x|`` and the
    normalised difference quotient over admissible perturbations.
    """
    from .signals import AnalyticBump

    rng = np.random.default_rng(seed)
    lo, hi = I.dilate(support)
    # an even bump and an odd one, so that odd kernels are not trivially zero on the diagonal pair
    bumps = (AnalyticBump(lo, hi), AnalyticBump(lo, hi, mean_zero=True))
    if pairs is None:
        t = rng.uniform(-1, 1, samples)
        x = t + _separations(rng, samples, -4.0, 3.0)
        pairs = list(zip(t, x))
    d = K.delta
    size = smooth = 0.0
    rules = [(pairing_rule(phi, psi, phi.support, psi.support), phi, psi) for phi in bumps for psi in bumps]
    for t, x in pairs:
        gap = abs(t - x)
        for rule, phi, psi in rules:
            base = restricted_pairing(K, axis, x, t, phi, psi, rule=rule)
            size = max(size, abs(base) * gap)
            for fx, ft in ((0.2, 0.0), (0.0, -0.2), (0.1, 0.1), (-0.15, 0.05)):
                xp, tp = x + fx * gap, t + ft * gap
                s = abs(xp - x) + abs(tp - t)
                v = restricted_pairing(K, axis, xp, tp, phi, psi, rule=rule)
                smooth = max(smooth, abs(v - base) / (s ** d * gap ** (-1 - d)))
    return MixedWBCZReport(float(size), float(smooth), len(pairs))

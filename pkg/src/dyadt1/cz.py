"""Calderon-Zygmund decomposition on a dyadic grid and the weak-type experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dyadic import DyadicInterval
from .errors import PreconditionError
from .signals import AnalyticBump, Signal1D, cell_range, haar_forward
from .square_functions import ShiftSpec, modified_square_fn, probe_signals


@dataclass
class CZSplit:
    lam: float
    good: Signal1D
    bad_pieces: list[tuple[DyadicInterval, Signal1D]] = field(default_factory=list)
    bad_set_measure: float = 0.0

    @property
    def intervals(self) -> list[DyadicInterval]:
        return [I for I, _ in self.bad_pieces]

    def bad(self) -> Signal1D:
        out = Signal1D.zeros(self.good.window, self.good.J)
        for _, b in self.bad_pieces:
            out.values += b.values
        return out

    def reconstruct(self) -> Signal1D:
        return self.good + self.bad()


def cz_decompose(f: Signal1D, lam: float) -> CZSplit:
    """Split ``f = g + sum_I b_I`` at height ``lam``.

    The selected intervals are the maximal dyadic subintervals of the window
    on which the average of ``|f|`` exceeds ``lam``, found by a top-down walk
    that stops at the first hit.  The window itself must have average at most
    ``lam``; otherwise no maximal family inside the window exists.
    """
    if not lam > 0:
        raise PreconditionError("lambda must be positive")
    W, J = f.window, f.J
    absf = np.abs(f.values)
    total = math.fsum(absf)
    if total / absf.size > lam:
        raise PreconditionError(
            f"lambda={lam} is below the average of |f| over the window ({total / absf.size}); "
            "the stopping family would be the whole window")
    selected: list[DyadicInterval] = []
    stack = [W]
    while stack:
        I = stack.pop()
        lo, hi = cell_range(W, J, I)
        avg = math.fsum(absf[lo:hi]) / (hi - lo)
        if avg > lam:
            selected.append(I)
        elif hi - lo > 1:
            a, b = I.children()
            stack.extend((b, a))
    selected.sort()
    good = f.copy()
    pieces = []
    for I in selected:
        lo, hi = cell_range(W, J, I)
        m = math.fsum(f.values[lo:hi]) / (hi - lo)
        piece = Signal1D.zeros(W, J)
        piece.values[lo:hi] = f.values[lo:hi] - m
        good.values[lo:hi] = m
        pieces.append((I, piece))
    measure = math.fsum(I.length for I in selected)
    return CZSplit(lam, good, pieces, measure)


def check_cz(f: Signal1D, split: CZSplit) -> dict:
    """Measured violations of the decomposition invariants (all zero when it is valid)."""
    W, J = f.window, f.J
    recon = np.abs(split.reconstruct().values - f.values)
    scale = max(1.0, float(np.max(np.abs(f.values))))
    out = {
        "additivity": float(recon.max()) / scale,
        "good_sup_excess": max(0.0, float(np.max(np.abs(split.good.values))) - 2 * split.lam),
        "measure_excess": max(0.0, split.bad_set_measure - math.fsum(np.abs(f.values)) * f.cell / split.lam),
        "mean_zero": 0.0,
        "support": 0.0,
        "overlap": 0.0,
        "maximality": 0.0,
    }
    absf = np.abs(f.values)
    for (I, b) in split.bad_pieces:
        lo, hi = cell_range(W, J, I)
        mass = math.fsum(np.abs(b.values[lo:hi])) * f.cell
        out["mean_zero"] = max(out["mean_zero"], abs(math.fsum(b.values)) * f.cell / max(mass, 1e-300) if mass else 0.0)
        outside = np.abs(np.r_[b.values[:lo], b.values[hi:]])
        out["support"] = max(out["support"], float(outside.max()) if outside.size else 0.0)
        if I != W:
            plo, phi = cell_range(W, J, I.parent())
            out["maximality"] = max(out["maximality"], math.fsum(absf[plo:phi]) / (phi - plo) - split.lam)
    ivs = sorted(split.intervals, key=lambda I: I.left)
    for a, b in zip(ivs, ivs[1:]):
        if a.right > b.left:
            out["overlap"] = 1.0
    out["maximality"] = max(0.0, out["maximality"])
    return out

# ---------------------------------------------------------------------------
# low oscillation sum
# ---------------------------------------------------------------------------


def low_oscillation_sum(f: Signal1D, Iprime: DyadicInterval, bumps: str = "smooth",
                        support: float = 3.0, mean_tol: float = 1e-10) -> tuple[float, float]:
    """``sum |<f, phi_I>| |I|^{1/2}`` over dyadic I in the window not inside ``3 I'``.

    ``bumps`` is ``"haar"`` (phi_I = h_I) or ``"smooth"`` (L2-normalised
    bumps of the fixed profile supported on ``support * I``).  Returns the sum
    and its ratio to ``||f||_1``.
    """
    W, J = f.window, f.J
    lo, hi = cell_range(W, J, Iprime)
    l1 = math.fsum(np.abs(f.values)) * f.cell
    if l1 == 0:
        return 0.0, 0.0
    if np.any(f.values[:lo] != 0) or np.any(f.values[hi:] != 0):
        raise PreconditionError("f must be supported in I'")
    if abs(math.fsum(f.values)) * f.cell > mean_tol * max(l1, 1.0):
        raise PreconditionError("f must have integral zero")
    a3, b3 = Iprime.dilate(3.0)
    total = 0.0
    if bumps == "haar":
        c = haar_forward(f)
        from .signals import basis_support
        lv, of = basis_support(W, J)
        L = 2.0 ** (-lv[1:])
        left = of[1:] * L
        outside = ~((left >= a3) & (left + L <= b3))
        total = math.fsum(np.abs(c.array[1:][outside]) * np.sqrt(L[outside]))
    elif bumps == "smooth":
        nodes, weights = np.polynomial.legendre.leggauss(8)
        e = f.edges[lo:hi + 1]
        x = 0.5 * (e[:-1, None] + e[1:, None]) + 0.5 * f.cell * nodes[None, :]
        fv = f.values[lo:hi]
        terms = []
        for d in range(J - 3):
            lvl = W.level + d
            L = 2.0 ** (-lvl)
            # only bumps whose support meets I' contribute
            o0 = int(np.floor((Iprime.left - support * L) / L))
            o1 = int(np.ceil((Iprime.right + support * L) / L))
            for o in range(max(o0, W.offset << d), min(o1, (W.offset + 1) << d)):
                I = DyadicInterval(lvl, o)
                if I.left >= a3 and I.right <= b3:
                    continue
                ab = AnalyticBump(*I.dilate(support))
                avg = 0.5 * (ab(x) @ weights)
                terms.append(abs(float(np.dot(fv, avg)) * f.cell) * np.sqrt(L))
        total = math.fsum(terms)
    else:
        raise ValueError(f"unknown bump family {bumps!r}")
    return total, total / l1

# ---------------------------------------------------------------------------
# weak type experiment
# ---------------------------------------------------------------------------


def weak_type_bound(k: int, n: int) -> float:
    return 2.0 ** (-k) * n + 1.0


def weak_type_constant(f: Signal1D, spec: ShiftSpec) -> float:
    """``sup_lambda lambda |{S~f > lambda}| / ||f||_1`` for one signal, exactly."""
    l1 = float(np.sum(np.abs(f.values)) * f.cell)
    if l1 == 0:
        return 0.0
    return modified_square_fn(f, spec).weak_type_sup() / l1


def weak_type_probes(window: DyadicInterval, J: int, trials: int, rng_seed) -> list[Signal1D]:
    """Probe set: Haar functions at several depths, single-cell spikes and the mixed random set."""
    out = []
    for d in range(0, J, max(1, J // 5)):
        out.append(Signal1D.haar(window, J, DyadicInterval(window.level + d, window.offset << d)))
    spike = Signal1D.zeros(window, J)
    spike.values[(1 << J) // 3] = 1.0
    out.append(spike)
    out.extend(probe_signals(window, J, trials, int(np.random.default_rng(rng_seed).integers(2 ** 63))))
    return out


def weak_type_cell(k: int, n: int, trials: int, seed: int, index: int, window: DyadicInterval, J: int,
                   selector: str = "leftmost") -> tuple[int, int, float, int]:
    spec = ShiftSpec(k, n, selector, seed)
    probes = weak_type_probes(window, J, trials, [seed, index])
    vals = [weak_type_constant(f, spec) for f in probes]
    best = int(np.argmax(vals))
    return k, n, float(vals[best]), best


def weak_type_experiment(ks, ns, trials: int, seed: int, window: DyadicInterval | None = None,
                         J: int = 10, selector: str = "leftmost", executor=None) -> list[tuple]:
    """Rows ``(k, n, constant, argmax_probe)``; deterministic given ``seed``.

    Each grid cell uses its own probe set seeded from ``(seed, cell index)``,
    so a parallel ``executor`` (anything with ``map``) gives identical rows.
    """
    window = window or DyadicInterval(0, 0)
    cells = [(k, n) for k in ks for n in ns]
    args = [(k, n, trials, seed, i, window, J, selector) for i, (k, n) in enumerate(cells)]
    if executor is None:
        return [weak_type_cell(*a) for a in args]
    return list(executor.map(_star_weak, args))


def _star_weak(a):
    return weak_type_cell(*a)

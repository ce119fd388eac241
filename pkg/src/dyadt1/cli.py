"""Command-line experiment harness.

Every command reads a JSON configuration (``--config``), applies ``--set
key=value`` overrides on top of the command defaults, writes CSV/JSON
artifacts into the output directory and exits with

* 0 when every configured threshold holds,
* 1 when a threshold fails (the failing cells are printed),
* 2 on a numerical failure,
* 3 on a configuration error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, NumericalFailure, PreconditionError
from . import report

log = logging.getLogger("dyadt1")

EXIT_OK, EXIT_THRESHOLD, EXIT_NUMERICAL, EXIT_CONFIG = 0, 1, 2, 3

DEFAULTS: dict[str, dict] = {
    "verify-square-fn": {
        "ks": list(range(-6, 7)), "ns": [1, 2, 4, 8, 16, 32, 64], "ps": [4 / 3, 2.0, 4.0],
        "J": 10, "trials": 12, "seed": 0, "selector": "leftmost", "threshold": 10.0,
        "input": "probes", "figures": False,
    },
    "kernel-audit": {
        "kernel": "tensor_hilbert", "params": {}, "samples": 2000, "seed": 0,
        "alphas": [0.01, 0.1, 1.0], "betas": [0.1, 1.0, 10.0, 100.0],
        "wbcz_interval": [0, 0], "wbcz_samples": 12, "stability": 0.1, "size_tolerance": 1e-6,
    },
    "bump-decay": {
        "kernel": "tensor_hilbert", "params": {}, "es": [1, 2, 3, 4, 5], "ms": [2, 4, 8, 16, 32],
        "support": 1.0, "min_eccentricity_slope": 0.9, "max_distance_slope": -1.4, "min_r2": 0.95,
        "figures": False,
    },
    "reduce": {
        "source": "random", "J1": 3, "J2": 3, "seed": 0, "kernel": "smooth_tensor_hilbert", "params": {},
        "tolerance": 1e-10,
    },
    "weak-type": {
        "ks": list(range(-6, 7)), "ns": [1, 2, 4, 8, 16, 32, 64], "J": 10, "trials": 8, "seed": 0,
        "selector": "leftmost", "threshold": 10.0, "input": "probes", "figures": False,
    },
    "represent": {
        "source": "random", "operators": 20, "pairs": 100, "J1": 4, "J2": 4, "seed": 0, "tolerance": 1e-10,
    },
    "t1-limit": {
        "kernel": "tensor_hilbert", "params": {}, "kmax": 10, "J": 6, "rectangle": [[0, 1], [1, 2]],
        "window_level": -2, "k_from": 3, "delta": 1.0, "figures": False,
    },
}


# ---------------------------------------------------------------------------
# configuration handling
# ---------------------------------------------------------------------------

def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(config: dict, items) -> dict:
    """``key=value`` pairs; dotted keys address nested objects, values parse as JSON when possible."""
    out = json.loads(json.dumps(config))
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot set {key!r}: {p!r} is not an object")
        node[parts[-1]] = _parse_value(val)
    return out


def load_config(command: str, path: str | None, overrides) -> dict:
    cfg = dict(DEFAULTS[command])
    if path:
        try:
            user = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path!r}: {exc}") from exc
        if not isinstance(user, dict):
            raise ConfigError("the config file must hold a JSON object")
        if user.get("command", command) != command:
            raise ConfigError(f"config is for {user['command']!r}, not {command!r}")
        user.pop("command", None)
        cfg.update(user)
    cfg = apply_overrides(cfg, overrides)
    unknown = set(cfg) - set(DEFAULTS[command])
    if unknown:
        raise ConfigError(f"unknown config keys for {command}: {sorted(unknown)}")
    cfg["command"] = command
    return cfg


@contextmanager
def _executor(jobs: int):
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            yield ex
    else:
        yield None


def _map(ex, fn, items):
    return list(ex.map(fn, items)) if ex is not None else [fn(a) for a in items]


# ---------------------------------------------------------------------------
# verify-square-fn
# ---------------------------------------------------------------------------

def _opnorm_cell(args):
    from .dyadic import DyadicInterval
    from .square_functions import ShiftSpec, empirical_opnorm, lp_bound, modified_square_fn

    k, n, p, J, trials, seed, index, selector, kind = args
    spec = ShiftSpec(k, n, selector, seed)
    W = DyadicInterval(0, 0)
    cell_seed = int(np.random.default_rng([seed, index]).integers(2 ** 31))
    if kind == "zero":
        # the zero input has no operator-norm content; the cell records a measured 0
        measured = 0.0
    else:
        measured = empirical_opnorm(lambda f: modified_square_fn(f, spec), p, trials, cell_seed, W, J)
    bound = lp_bound(k, n, p)
    return k, n, p, measured, bound, measured / bound


def cmd_verify_square_fn(cfg: dict, out: Path, jobs: int) -> int:
    if cfg["input"] not in ("probes", "zero"):
        raise ConfigError("input must be 'probes' or 'zero'")
    cells = [(k, n, p) for k in cfg["ks"] for n in cfg["ns"] for p in cfg["ps"]]
    args = [(int(k), int(n), float(p), int(cfg["J"]), int(cfg["trials"]), int(cfg["seed"]), i,
             cfg["selector"], cfg["input"]) for i, (k, n, p) in enumerate(cells)]
    with _executor(jobs) as ex:
        rows = _map(ex, _opnorm_cell, args)
    report.write_csv(out / "verify_square_fn.csv", ["k", "n", "p", "measured", "bound", "ratio"], rows, cfg,
                     "k>=0: (2^k ln(n+1) + 1)^(1/2); k<0: (2^-k + ln(n+1) + 1)^|2/p-1|")
    bad = [r for r in rows if r[5] > cfg["threshold"]]
    worst = max((r[5] for r in rows), default=0.0)
    print(f"verify-square-fn: {len(rows)} cells, max ratio {worst:.4g} (threshold {cfg['threshold']})")
    if cfg["figures"]:
        for p in cfg["ps"]:
            series = {}
            for n in cfg["ns"]:
                pts = [(r[0], r[5]) for r in rows if r[1] == n and r[2] == p]
                series[f"n={n}"] = ([a for a, _ in pts], [b for _, b in pts])
            report.render_figure(out / f"verify_square_fn_p{p:.3g}.png", series, "k", "measured / bound")
    for r in bad:
        print(f"  FAIL k={r[0]} n={r[1]} p={r[2]:.4g}: ratio {r[5]:.4g}")
    return EXIT_THRESHOLD if bad else EXIT_OK


# ---------------------------------------------------------------------------
# weak-type
# ---------------------------------------------------------------------------

def cmd_weak_type(cfg: dict, out: Path, jobs: int) -> int:
    from .cz import weak_type_bound, weak_type_experiment

    if cfg["input"] not in ("probes", "zero"):
        raise ConfigError("input must be 'probes' or 'zero'")
    ks, ns = [int(k) for k in cfg["ks"]], [int(n) for n in cfg["ns"]]
    if cfg["input"] == "zero":
        raw = [(k, n, 0.0, 0) for k in ks for n in ns]
    else:
        with _executor(jobs) as ex:
            raw = weak_type_experiment(ks, ns, int(cfg["trials"]), int(cfg["seed"]), J=int(cfg["J"]),
                                       selector=cfg["selector"], executor=ex)
    rows = [(k, n, c, weak_type_bound(k, n), c / weak_type_bound(k, n), arg) for k, n, c, arg in raw]
    report.write_csv(out / "weak_type.csv", ["k", "n", "constant", "bound", "ratio", "argmax_probe"], rows, cfg,
                     "2^-k n + 1")
    worst = max((r[4] for r in rows), default=0.0)
    bad = [r for r in rows if r[4] > cfg["threshold"]]
    print(f"weak-type: {len(rows)} cells, max ratio {worst:.4g} (threshold {cfg['threshold']})")
    if cfg["figures"]:
        series = {f"n={n}": ([r[0] for r in rows if r[1] == n], [r[4] for r in rows if r[1] == n]) for n in ns}
        report.render_figure(out / "weak_type.png", series, "k", "constant / (2^-k n + 1)")
    for r in bad:
        print(f"  FAIL k={r[0]} n={r[1]}: ratio {r[4]:.4g}")
    return EXIT_THRESHOLD if bad else EXIT_OK


# ---------------------------------------------------------------------------
# kernel-audit
# ---------------------------------------------------------------------------

def _stable(a: float, b: float, tol: float) -> bool:
    hi = max(abs(a), abs(b))
    return hi < 1e-9 or abs(a - b) <= tol * hi


def cmd_kernel_audit(cfg: dict, out: Path, jobs: int) -> int:
    from .dyadic import DyadicInterval
    from .kernels import (
        MixedHomogeneityKernel,
        check_annulus_cancellation,
        check_mixed_kernel_cancellation,
        check_partial_smoothness,
        check_product_smoothness,
        check_size,
        kernel_from_registry,
        mixed_wbcz_check,
    )

    K = kernel_from_registry(cfg["kernel"], cfg["params"])
    n, seed, tol = int(cfg["samples"]), int(cfg["seed"]), float(cfg["stability"])
    result: dict = {"kernel": K.name, "version": __version__, "config_hash": report.config_hash(cfg),
                    "approximate": K.approximate, "conditions": {}}
    conds = result["conditions"]

    def measured(name, fn, passed_fn=None):
        try:
            a, b = fn(n), fn(2 * n)
        except NumericalFailure as exc:
            conds[name] = {"status": "numerical_failure", "error": str(exc)}
            return
        stable = _stable(a, b, tol)
        ok = stable and math.isfinite(b) and (passed_fn(b) if passed_fn else True)
        conds[name] = {"constant": b, "coarse_constant": a, "stable": stable, "passed": bool(ok)}

    measured("size", lambda s: check_size(K, s, seed),
             lambda c: c <= K.declared_C * (1 + cfg["size_tolerance"]) + 1e-12)
    measured("product_smoothness", lambda s: check_product_smoothness(K, s, seed))
    measured("partial_smoothness_1", lambda s: check_partial_smoothness(K, s, seed, axis=0))
    measured("partial_smoothness_2", lambda s: check_partial_smoothness(K, s, seed, axis=1))
    try:
        ann = check_annulus_cancellation(K, cfg["alphas"], cfg["betas"])
        conds["annulus_cancellation"] = {"constant": ann.constant, "small_aspect_sup": ann.small_sup,
                                         "growing": ann.growing, "failures": len(ann.failures),
                                         "passed": ann.passed}
    except NumericalFailure as exc:
        conds["annulus_cancellation"] = {"status": "numerical_failure", "error": str(exc)}
    if K.is_tensor:
        I = DyadicInterval(*cfg["wbcz_interval"])
        m = int(cfg["wbcz_samples"])
        for axis in (0, 1):
            try:
                r1 = mixed_wbcz_check(K, I, samples=m, seed=seed, axis=axis)
                r2 = mixed_wbcz_check(K, I, samples=2 * m, seed=seed, axis=axis)
            except NumericalFailure as exc:
                conds[f"mixed_wbcz_{axis + 1}"] = {"status": "numerical_failure", "error": str(exc)}
                continue
            stable = _stable(r1.size, r2.size, tol) and _stable(r1.smoothness, r2.smoothness, tol)
            conds[f"mixed_wbcz_{axis + 1}"] = {"size": r2.size, "smoothness": r2.smoothness,
                                               "stable": stable, "passed": stable}
    if isinstance(K, MixedHomogeneityKernel):
        try:
            mk = check_mixed_kernel_cancellation(K, [0.25, 1.0], [2.0, 4.0], samples=200, seed=seed)
            conds["mixed_kernel_cancellation"] = {**mk, "passed": all(math.isfinite(v["size"]) for v in mk.values())}
        except NumericalFailure as exc:
            conds["mixed_kernel_cancellation"] = {"status": "numerical_failure", "error": str(exc)}
        conds["homogeneity"] = K.homogeneity_errors()
    numerical = [k for k, v in conds.items() if isinstance(v, dict) and v.get("status") == "numerical_failure"]
    failed = [k for k, v in conds.items() if isinstance(v, dict) and v.get("passed") is False]
    result["passed"] = not (numerical or failed)
    report.write_json(out / f"kernel_audit_{cfg['kernel']}.json", result)
    for k, v in conds.items():
        print(f"  {k}: {json.dumps(v, default=str, sort_keys=True)}")
    if numerical:
        print(f"kernel-audit: numerical failure in {numerical}")
        return EXIT_NUMERICAL
    if failed:
        print(f"kernel-audit: FAIL {failed}")
        return EXIT_THRESHOLD
    print("kernel-audit: all conditions passed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bump-decay
# ---------------------------------------------------------------------------

def cmd_bump_decay(cfg: dict, out: Path, jobs: int) -> int:
    from .kernel_forms import bump_decay_experiment
    from .kernels import kernel_from_registry

    K = kernel_from_registry(cfg["kernel"], cfg["params"])
    with _executor(jobs) as ex:
        res = bump_decay_experiment(K, cfg["es"], cfg["ms"], support=float(cfg["support"]), executor=ex)
    rows = [(e1, e2, m1, m2, v, 2.0 ** (-1.5 * (e1 + e2)) * (m1 * m2) ** -2.0) for e1, e2, m1, m2, v in res.rows]
    report.write_csv(out / "bump_decay.csv", ["e1", "e2", "m1", "m2", "value", "bound_shape"], rows, cfg,
                     "prod_i 2^(-e_i (1/2+delta)) m_i^-(1+delta), delta=1")
    s = res.summary()
    checks = []
    if res.excluded == len(res.rows):
        verdict = True
        print("bump-decay: every entry is zero, no fit")
    else:
        checks = [("eccentricity_slope_1", s["eccentricity_slope_1"] >= cfg["min_eccentricity_slope"]),
                  ("eccentricity_slope_2", s["eccentricity_slope_2"] >= cfg["min_eccentricity_slope"]),
                  ("distance_slope_1", s["distance_slope_1"] <= cfg["max_distance_slope"]),
                  ("distance_slope_2", s["distance_slope_2"] <= cfg["max_distance_slope"]),
                  ("r2", s["r2"] >= cfg["min_r2"])]
        verdict = all(ok for _, ok in checks)
    summary_rows = [(k, v, dict(checks).get(k, "")) for k, v in s.items()]
    report.write_csv(out / "bump_decay_summary.csv", ["quantity", "value", "passed"], summary_rows, cfg,
                     "slopes of log value vs log(|S|/|R|) and log m")
    if cfg["figures"]:
        t = {}
        for e1, e2, m1, m2, v in res.rows:
            if e2 == cfg["es"][0] and m2 == cfg["ms"][0] and v > 0:
                t.setdefault(f"m1={m1}", ([], []))
                t[f"m1={m1}"][0].append(e1)
                t[f"m1={m1}"][1].append(v)
        report.render_figure(out / "bump_decay.png", t, "e1", "|Lambda(psi_R, psi_S)|", logy=True)
    print("bump-decay: " + ", ".join(f"{k}={v:.4g}" for k, v in s.items()))
    return EXIT_OK if verdict else EXIT_THRESHOLD


# ---------------------------------------------------------------------------
# reduce
# ---------------------------------------------------------------------------

def _source_form(cfg: dict, seed: int):
    from .dyadic import DyadicInterval, DyadicRectangle
    from .forms import FiniteBilinearForm, form_from_kernel, paraproduct_classical, random_support_preserving
    from .kernels import kernel_from_registry
    from .signals import HaarCoeffs

    W = DyadicRectangle(DyadicInterval(0, 0), DyadicInterval(0, 0))
    J1, J2 = int(cfg["J1"]), int(cfg["J2"])
    src = cfg["source"]
    if src == "random":
        return random_support_preserving(W, J1, J2, seed)
    if src == "zero":
        n = (1 << J1) * (1 << J2)
        return FiniteBilinearForm(W, J1, J2, np.zeros((n, n)), "zero")
    if src == "identity":
        n = (1 << J1) * (1 << J2)
        return FiniteBilinearForm(W, J1, J2, np.eye(n), "identity")
    if src == "classical":
        rng = np.random.default_rng(seed)
        B = np.zeros((1 << J1, 1 << J2))
        B[1:, 1:] = rng.standard_normal((B.shape[0] - 1, B.shape[1] - 1))
        return paraproduct_classical(HaarCoeffs(W, (J1, J2), B))
    if src == "kernel":
        return form_from_kernel(kernel_from_registry(cfg["kernel"], cfg["params"]), W, J1, J2)
    raise ConfigError(f"unknown form source {src!r}")


def cmd_reduce(cfg: dict, out: Path, jobs: int) -> int:
    from .forms import CANCELLATION_FAMILIES, eight_cancellation_values, reduce_to_special_cancellation

    L = _source_form(cfg, int(cfg["seed"]))
    before = eight_cancellation_values(L)
    red = reduce_to_special_cancellation(L)
    again = reduce_to_special_cancellation(red.tilde)
    fixed = float(np.abs(again.tilde.matrix - red.tilde.matrix).max())
    extra = {}
    if cfg["source"] == "classical":
        # the round trip removes the whole form
        extra["round_trip_residual"] = float(np.abs(red.tilde.matrix).max())
    rows = [(fam, before[fam], red.residuals[fam]) for fam in CANCELLATION_FAMILIES]
    report.write_csv(out / "reduce.csv", ["family", "before", "after"], rows, cfg, "all families vanish")
    payload = {"source": cfg["source"], "max_residual": red.max_residual, "fixed_point_change": fixed,
               "symbol_norms": {k: float(np.abs(F.matrix).max()) for k, F in red.paraproducts.items()}, **extra}
    report.write_json(out / "reduce.json", payload)
    tol = float(cfg["tolerance"])
    bad = [k for k in ("max_residual", "fixed_point_change", "round_trip_residual")
           if k in payload and payload[k] > tol]
    print("reduce: " + ", ".join(f"{k}={payload[k]:.3e}" for k in ("max_residual", "fixed_point_change")))
    for k in bad:
        print(f"  FAIL {k} = {payload[k]:.3e} > {tol:g}")
    return EXIT_THRESHOLD if bad else EXIT_OK


# ---------------------------------------------------------------------------
# represent
# ---------------------------------------------------------------------------

def cmd_represent(cfg: dict, out: Path, jobs: int) -> int:
    from .forms import NINE_CLASSES, haar_representation
    from .signals import Signal2D

    J1, J2 = int(cfg["J1"]), int(cfg["J2"])
    rng = np.random.default_rng(int(cfg["seed"]))
    rows = []
    for op in range(int(cfg["operators"])):
        L = _source_form(cfg, int(rng.integers(2 ** 31)))
        for t in range(int(cfg["pairs"])):
            f = Signal2D(L.window, J1, J2, rng.standard_normal((1 << J1, 1 << J2)))
            g = Signal2D(L.window, J1, J2, rng.standard_normal((1 << J1, 1 << J2)))
            dec = haar_representation(L, f, g, keep_terms=False)
            direct = L.apply(f).inner(g)
            rows.append((op, t, direct, dec.total, abs(dec.total - direct),
                         *[getattr(dec, c) for c in NINE_CLASSES.values()]))
    header = ["operator", "trial", "direct", "nine_term_total", "residual", *NINE_CLASSES.values()]
    report.write_csv(out / "represent.csv", header, rows, cfg, "sum of the nine classes = <Tf, g>")
    worst = max((r[4] for r in rows), default=0.0)
    print(f"represent: {len(rows)} evaluations, max residual {worst:.3e}")
    return EXIT_OK if worst <= cfg["tolerance"] else EXIT_THRESHOLD


# ---------------------------------------------------------------------------
# t1-limit
# ---------------------------------------------------------------------------

def cmd_t1_limit(cfg: dict, out: Path, jobs: int) -> int:
    from .dyadic import DyadicInterval, DyadicRectangle
    from .kernel_forms import t1_limit
    from .kernels import kernel_from_registry
    from .signals import Signal1D, Signal2D

    K = kernel_from_registry(cfg["kernel"], cfg["params"])
    (l1, o1), (l2, o2) = cfg["rectangle"]
    S = DyadicRectangle(DyadicInterval(l1, o1), DyadicInterval(l2, o2))
    wl = int(cfg["window_level"])
    W = DyadicRectangle(S.i1.ancestor(wl), S.i2.ancestor(wl))
    J = int(cfg["J"])
    f = Signal2D.tensor(Signal1D.haar(W.i1, J, S.i1), Signal1D.haar(W.i2, J, S.i2))
    seq = t1_limit(K, f, S, int(cfg["kmax"]))
    # row k carries |v_k - v_{k-1}| and its ratio to the previous difference
    diffs = [None] + seq.differences
    ratios = [None, None] + seq.ratios()
    rows = [(k, v, d, r) for k, v, d, r in zip(seq.ks, seq.values, diffs, ratios)]
    report.write_csv(out / "t1_limit.csv", ["k", "value", "difference", "ratio"], rows, cfg,
                     "|v_{k+1} - v_k| <= C 2^(-delta k)")
    limit = 2.0 ** (-cfg["delta"] / 2)
    cr = seq.cauchy_ratio(int(cfg["k_from"]))
    if cfg["figures"]:
        report.render_figure(out / "t1_limit.png", {"|v_{k+1}-v_k|": (seq.ks[1:], seq.differences)}, "k",
                             "successive difference", logy=True)
    print(f"t1-limit: value {seq.value:.6e}, Cauchy ratio {cr:.4g} (limit {limit:.4g})")
    return EXIT_OK if cr <= limit else EXIT_THRESHOLD


COMMANDS = {
    "verify-square-fn": cmd_verify_square_fn,
    "kernel-audit": cmd_kernel_audit,
    "bump-decay": cmd_bump_decay,
    "reduce": cmd_reduce,
    "weak-type": cmd_weak_type,
    "represent": cmd_represent,
    "t1-limit": cmd_t1_limit,
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dyadt1", description="Dyadic product-space experiment harness")
    ap.add_argument("--version", action="version", version=f"dyadt1 {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=(fn.__doc__ or name).strip().splitlines()[0] if fn.__doc__ else name)
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="override a config field")
        sp.add_argument("--jobs", type=int, default=1, help="worker processes for grid commands")
        sp.add_argument("--out", help=f"output directory (default ${report.OUTPUT_ENV} or ./dyadt1-out)")
        sp.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.command, args.config, args.set)
        out = report.output_dir(args.out)
        t0 = time.perf_counter()
        code = COMMANDS[args.command](cfg, out, args.jobs)
        log.info("%s finished in %.2f s", args.command, time.perf_counter() - t0)
        return code
    except (ConfigError, PreconditionError, KeyError, TypeError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Config parsing, sweep orchestration, limit fitting, and result emission.

The config file is JSON:

    {
      "function":   {"catalog_id": "quadratic", "parameters": {...},
                     "domain": {"kind": "box", "lower": [0], "upper": [1]}},
      "weight":     {"catalog_id": "constant", "parameters": {"value": 1.0}},
      "p":          1.0,
      "strategy":   "exact_1d"            (or {"name": ..., "options": {...}}),
      "m_list":     [4, 8, 16, 32],
      "quadrature": {"kind": "tensor_grid", "level": 128, ...},
      "seed":       0,
      "output":     "results.csv",
      "support":    {...domain...}        (dual-sweep only, optional)
    }

Unknown keys are rejected with a close-match suggestion.  Results are
emitted either as CSV with the fixed header

    m,error,error_bar,rescaled,theory,ratio

at 17 significant digits (byte-identical for identical config and seed in
single-threaded mode) or as a key/value record format that parses back
without loss.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 I/O failure.
"""

import argparse
import difflib
import json
import os
import sys
from dataclasses import dataclass

import numpy as np

from .approximator import STRATEGIES, build_approximation
from .convex_core import (CircumscriptionError, DomainError, Domain,
                          MetricError, NumericsError, PiecewiseAffineMax,
                          SmoothConvexFunction, WeightError, WeightFunction,
                          max_violation, sup_gap)
from .dual_ma import (GridFunction, SupportRestriction,
                      dual_approximation_sweep, legendre_transform)
from .error_eval import QuadratureSpec, weighted_lp_error
from .functionals import (theoretical_limit, weighted_mass, zador_estimate,
                          zador_reference)
from .sweep import SweepOutcome, SweepRecord, run_sweep, spearman_trend

__all__ = [
    "ConfigError", "FitResult", "parse_config", "validate_config", "sweep",
    "fit_limit", "emit", "parse_records", "main", "SweepRecord",
    "SweepOutcome", "spearman_trend",
]


class ConfigError(ValueError):
    """Configuration is malformed; reported with the offending key path."""


_TOP_KEYS = ("function", "weight", "p", "strategy", "m_list", "quadrature",
             "seed", "output", "support")
_FUNCTION_KEYS = ("catalog_id", "parameters", "domain")
_WEIGHT_KEYS = ("catalog_id", "parameters")
_QUAD_KEYS = ("kind", "level", "samples", "seed", "rel_tol")
_STRATEGY_KEYS = ("name", "options")
_CATALOG_IDS = ("quadratic", "cosh_quadratic", "exp_sum", "quartic", "huber")
_WEIGHT_IDS = ("constant", "exp_neg_t", "affine_x")


def _reject_unknown(mapping, allowed, path):
    for key in mapping:
        if key not in allowed:
            hint = difflib.get_close_matches(key, allowed, n=1)
            suffix = f"; did you mean {hint[0]!r}?" if hint else ""
            raise ConfigError(f"unknown config key {path}{key!r}{suffix}")


def parse_config(path):
    """Read and validate a JSON config file."""
    with open(path) as fh:
        text = fh.read()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return validate_config(raw)


def validate_config(raw):
    """Validate a raw config mapping and fill documented defaults."""
    if not isinstance(raw, dict):
        raise ConfigError("config root must be an object")
    _reject_unknown(raw, _TOP_KEYS, "")
    if "function" not in raw:
        raise ConfigError("config requires a 'function' section")

    fn = raw["function"]
    if not isinstance(fn, dict):
        raise ConfigError("'function' must be an object")
    _reject_unknown(fn, _FUNCTION_KEYS, "function.")
    cid = fn.get("catalog_id")
    if cid not in _CATALOG_IDS:
        hint = difflib.get_close_matches(str(cid), _CATALOG_IDS, n=2)
        raise ConfigError(f"function.catalog_id {cid!r} unknown; "
                          f"choose from {list(_CATALOG_IDS)}"
                          + (f" (close: {hint})" if hint else ""))
    if "domain" not in fn:
        raise ConfigError("function.domain is required")

    weight = raw.get("weight", {"catalog_id": "constant", "parameters": {}})
    if not isinstance(weight, dict):
        raise ConfigError("'weight' must be an object")
    _reject_unknown(weight, _WEIGHT_KEYS, "weight.")
    wid = weight.get("catalog_id", "constant")
    if wid not in _WEIGHT_IDS:
        hint = difflib.get_close_matches(str(wid), _WEIGHT_IDS, n=2)
        raise ConfigError(f"weight.catalog_id {wid!r} unknown; "
                          f"choose from {list(_WEIGHT_IDS)}"
                          + (f" (close: {hint})" if hint else ""))

    p = raw.get("p", 1.0)
    if not isinstance(p, (int, float)) or isinstance(p, bool) or p <= 0:
        raise ConfigError(f"p must be a positive number, got {p!r}")

    strategy = raw.get("strategy", "auto")
    if isinstance(strategy, dict):
        _reject_unknown(strategy, _STRATEGY_KEYS, "strategy.")
        name = strategy.get("name")
        options = strategy.get("options", {})
        if not isinstance(options, dict):
            raise ConfigError("strategy.options must be an object")
    else:
        name, options = strategy, {}
    if name != "auto" and name not in STRATEGIES:
        hint = difflib.get_close_matches(str(name), STRATEGIES, n=3)
        raise ConfigError(f"strategy {name!r} unknown; choose from "
                          f"{list(STRATEGIES)}"
                          + (f" (close: {hint})" if hint else ""))

    m_list = raw.get("m_list", [4, 8, 16, 32])
    if (not isinstance(m_list, list) or not m_list
            or any(not isinstance(m, int) or isinstance(m, bool) or m < 1
                   for m in m_list)):
        raise ConfigError("m_list must be a non-empty list of integers >= 1")

    quad = raw.get("quadrature", {})
    if not isinstance(quad, dict):
        raise ConfigError("'quadrature' must be an object")
    _reject_unknown(quad, _QUAD_KEYS, "quadrature.")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("seed must be an integer")

    output = raw.get("output", "")
    if not isinstance(output, str):
        raise ConfigError("output must be a path string")

    cfg = {
        "function": {"catalog_id": cid,
                     "parameters": fn.get("parameters", {}),
                     "domain": fn["domain"]},
        "weight": {"catalog_id": wid,
                   "parameters": weight.get("parameters", {})},
        "p": float(p),
        "strategy": {"name": name, "options": options},
        "m_list": list(m_list),
        "quadrature": dict(quad),
        "seed": seed,
        "output": output,
    }
    if "support" in raw:
        cfg["support"] = raw["support"]
    return cfg


def build_objects(cfg):
    """Instantiate (function, weight, quadrature spec or None) from a config."""
    try:
        f = SmoothConvexFunction.from_config(cfg["function"])
    except (DomainError, ValueError, KeyError) as exc:
        raise ConfigError(f"function section invalid: {exc}") from exc
    try:
        omega = WeightFunction.from_config(cfg["weight"])
        omega.validate_positive(f.domain)
    except (WeightError, ValueError, KeyError) as exc:
        raise ConfigError(f"weight section invalid: {exc}") from exc
    quad = None
    if cfg["quadrature"]:
        try:
            quad = QuadratureSpec(**cfg["quadrature"])
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"quadrature section invalid: {exc}") from exc
    return f, omega, quad


def _resolve_strategy(cfg, f):
    name = cfg["strategy"]["name"]
    if name == "auto":
        name = "exact_1d" if f.dim == 1 else "global_density"
    return name, dict(cfg["strategy"]["options"])


def sweep(config, threads=1):
    """Run the configured sweep; returns a SweepOutcome (records by m)."""
    f, omega, quad = build_objects(config)
    name, options = _resolve_strategy(config, f)
    return run_sweep(f, omega, config["p"], config["m_list"], name,
                     quad=quad, seed=config["seed"], threads=threads,
                     **options)


# ---------------------------------------------------------------------------
# limit extrapolation


@dataclass
class FitResult:
    c_infinity: float
    amplitude: float
    exponent: float
    residual: float
    degenerate: bool = False


def fit_limit(records):
    """Fit rescaled_m = c_inf + b * m^(-s) over the sweep records.

    The exponent s is scanned on [0.25, 4]; for each candidate the linear
    part is solved by least squares and the best residual wins.  Fewer
    than four distinct m (or an ill-conditioned fit) returns the last
    rescaled value with the degenerate flag set.
    """
    ms = np.array([r.m for r in records], dtype=float)
    ys = np.array([r.rescaled for r in records], dtype=float)
    if len(records) < 4 or np.unique(ms).size < 4:
        last = float(ys[-1]) if ys.size else float("nan")
        return FitResult(c_infinity=last, amplitude=0.0, exponent=1.0,
                         residual=float("nan"), degenerate=True)
    best = None
    for s in np.linspace(0.25, 4.0, 151):
        design = np.column_stack([np.ones_like(ms), ms ** (-s)])
        coef, _, rank, _ = np.linalg.lstsq(design, ys, rcond=None)
        if rank < 2 or not np.all(np.isfinite(coef)):
            continue
        resid = float(np.linalg.norm(design @ coef - ys))
        if best is None or resid < best[0]:
            best = (resid, float(coef[0]), float(coef[1]), float(s))
    if best is None:
        return FitResult(c_infinity=float(ys[-1]), amplitude=0.0,
                         exponent=1.0, residual=float("nan"), degenerate=True)
    resid, c, b, s = best
    if abs(b) <= 1e-10 * max(abs(c), 1e-300):
        b = 0.0
    return FitResult(c_infinity=c, amplitude=b, exponent=s, residual=resid,
                     degenerate=False)


# ---------------------------------------------------------------------------
# emission

_CSV_HEADER = "m,error,error_bar,rescaled,theory,ratio"
_FIT_FIELDS = ("c_infinity", "amplitude", "exponent", "residual", "degenerate")


def _fmt(x):
    return f"{x:.17g}"


def emit(payload, fmt="csv", path=None):
    """Serialize records or a fit result; returns the text, optionally
    writing it to ``path``.  CSV rows are %.17g so floats round-trip."""
    if fmt not in ("csv", "record"):
        raise ConfigError(f"unknown output format {fmt!r}")
    if isinstance(payload, SweepOutcome):
        payload = payload.records
    if isinstance(payload, FitResult):
        if fmt == "csv":
            text = (",".join(_FIT_FIELDS) + "\n"
                    + ",".join([_fmt(payload.c_infinity),
                                _fmt(payload.amplitude),
                                _fmt(payload.exponent),
                                _fmt(payload.residual),
                                str(int(payload.degenerate))]) + "\n")
        else:
            lines = [f"c_infinity {_fmt(payload.c_infinity)}",
                     f"amplitude {_fmt(payload.amplitude)}",
                     f"exponent {_fmt(payload.exponent)}",
                     f"residual {_fmt(payload.residual)}",
                     f"degenerate {int(payload.degenerate)}"]
            text = "\n".join(lines) + "\n"
    else:
        records = list(payload)
        if fmt == "csv":
            rows = [_CSV_HEADER]
            for r in records:
                rows.append(",".join([str(r.m), _fmt(r.error),
                                      _fmt(r.error_bar), _fmt(r.rescaled),
                                      _fmt(r.theory), _fmt(r.ratio)]))
            text = "\n".join(rows) + "\n"
        else:
            blocks = []
            for r in records:
                blocks.append("\n".join([
                    f"m {r.m}",
                    f"error {_fmt(r.error)}",
                    f"error_bar {_fmt(r.error_bar)}",
                    f"rescaled {_fmt(r.rescaled)}",
                    f"theory {_fmt(r.theory)}",
                    f"ratio {_fmt(r.ratio)}",
                ]))
            text = "\n\n".join(blocks) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def parse_records(text):
    """Parse the record format (or record-format fit) back to objects."""
    blocks = [b for b in text.strip().split("\n\n") if b.strip()]
    out = []
    for block in blocks:
        fields = {}
        for line in block.splitlines():
            if not line.strip():
                continue
            key, _, val = line.partition(" ")
            fields[key] = val
        if "c_infinity" in fields:
            out.append(FitResult(
                c_infinity=float(fields["c_infinity"]),
                amplitude=float(fields["amplitude"]),
                exponent=float(fields["exponent"]),
                residual=float(fields["residual"]),
                degenerate=bool(int(fields["degenerate"]))))
        else:
            out.append(SweepRecord(
                m=int(fields["m"]), error=float(fields["error"]),
                error_bar=float(fields["error_bar"]),
                rescaled=float(fields["rescaled"]),
                theory=float(fields["theory"]),
                ratio=float(fields["ratio"])))
    return out


# ---------------------------------------------------------------------------
# CLI


def _add_common(sub):
    sub.add_argument("--config", help="path to a JSON config file")
    sub.add_argument("--out", help="output path (default: config output/stdout)")
    sub.add_argument("--format", choices=("csv", "record"), default="csv")
    sub.add_argument("--seed", type=int, help="override the config seed")
    sub.add_argument("--threads", type=int,
                     help="worker threads (default MAXAFFINE_THREADS or 1)")
    sub.add_argument("--m-list", help="comma-separated budgets, e.g. 4,8,16")
    sub.add_argument("--p", type=float, help="override the config p")
    sub.add_argument("--strategy", help="override the config strategy")


def _build_parser():
    ap = argparse.ArgumentParser(
        prog="maxaffine",
        description="Max-affine approximation sweeps for smooth convex "
                    "functions, with quantizer-based placement and "
                    "asymptotic-law comparisons.")
    sub = ap.add_subparsers(dest="verb", required=True)

    for verb, desc in (
            ("approximate", "build one envelope and save its pieces"),
            ("error", "evaluate the weighted L^p error of a saved envelope"),
            ("sweep", "sweep the budget list and emit records"),
            ("zador", "estimate the quantization constant empirically"),
            ("functional", "weighted mass and predicted limit for a config"),
            ("legendre", "discrete Legendre transform of the function"),
            ("dual-sweep", "sweep on the declared Monge-Ampere support")):
        s = sub.add_parser(verb, help=desc)
        _add_common(s)
        if verb == "approximate":
            s.add_argument("--m", type=int, help="piece budget (default: "
                                                 "largest m_list entry)")
        if verb == "error":
            s.add_argument("--envelope", required=True,
                           help="path to a saved envelope")
        if verb == "zador":
            s.add_argument("--n", type=int, default=2, help="dimension")
            s.add_argument("--trials", type=int, default=8)
        if verb == "legendre":
            s.add_argument("--grid", type=int, default=257,
                           help="primal nodes per axis")
            s.add_argument("--dual-grid", type=int, default=None,
                           help="dual nodes per axis (default: same)")
        if verb in ("sweep", "dual-sweep"):
            s.add_argument("--fit", action="store_true",
                           help="append a limit extrapolation to stderr")
    return ap


def _threads(args):
    if getattr(args, "threads", None):
        return max(1, args.threads)
    env = os.environ.get("MAXAFFINE_THREADS", "")
    try:
        return max(1, int(env)) if env else 1
    except ValueError:
        raise ConfigError(f"MAXAFFINE_THREADS must be an integer, got {env!r}")


def _load_config(args, required=True):
    if not getattr(args, "config", None):
        if required:
            raise ConfigError("this verb needs --config")
        return None
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if getattr(args, "p", None) is not None:
        if args.p <= 0:
            raise ConfigError("p must be positive")
        cfg["p"] = args.p
    if getattr(args, "strategy", None):
        if args.strategy not in STRATEGIES:
            hint = difflib.get_close_matches(args.strategy, STRATEGIES, n=3)
            raise ConfigError(f"strategy {args.strategy!r} unknown"
                              + (f" (close: {hint})" if hint else ""))
        cfg["strategy"] = {"name": args.strategy, "options": {}}
    if getattr(args, "m_list", None):
        try:
            cfg["m_list"] = [int(tok) for tok in args.m_list.split(",") if tok]
        except ValueError:
            raise ConfigError(f"--m-list must be integers, got {args.m_list!r}")
        if not cfg["m_list"] or min(cfg["m_list"]) < 1:
            raise ConfigError("--m-list entries must be >= 1")
    return cfg


def _emit_outcome(outcome, cfg, args):
    path = args.out or cfg.get("output") or None
    text = emit(outcome.records, fmt=args.format, path=path)
    if not path:
        sys.stdout.write(text)
    if getattr(args, "fit", False):
        fit = fit_limit(outcome.records)
        sys.stderr.write(emit(fit, fmt="record"))
    if outcome.partial:
        sys.stderr.write(f"sweep aborted early: {outcome.failure}\n")
        return 3
    return 0


def _cmd_sweep(args):
    cfg = _load_config(args)
    outcome = sweep(cfg, threads=_threads(args))
    return _emit_outcome(outcome, cfg, args)


def _cmd_dual_sweep(args):
    cfg = _load_config(args)
    f, omega, quad = build_objects(cfg)
    name, options = _resolve_strategy(cfg, f)
    if "support" in cfg:
        try:
            supp = SupportRestriction(region=Domain.from_config(cfg["support"]))
        except (DomainError, KeyError) as exc:
            raise ConfigError(f"support section invalid: {exc}") from exc
    else:
        supp = SupportRestriction(region=f.domain)
    outcome = dual_approximation_sweep(f, supp, cfg["p"], omega,
                                       cfg["m_list"], name, seed=cfg["seed"],
                                       quad=quad, **options)
    return _emit_outcome(outcome, cfg, args)


def _cmd_approximate(args):
    cfg = _load_config(args)
    f, omega, _ = build_objects(cfg)
    name, options = _resolve_strategy(cfg, f)
    m = args.m or max(cfg["m_list"])
    l = build_approximation(f, omega, cfg["p"], m, name, seed=cfg["seed"],
                            **options)
    rng = np.random.default_rng(cfg["seed"])
    probe = f.domain.sample(rng, 4096)
    sys.stdout.write(f"pieces {len(l.offsets)}\n"
                     f"max_violation {_fmt(max_violation(f, l, probe))}\n"
                     f"sup_gap {_fmt(sup_gap(f, l, probe))}\n")
    path = args.out or cfg.get("output")
    if path:
        l.save_text(path)
    return 0


def _cmd_error(args):
    cfg = _load_config(args)
    f, omega, quad = build_objects(cfg)
    l = PiecewiseAffineMax.load_text(args.envelope)
    rep = weighted_lp_error(f, l, cfg["p"], omega, quad)
    sys.stdout.write(f"value {_fmt(rep.value)}\n"
                     f"error_bar {_fmt(rep.error_bar)}\n"
                     f"nodes_used {rep.nodes_used}\n")
    return 0


def _cmd_zador(args):
    p = args.p if args.p is not None else 1.0
    if p <= 0:
        raise ConfigError("p must be positive")
    if args.m_list:
        try:
            m_list = [int(tok) for tok in args.m_list.split(",") if tok]
        except ValueError:
            raise ConfigError(f"--m-list must be integers, got {args.m_list!r}")
    else:
        m_list = [256, 512]
    seed = args.seed if args.seed is not None else 0
    est = zador_estimate(args.n, p, m_list, trials=args.trials, seed=seed)
    lines = [f"estimate {_fmt(est.value)}",
             f"half_width {_fmt(est.half_width)}"]
    try:
        ref = zador_reference(args.n, p)
        lines.append(f"reference {_fmt(ref.value)}")
        lines.append(f"relative_gap {_fmt(est.value / ref.value - 1.0)}")
    except ValueError:
        lines.append("reference none")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def _cmd_functional(args):
    cfg = _load_config(args)
    f, omega, quad = build_objects(cfg)
    mass = weighted_mass(f, cfg["p"], omega, quad=quad)
    lines = [f"mass {_fmt(mass)}"]
    try:
        delta = zador_reference(f.dim, cfg["p"])
        theory = theoretical_limit(mass, cfg["p"], f.dim, delta)
        lines.append(f"delta {_fmt(delta.value)}")
        lines.append(f"theory {_fmt(theory)}")
    except ValueError:
        lines.append("delta none")
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    return 0


def _cmd_legendre(args):
    cfg = _load_config(args)
    f, _, _ = build_objects(cfg)
    lo, hi = f.domain.bounding_box()
    counts = [args.grid] * f.dim
    gf = GridFunction.from_function(f, lo, hi, counts)
    bound = f.lipschitz_bound * 1.05 + 1e-9
    dual_counts = [args.dual_grid or args.grid] * f.dim
    star = legendre_transform(gf, [-bound] * f.dim, [bound] * f.dim,
                              dual_counts)
    sys.stdout.write(f"truncated {int(star.truncated)}\n"
                     f"dual_bound {_fmt(bound)}\n")
    path = args.out or cfg.get("output")
    if path:
        star.save_text(path)
    return 0


_DISPATCH = {
    "sweep": _cmd_sweep,
    "dual-sweep": _cmd_dual_sweep,
    "approximate": _cmd_approximate,
    "error": _cmd_error,
    "zador": _cmd_zador,
    "functional": _cmd_functional,
    "legendre": _cmd_legendre,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:        # argparse uses 2 for bad usage
        return int(exc.code or 0)
    try:
        return _DISPATCH[args.verb](args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except (CircumscriptionError, MetricError, WeightError, DomainError,
            ValueError, FloatingPointError, RuntimeError) as exc:
        sys.stderr.write(f"numeric failure: {exc}\n")
        return 3
    except OSError as exc:
        sys.stderr.write(f"i/o failure: {exc}\n")
        return 4


if __name__ == "__main__":
    sys.exit(main())

"""Config-driven experiment runner.

Usage::

    mhtggsp --config run.yaml [--seed N] [--output-dir DIR] [--jobs J]
            [--emit-rejections] [--validate-only] [--quiet]

Config schema (YAML)::

    seed: 0                      # Monte Carlo seed (overridable by --seed)
    output_dir: results          # overridable by --output-dir
    scenario:
      kind: model-matched        # or: transmitter
      ...                        # fields of ModelMatchedConfig / TransmitterConfig
    fit:
      order: [2, 3]              # fixed (K1, K2); omit to select by BIC over `grid`
      grid: [[1, 1], [1, 3]]     # default K1 in 1..4, K2 in {1, 3, 5, 7}
      box: 10.0
      tol: 1.0e-6
      max_iters: 5000
    detect:
      methods: [mht-ggsp, oracle, bh]
      alphas: [0.05, 0.1, 0.2]
      reps: 20

Exit codes: 0 success, 1 config error, 2 every repetition failed,
3 some repetitions failed (count in metadata.json).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import yaml

from .detector import write_rejection_map
from .errors import ConfigError, MHTError
from .estimator import DEFAULT_GRID
from .experiment import METHODS, FitSpec, monte_carlo
from .scenario import ModelMatchedConfig, TransmitterConfig

log = logging.getLogger("mhtggsp")

EXIT_OK, EXIT_CONFIG, EXIT_ALL_FAILED, EXIT_PARTIAL = 0, 1, 2, 3

SCENARIOS = {"model-matched": ModelMatchedConfig, "transmitter": TransmitterConfig}
RESULT_COLUMNS = ["method", "alpha", "fdr", "power", "se_fdr", "se_power"]
PER_REP_COLUMNS = ["method", "alpha", "rep", "fdr", "power"]


def _version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        from . import __version__

        return __version__


@dataclass
class RunConfig:
    scenario: object
    fit: FitSpec
    methods: tuple
    alphas: tuple
    reps: int
    seed: int
    output_dir: str
    raw: dict

    @property
    def scenario_kind(self) -> str:
        return next(k for k, cls in SCENARIOS.items() if isinstance(self.scenario, cls))


def load_yaml(path) -> dict:
    text = Path(path).read_text()  # OSError propagates
    doc = yaml.safe_load(text)
    if doc is None:
        return {}
    if not isinstance(doc, dict):
        raise ConfigError(["<root>: expected a mapping"])
    return doc


def _number(value, path, errs, kind=float):
    if isinstance(value, str):
        # YAML 1.1 reads "1e-6" as a string
        try:
            value = float(value)
        except ValueError:
            pass
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        errs.append(f"{path}: expected a number, got {value!r}")
        return None
    if kind is int and int(value) != value:
        errs.append(f"{path}: expected an integer, got {value!r}")
        return None
    return kind(value)


def parse_config(doc: dict, seed_override=None, output_override=None) -> RunConfig:
    """Check ``doc`` against the schema; raise ConfigError listing every violation."""
    errs = []
    for key in set(doc) - {"seed", "output_dir", "scenario", "fit", "detect"}:
        errs.append(f"{key}: unknown top-level field")

    seed = doc.get("seed", 0)
    if seed_override is not None:
        seed = seed_override
    seed = _number(seed, "seed", errs, int)
    output_dir = output_override or doc.get("output_dir", "results")

    # scenario
    scen = doc.get("scenario")
    scenario = None
    n_sensors = None
    if not isinstance(scen, dict):
        errs.append("scenario: required mapping")
    else:
        kind = scen.get("kind")
        cls = SCENARIOS.get(kind)
        if cls is None:
            errs.append(f"scenario.kind: must be one of {sorted(SCENARIOS)}, got {kind!r}")
        else:
            params = {k: v for k, v in scen.items() if k != "kind"}
            allowed = {f.name for f in fields(cls)}
            for key in sorted(set(params) - allowed):
                errs.append(f"scenario.{key}: unknown field for {kind}")
            params = {k: v for k, v in params.items() if k in allowed}
            if "seed" not in params and seed is not None:
                params["seed"] = seed
            for f in fields(cls):
                if f.name in params and f.name not in ("Xi_true", "sampling"):
                    kind_ = int if f.type in ("int", int) else float
                    params[f.name] = _number(params[f.name], f"scenario.{f.name}", errs, kind_)
            if kind == "model-matched" and "Xi_true" not in params:
                errs.append("scenario.Xi_true: required for model-matched")
            if not any(v is None for v in params.values()) and not any(
                    e.startswith("scenario.") for e in errs):
                try:
                    scenario = cls(**params)
                    n_sensors = scenario.n_sensors
                except (MHTError, ValueError, TypeError) as exc:
                    errs.append(f"scenario: {exc}")

    # fit
    fit_doc = doc.get("fit", {}) or {}
    spec = None
    if not isinstance(fit_doc, dict):
        errs.append("fit: expected a mapping")
    else:
        for key in sorted(set(fit_doc) - {"order", "grid", "box", "tol", "max_iters"}):
            errs.append(f"fit.{key}: unknown field")
        order = fit_doc.get("order")
        grid = fit_doc.get("grid", [list(g) for g in DEFAULT_GRID])
        pairs = {"fit.order": [order] if order is not None else []}
        if order is None:
            pairs["fit.grid"] = grid if isinstance(grid, list) else [None]
            if isinstance(grid, list) and not grid:
                errs.append("fit.grid: must be nonempty")
        for path, items in pairs.items():
            for i, pair in enumerate(items):
                where = path if path == "fit.order" else f"{path}[{i}]"
                ok = (isinstance(pair, (list, tuple)) and len(pair) == 2
                      and all(isinstance(k, int) and not isinstance(k, bool) and k >= 1 for k in pair))
                if not ok:
                    errs.append(f"{where}: expected a pair of positive integers, got {pair!r}")
                elif n_sensors is not None and pair[0] > n_sensors:
                    errs.append(f"{where}: K1={pair[0]} exceeds n_sensors={n_sensors}")
        box = _number(fit_doc.get("box", 10.0), "fit.box", errs)
        tol = _number(fit_doc.get("tol", 1e-6), "fit.tol", errs)
        max_iters = _number(fit_doc.get("max_iters", 5000), "fit.max_iters", errs, int)
        if box is not None and box <= 0:
            errs.append("fit.box: must be positive")
        if tol is not None and tol <= 0:
            errs.append("fit.tol: must be positive")
        if max_iters is not None and max_iters < 1:
            errs.append("fit.max_iters: must be >= 1")
        if not any(e.startswith("fit.") for e in errs):
            spec = FitSpec(order=tuple(order) if order is not None else None,
                           grid=tuple(tuple(g) for g in grid), box=box, tol=tol, max_iters=max_iters)

    # detect
    det = doc.get("detect")
    methods, alphas, reps = (), (), None
    if not isinstance(det, dict):
        errs.append("detect: required mapping")
    else:
        for key in sorted(set(det) - {"methods", "alphas", "reps"}):
            errs.append(f"detect.{key}: unknown field")
        methods = det.get("methods", list(METHODS))
        if not isinstance(methods, list) or not methods:
            errs.append("detect.methods: must be a nonempty list")
            methods = ()
        else:
            for m in methods:
                if m not in METHODS:
                    errs.append(f"detect.methods: unknown method {m!r} (choose from {list(METHODS)})")
        alphas = det.get("alphas")
        if not isinstance(alphas, list) or not alphas:
            errs.append("detect.alphas: must be a nonempty list")
            alphas = ()
        else:
            for i, a in enumerate(alphas):
                a = _number(a, f"detect.alphas[{i}]", errs)
                if a is not None and not 0 < a < 1:
                    errs.append(f"detect.alphas[{i}]: {a} outside (0, 1)")
        reps = _number(det.get("reps", 1), "detect.reps", errs, int)
        if reps is not None and reps < 1:
            errs.append("detect.reps: must be >= 1")

    if errs:
        raise ConfigError(errs)
    return RunConfig(scenario=scenario, fit=spec, methods=tuple(methods),
                     alphas=tuple(float(a) for a in alphas), reps=reps, seed=seed,
                     output_dir=str(output_dir), raw=doc)


def validate(path) -> list:
    """All schema and invariant violations in the config at ``path`` (empty if valid)."""
    try:
        parse_config(load_yaml(path))
    except ConfigError as exc:
        return exc.violations
    except yaml.YAMLError as exc:
        return [f"<root>: YAML parse error: {exc}"]
    return []


def _fmt(x) -> str:
    return repr(float(x)) if isinstance(x, float) else str(x)


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def run(cfg: RunConfig, jobs: int = 1, emit_rejections: bool = False) -> int:
    """Execute the Monte Carlo experiment and write its files; returns an exit code."""
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    try:
        res = monte_carlo(cfg.scenario, methods=cfg.methods, alphas=cfg.alphas, reps=cfg.reps,
                          seed=cfg.seed, fit=cfg.fit, jobs=jobs, keep_maps=emit_rejections)
    except RuntimeError as exc:
        log.error("%s", exc)
        meta = _metadata(cfg, None, failures=cfg.reps, errors=[str(exc)])
        (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return EXIT_ALL_FAILED

    _write_csv(out / "results.csv", RESULT_COLUMNS, res.table)
    _write_csv(out / "per_rep.csv", PER_REP_COLUMNS, res.per_rep)
    fits = [{"rep": o.rep, **(o.fit or {}), "error": o.error} for o in res.outcomes]
    (out / "fit.json").write_text(json.dumps(fits, indent=2, sort_keys=True) + "\n")
    if emit_rejections:
        rej = out / "rejections"
        rej.mkdir(exist_ok=True)
        key = (cfg.methods[0], cfg.alphas[0])
        for o in res.outcomes:
            if key in o.maps:
                write_rejection_map(rej / f"rep_{o.rep}.csv", *o.maps[key])
    meta = _metadata(cfg, res.mean_null_proportion, failures=len(res.failures),
                     errors=[o.error for o in res.failures])
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if res.failures:
        log.warning("%d of %d repetitions failed", len(res.failures), cfg.reps)
        return EXIT_PARTIAL
    return EXIT_OK


def _metadata(cfg: RunConfig, null_prop, failures: int, errors: list) -> dict:
    return {
        "config": cfg.raw,
        "resolved_scenario": {"kind": cfg.scenario_kind, **asdict(cfg.scenario)},
        "fit": asdict(cfg.fit),
        "seed": cfg.seed,
        "measured_null_proportion": null_prop,
        "failed_repetitions": failures,
        "errors": errors,
        "software_version": _version(),
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mhtggsp", description=__doc__.split("\n\n")[0])
    ap.add_argument("--config", required=True, help="YAML run configuration")
    ap.add_argument("--seed", type=int, help="override the config seed")
    ap.add_argument("--output-dir", help="override output_dir")
    ap.add_argument("--validate-only", action="store_true", help="check the config and exit")
    ap.add_argument("--jobs", type=int, default=1, help="repetitions run in parallel")
    ap.add_argument("--emit-rejections", action="store_true",
                    help="write rejections/rep_<i>.csv per repetition")
    ap.add_argument("--quiet", action="store_true")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        doc = load_yaml(args.config)
        cfg = parse_config(doc, seed_override=args.seed, output_override=args.output_dir)
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except yaml.YAMLError as exc:
        print(f"config is not valid YAML: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_CONFIG
    if args.validate_only:
        if not args.quiet:
            print("config OK")
        return EXIT_OK
    if args.jobs < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    code = run(cfg, jobs=args.jobs, emit_rejections=args.emit_rejections)
    if not args.quiet:
        print(f"wrote {cfg.output_dir} (exit {code})")
    return code


if __name__ == "__main__":
    sys.exit(main())

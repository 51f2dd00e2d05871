"""Monte Carlo comparison of MHT-GGSP, the oracle lfdr rule and Benjamini-Hochberg.

Repetition ``r`` draws all its randomness from ``default_rng([seed, r])``, so
results do not depend on execution order or on how many workers are used.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .basis import DEFAULT_BOX, BandlimitedSignal
from .detector import bh_procedure, evaluate, lfdr_vector, step_up_threshold
from .errors import MHTError
from .estimator import DEFAULT_GRID, bic_select, fit_mle
from .scenario import make_scenario

log = logging.getLogger(__name__)

METHODS = ("mht-ggsp", "oracle", "bh")


@dataclass(frozen=True)
class FitSpec:
    """How MHT-GGSP picks its model: a fixed ``order`` or BIC over ``grid``."""

    order: tuple | None = None
    grid: tuple = DEFAULT_GRID
    box: float = DEFAULT_BOX
    tol: float = 1e-6
    max_iters: int = 5000


@dataclass
class RepetitionOutcome:
    rep: int
    rows: list = field(default_factory=list)
    fit: dict | None = None
    null_proportion: float | None = None
    maps: dict = field(default_factory=dict)
    error: str | None = None


@dataclass
class MonteCarloResult:
    table: list
    per_rep: list
    outcomes: list

    @property
    def failures(self) -> list:
        return [o for o in self.outcomes if o.error is not None]

    @property
    def mean_null_proportion(self) -> float | None:
        vals = [o.null_proportion for o in self.outcomes if o.null_proportion is not None]
        return float(np.mean(vals)) if vals else None


def _fit(data, scenario, spec: FitSpec):
    if spec.order is not None:
        fr = fit_mle(data.samples, scenario.spectral, *spec.order, box=spec.box,
                     tol=spec.tol, max_iters=spec.max_iters)
        return fr, {"best": fr.to_dict(), "candidates": [
            {"K1": fr.K1, "K2": fr.K2, "bic": fr.bic, "loglik": fr.loglik,
             "converged": fr.converged, "error": None}]}
    sel = bic_select(data.samples, scenario.spectral, grid=spec.grid, box=spec.box,
                     tol=spec.tol, max_iters=spec.max_iters)
    return sel.best, sel.to_dict()


def run_repetition(scenario, methods, alphas, spec: FitSpec, seed: int, rep: int,
                   keep_maps: bool = False) -> RepetitionOutcome:
    out = RepetitionOutcome(rep=rep)
    try:
        rng = np.random.default_rng([seed, rep])
        data = scenario.generate(rng)
        out.null_proportion = data.null_proportion
        lfdrs = {}
        if "mht-ggsp" in methods:
            fr, out.fit = _fit(data, scenario, spec)
            sig = BandlimitedSignal(fr.Xi_hat, scenario.spectral, box=spec.box)
            lfdrs["mht-ggsp"] = lfdr_vector(data.samples, sig)
        if "oracle" in methods:
            lfdrs["oracle"] = data.oracle_lfdr
        for method in methods:
            for alpha in alphas:
                if method == "bh":
                    mask = bh_procedure(data.samples.p, alpha)
                else:
                    _, mask = step_up_threshold(lfdrs[method], alpha)
                ev = evaluate(mask, data.samples.theta)
                out.rows.append({"method": method, "alpha": alpha, "rep": rep,
                                 "fdr": ev.fdp, "power": ev.tpp, "n_reject": ev.n_reject})
                if keep_maps:
                    out.maps[(method, alpha)] = (data.samples, lfdrs.get(method), mask)
    except (MHTError, ArithmeticError, ValueError) as exc:
        log.warning("repetition %d failed: %s", rep, exc)
        out.rows, out.maps = [], {}
        out.error = f"repetition {rep}: {type(exc).__name__}: {exc}"
    return out


def _worker(args):
    cfg, *rest = args
    return run_repetition(make_scenario(cfg), *rest)


def aggregate(per_rep: list, methods, alphas) -> list:
    """Mean FDP/TPP and their standard errors per (method, alpha)."""
    table = []
    for method in methods:
        for alpha in alphas:
            rows = sorted((r for r in per_rep if r["method"] == method and r["alpha"] == alpha),
                          key=lambda r: r["rep"])
            n = len(rows)
            if n == 0:
                continue
            fdp = np.array([r["fdr"] for r in rows])
            tpp = np.array([r["power"] for r in rows])
            se = (lambda x: float(np.std(x, ddof=1) / math.sqrt(n))) if n > 1 else (lambda x: 0.0)
            table.append({"method": method, "alpha": alpha, "fdr": float(np.mean(fdp)),
                          "power": float(np.mean(tpp)), "se_fdr": se(fdp), "se_power": se(tpp),
                          "n_reps": n})
    return table


def monte_carlo(scenario_cfg, methods=METHODS, alphas=(0.1,), reps: int = 20, seed: int = 0,
                fit: FitSpec | None = None, jobs: int = 1, keep_maps: bool = False) -> MonteCarloResult:
    """Repeat generate / fit / detect / evaluate and average FDP and TPP.

    Failed repetitions are recorded on the result and excluded from the
    averages; if every repetition fails a ``RuntimeError`` is raised.
    """
    if reps < 1:
        raise ValueError("reps must be >= 1")
    methods = tuple(methods)
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods: {sorted(unknown)}")
    alphas = tuple(float(a) for a in alphas)
    spec = fit or FitSpec()
    if jobs > 1:
        args = [(scenario_cfg, methods, alphas, spec, seed, r, keep_maps) for r in range(reps)]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_worker, args))
    else:
        scenario = make_scenario(scenario_cfg)
        outcomes = [run_repetition(scenario, methods, alphas, spec, seed, r, keep_maps)
                    for r in range(reps)]
    per_rep = [row for o in outcomes for row in o.rows]
    if all(o.error is not None for o in outcomes):
        raise RuntimeError("all repetitions failed: " + "; ".join(o.error for o in outcomes))
    return MonteCarloResult(table=aggregate(per_rep, methods, alphas), per_rep=per_rep,
                            outcomes=outcomes)

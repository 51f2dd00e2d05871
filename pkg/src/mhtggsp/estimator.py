"""Box-constrained maximum likelihood for bandlimited coefficients, and BIC order selection."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .basis import DEFAULT_BOX, design_matrix
from .errors import EmptySample, ModelOrderError, MHTError, NumericalError, ShapeError
from .graph import SpectralBasis
from .pvalue_model import SIGMOID_BETA, MixtureFamily, clamp_pvalues

log = logging.getLogger(__name__)

DEFAULT_GRID = tuple(product((1, 2, 3, 4), (1, 3, 5, 7)))
ARMIJO_SLOPE = 1e-4
SHRINK = 0.5
MIN_STEP = 1e-14


@dataclass(frozen=True)
class SampleSet:
    """Observed tests: vertex, time, p-value, and optionally the true hypothesis state.

    ``time_index`` is set when times come from a regular grid.
    """

    v: np.ndarray
    t: np.ndarray
    p: np.ndarray
    theta: np.ndarray | None = None
    time_index: np.ndarray | None = None
    clamp_count: int = 0

    @classmethod
    def from_arrays(cls, v, t, p, theta=None, time_index=None) -> "SampleSet":
        v = np.asarray(v, dtype=int).ravel()
        t = np.asarray(t, dtype=float).ravel()
        p, n_clamped = clamp_pvalues(np.asarray(p, dtype=float).ravel())
        if not (len(v) == len(t) == len(p)):
            raise ShapeError(f"v, t, p lengths differ: {len(v)}, {len(t)}, {len(p)}")
        if theta is not None:
            theta = np.asarray(theta, dtype=int).ravel()
            if len(theta) != len(p):
                raise ShapeError("theta length differs from p")
            if np.any((theta != 0) & (theta != 1)):
                raise ShapeError("theta must be 0/1")
        if time_index is not None:
            time_index = np.asarray(time_index, dtype=int).ravel()
        if n_clamped:
            log.debug("clamped %d p-values into [1e-15, 1]", n_clamped)
        return cls(v, t, p, theta, time_index, n_clamped)

    def __len__(self):
        return len(self.p)

    def concat(self, other: "SampleSet") -> "SampleSet":
        def cat(a, b):
            return None if a is None or b is None else np.concatenate([a, b])

        return SampleSet(
            np.concatenate([self.v, other.v]),
            np.concatenate([self.t, other.t]),
            np.concatenate([self.p, other.p]),
            cat(self.theta, other.theta),
            cat(self.time_index, other.time_index),
            self.clamp_count + other.clamp_count,
        )

    def permuted(self, perm) -> "SampleSet":
        pick = lambda a: None if a is None else a[perm]
        return SampleSet(self.v[perm], self.t[perm], self.p[perm], pick(self.theta),
                         pick(self.time_index), self.clamp_count)


@dataclass
class FitResult:
    Xi_hat: np.ndarray
    loglik: float
    iterations: int
    converged: bool
    bic: float
    clamp_count: int
    box: float
    history: list = field(default_factory=list, repr=False)

    @property
    def K1(self) -> int:
        return self.Xi_hat.shape[0]

    @property
    def K2(self) -> int:
        return self.Xi_hat.shape[1]

    def to_dict(self) -> dict:
        return {
            "K1": self.K1,
            "K2": self.K2,
            "B": self.box,
            "Xi": self.Xi_hat.ravel().tolist(),
            "loglik": self.loglik,
            "bic": self.bic,
            "iterations": self.iterations,
            "converged": self.converged,
            "clamp_count": self.clamp_count,
        }


def bic_value(K1: int, K2: int, M: int, loglik: float) -> float:
    return K1 * K2 * math.log(M) - 2.0 * loglik


class _Objective:
    """Log-likelihood and its gradient with the design matrix cached."""

    def __init__(self, samples: SampleSet, spectral: SpectralBasis, K1, K2, fam):
        if len(samples) == 0:
            raise EmptySample("no samples to fit")
        self.X = design_matrix(spectral, samples.v, samples.t, K1, K2)
        self.p = samples.p
        self.fam = fam
        self.shape = (K1, K2)

    def _terms(self, Xi):
        gamma = self.X @ np.ravel(Xi)
        terms = self.fam.log_density(self.p, gamma)
        bad = np.flatnonzero(~np.isfinite(terms))
        if bad.size:
            raise NumericalError(f"non-finite log-likelihood at sample {bad[0]}", index=int(bad[0]))
        return gamma, terms

    def value(self, Xi) -> float:
        return float(self._terms(Xi)[1].sum())

    def grad(self, Xi) -> np.ndarray:
        gamma = self.X @ np.ravel(Xi)
        score = self.fam.dlog_dzeta(self.p, gamma)
        bad = np.flatnonzero(~np.isfinite(score))
        if bad.size:
            raise NumericalError(f"non-finite score at sample {bad[0]}", index=int(bad[0]))
        return (self.X.T @ score).reshape(self.shape)


def log_likelihood(Xi, samples: SampleSet, spectral: SpectralBasis, fam: MixtureFamily = SIGMOID_BETA) -> float:
    """Sum of ``ln f_mix(p_m | gamma(v_m, t_m; Xi))``.

    The sampling-density term is dropped; it does not depend on ``Xi``.
    """
    Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
    return _Objective(samples, spectral, *Xi.shape, fam).value(Xi)


def gradient(Xi, samples: SampleSet, spectral: SpectralBasis, fam: MixtureFamily = SIGMOID_BETA) -> np.ndarray:
    Xi = np.atleast_2d(np.asarray(Xi, dtype=float))
    return _Objective(samples, spectral, *Xi.shape, fam).grad(Xi)


def fit_mle(
    samples: SampleSet,
    spectral: SpectralBasis,
    K1: int,
    K2: int,
    box: float = DEFAULT_BOX,
    tol: float = 1e-6,
    max_iters: int = 5000,
    rel_tol: float = 1e-10,
    init=None,
    fam: MixtureFamily = SIGMOID_BETA,
) -> FitResult:
    """Projected gradient ascent with Armijo backtracking over ``[-box, box]^(K1 x K2)``.

    Trial steps start from a Barzilai-Borwein estimate (1.0 on the first
    iteration) and are halved until the Armijo condition holds, so the
    objective never decreases. Stops when the projected gradient has
    sup-norm <= ``tol``, when the relative objective change is <= ``rel_tol``,
    or after ``max_iters`` iterations (``converged=False``).
    """
    if len(samples) == 0:
        raise EmptySample("no samples to fit")
    if K1 > spectral.n_vertices:
        raise ModelOrderError(f"K1={K1} exceeds N={spectral.n_vertices}")
    obj = _Objective(samples, spectral, K1, K2, fam)

    def project(x):
        return np.clip(x, -box, box)

    x = project(np.zeros((K1, K2)) if init is None else np.array(init, dtype=float).reshape(K1, K2))
    f = obj.value(x)
    g = obj.grad(x)
    history = [f]
    step = 1.0
    converged = False
    it = 0
    while it < max_iters:
        if np.max(np.abs(project(x + g) - x)) <= tol:
            converged = True
            break
        s = step
        while True:
            x_new = project(x + s * g)
            f_new = obj.value(x_new)
            if f_new >= f + ARMIJO_SLOPE * np.sum(g * (x_new - x)):
                break
            s *= SHRINK
            if s < MIN_STEP:
                x_new, f_new = x, f
                break
        it += 1
        if x_new is x:
            # no ascent direction left at machine precision
            converged = True
            break
        assert f_new >= f, "ascent property violated"
        g_new = obj.grad(x_new)
        dx, dg = (x_new - x).ravel(), (g_new - g).ravel()
        curv = -dx @ dg
        step = float(np.clip(dx @ dx / curv, 1e-12, 1e12)) if curv > 0 else 1.0
        rel = abs(f_new - f) / max(1.0, abs(f))
        x, f, g = x_new, f_new, g_new
        history.append(f)
        if rel <= rel_tol:
            converged = True
            break

    M = len(samples)
    return FitResult(
        Xi_hat=x,
        loglik=f,
        iterations=it,
        converged=converged,
        bic=bic_value(K1, K2, M, f),
        clamp_count=samples.clamp_count,
        box=box,
        history=history,
    )


@dataclass
class BICSelection:
    best: FitResult
    table: list

    def to_dict(self) -> dict:
        return {"best": self.best.to_dict(), "candidates": self.table}


def bic_select(
    samples: SampleSet,
    spectral: SpectralBasis,
    grid=DEFAULT_GRID,
    box: float = DEFAULT_BOX,
    fam: MixtureFamily = SIGMOID_BETA,
    **opts,
) -> BICSelection:
    """Fit every ``(K1, K2)`` in ``grid`` and keep the smallest BIC.

    Ties go to the smaller ``K1 * K2``, then the smaller ``K1``. Candidates
    whose fit raises are recorded in the table and skipped.
    """
    grid = list(grid)
    if not grid:
        raise ValueError("empty BIC grid")
    fits, table = [], []
    for K1, K2 in grid:
        try:
            fr = fit_mle(samples, spectral, K1, K2, box=box, fam=fam, **opts)
        except MHTError as exc:
            table.append({"K1": K1, "K2": K2, "bic": None, "loglik": None, "error": str(exc)})
            continue
        fits.append(fr)
        table.append({"K1": K1, "K2": K2, "bic": fr.bic, "loglik": fr.loglik,
                      "converged": fr.converged, "error": None})
    if not fits:
        raise ModelOrderError("every BIC candidate failed: " + "; ".join(r["error"] for r in table))
    best = min(fits, key=lambda fr: (fr.bic, fr.K1 * fr.K2, fr.K1))
    return BICSelection(best=best, table=table)

"""lfdr step-up rejection, the Benjamini-Hochberg baseline, and FDP/TPP evaluation."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import EmptySample, ShapeError
from .pvalue_model import SIGMOID_BETA, UNIFORM_NULL, lfdr

# below this gap the float prefix-sum comparison is re-done exactly
_EXACT_BAND = 1e-9


@dataclass(frozen=True)
class DetectionResult:
    lfdr_values: np.ndarray
    eta_hat: float | None
    reject: np.ndarray
    method: str

    @property
    def n_reject(self) -> int:
        return int(self.reject.sum())


@dataclass(frozen=True)
class EvalRecord:
    fdp: float
    tpp: float
    n_reject: int
    n_false_reject: int
    n_alternatives: int


def lfdr_vector(samples, sig, fam=SIGMOID_BETA, null=UNIFORM_NULL) -> np.ndarray:
    """lfdr of each sample under the signal ``sig`` (fitted or true)."""
    zeta = sig(samples.v, samples.t)
    return np.atleast_1d(lfdr(fam, null, samples.p, zeta, samples.v, samples.t))


def _prefix_ok(sorted_vals: np.ndarray, alpha: float) -> np.ndarray:
    """``ok[k-1]`` is True iff ``sum(sorted_vals[:k]) <= k * alpha`` in exact arithmetic."""
    k = np.arange(1, len(sorted_vals) + 1)
    gap = np.cumsum(sorted_vals) - k * alpha
    ok = gap <= 0
    close = np.abs(gap) <= _EXACT_BAND * k
    if np.any(close):
        a = Fraction(alpha)
        s = Fraction(0)
        for i, x in enumerate(sorted_vals):
            s += Fraction(float(x))
            if close[i]:
                ok[i] = s <= (i + 1) * a
    return ok


def step_up_threshold(lfdrs, alpha: float):
    """Largest lfdr threshold whose rejection set has mean lfdr <= ``alpha``.

    Candidate thresholds are the observed lfdr values; for threshold ``eta``
    every test with ``lfdr <= eta`` is rejected, so tied values are rejected
    together. Returns ``(eta_hat, mask)``; ``eta_hat`` is None when nothing
    can be rejected.
    """
    vals = np.asarray(lfdrs, dtype=float)
    if vals.size == 0:
        raise EmptySample("no lfdr values")
    if np.any(~((vals >= 0) & (vals <= 1))):
        raise ValueError("lfdr values must lie in [0, 1]")
    srt = np.sort(vals, kind="stable")
    ok = _prefix_ok(srt, alpha)
    # only positions that close a block of ties are reachable thresholds
    block_end = np.append(srt[1:] > srt[:-1], True)
    cand = np.flatnonzero(ok & block_end)
    if cand.size == 0:
        return None, np.zeros(vals.shape, dtype=bool)
    eta = float(srt[cand[-1]])
    return eta, vals <= eta


def detect_lfdr(lfdrs, alpha: float, method: str = "mht-ggsp") -> DetectionResult:
    vals = np.asarray(lfdrs, dtype=float)
    eta, mask = step_up_threshold(vals, alpha)
    return DetectionResult(lfdr_values=vals, eta_hat=eta, reject=mask, method=method)


def bh_procedure(pvals, alpha: float) -> np.ndarray:
    """Benjamini-Hochberg step-up: reject every p <= max{p_(i) : p_(i) <= i alpha / M}."""
    p = np.asarray(pvals, dtype=float)
    if p.size == 0:
        raise EmptySample("no p-values")
    m = p.size
    srt = np.sort(p)
    rungs = np.arange(1, m + 1) * alpha / m
    passing = np.flatnonzero(srt <= rungs)
    if passing.size == 0:
        return np.zeros(m, dtype=bool)
    return p <= srt[passing[-1]]


def evaluate(reject, theta) -> EvalRecord:
    """Realised false discovery and true positive proportions of one rejection set."""
    reject = np.asarray(reject, dtype=bool)
    theta = np.asarray(theta)
    if reject.shape != theta.shape:
        raise ShapeError(f"mask shape {reject.shape} != truth shape {theta.shape}")
    if np.any((theta != 0) & (theta != 1)):
        raise ShapeError("truth must be 0/1")
    theta = theta.astype(bool)
    n_rej = int(reject.sum())
    n_false = int((reject & ~theta).sum())
    n_alt = int(theta.sum())
    n_true = n_rej - n_false
    return EvalRecord(
        fdp=n_false / max(n_rej, 1),
        tpp=n_true / max(n_alt, 1),
        n_reject=n_rej,
        n_false_reject=n_false,
        n_alternatives=n_alt,
    )


def write_rejection_map(path, samples, lfdrs, reject) -> None:
    """Per-sample CSV: vertex,time_index,p,lfdr,rejected,theta.

    ``time_index`` falls back to the raw time when samples are not on a grid;
    ``lfdr`` and ``theta`` are blank when unavailable.
    """
    ti = samples.time_index if samples.time_index is not None else samples.t
    theta = samples.theta
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex", "time_index", "p", "lfdr", "rejected", "theta"])
        for m in range(len(samples)):
            w.writerow([
                int(samples.v[m]),
                ti[m].item(),
                repr(float(samples.p[m])),
                "" if lfdrs is None else repr(float(lfdrs[m])),
                int(reject[m]),
                "" if theta is None else int(theta[m]),
            ])

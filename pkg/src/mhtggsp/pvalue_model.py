"""Two-group p-value model: mixture density, null density, pi0, f1 and lfdr.

The null proportion and alternative density are recovered from the mixture
via ``pi0 = f_mix(1) / f0(1)`` and ``f1 = (f_mix - pi0 f0) / (1 - pi0)``,
which holds whenever f1(1) = 0 and f0 is nondecreasing.
"""
from __future__ import annotations

import numpy as np
from scipy.special import expit, log_expit

from .errors import DomainError, ModelViolation

P_FLOOR = 1e-15
F1_NEG_TOL = -1e-12


def sigmoid(x):
    """Logistic function; saturates without overflow for large ``|x|``."""
    out = expit(np.asarray(x, dtype=float))
    return float(out) if np.ndim(out) == 0 else out


def clamp_pvalues(p):
    """Clip p-values into ``[1e-15, 1]``; returns the array and the number clipped."""
    p = np.asarray(p, dtype=float)
    if np.any(np.isnan(p)):
        raise DomainError("NaN p-value")
    clipped = np.clip(p, P_FLOOR, 1.0)
    return clipped, int(np.count_nonzero(clipped != p))


def _check_p(p):
    p = np.asarray(p, dtype=float)
    if np.any(~(p > 0)) or np.any(p > 1):
        raise DomainError("p-values must lie in (0, 1]")
    return p


class MixtureFamily:
    """Parametric family ``f_mix(p | zeta)`` on (0, 1].

    Subclasses implement :meth:`log_density` and :meth:`dlog_dzeta`; both
    must broadcast over ``p`` and ``zeta``.
    """

    name = "abstract"

    def log_density(self, p, zeta):
        raise NotImplementedError

    def dlog_dzeta(self, p, zeta):
        raise NotImplementedError

    def density(self, p, zeta):
        return np.exp(self.log_density(p, zeta))

    def sample(self, zeta, rng):
        raise NotImplementedError


class SigmoidBeta(MixtureFamily):
    """``f_mix(p | zeta) = a p^(a - 1)`` with ``a = sigmoid(zeta)``, i.e. Beta(a, 1)."""

    name = "sigmoid-beta"

    def log_density(self, p, zeta):
        zeta = np.asarray(zeta, dtype=float)
        return log_expit(zeta) + (expit(zeta) - 1.0) * np.log(p)

    def dlog_dzeta(self, p, zeta):
        a = expit(np.asarray(zeta, dtype=float))
        return (1.0 - a) * (1.0 + a * np.log(p))

    def sample(self, zeta, rng):
        # inverse CDF of Beta(a, 1): F(p) = p^a
        a = expit(np.asarray(zeta, dtype=float))
        u = rng.random(a.shape)
        return u ** (1.0 / a)


class UniformNull:
    """Null density f0 = 1 on [0, 1] at every (v, t)."""

    name = "uniform"

    def density(self, p, v=None, t=None):
        return np.ones_like(np.asarray(p, dtype=float))

    def cdf(self, p, v=None, t=None):
        return np.clip(np.asarray(p, dtype=float), 0.0, 1.0)


SIGMOID_BETA = SigmoidBeta()
UNIFORM_NULL = UniformNull()

FAMILIES = {SIGMOID_BETA.name: SIGMOID_BETA}


def _scalar(x):
    return float(x) if np.ndim(x) == 0 else x


def mixture_density(fam: MixtureFamily, p, zeta):
    return _scalar(fam.density(_check_p(p), zeta))


def pi0_of(fam: MixtureFamily, null, zeta, v=None, t=None):
    """Null proportion implied by the mixture at parameter ``zeta``."""
    one = np.ones(np.shape(zeta))
    f0_one = null.density(one, v, t)
    pi0 = fam.density(one, zeta) / f0_one
    if np.any(~((pi0 > 0) & (pi0 < 1))):
        raise ModelViolation("pi0 outside (0, 1)")
    return _scalar(pi0)


def f1_of(fam: MixtureFamily, null, p, zeta, v=None, t=None):
    p = _check_p(p)
    pi0 = pi0_of(fam, null, zeta, v, t)
    f1 = (fam.density(p, zeta) - pi0 * null.density(p, v, t)) / (1.0 - pi0)
    if np.any(f1 < F1_NEG_TOL):
        raise ModelViolation("negative alternative density")
    return _scalar(np.maximum(f1, 0.0))


def lfdr(fam: MixtureFamily, null, p, zeta, v=None, t=None):
    """``pi0 f0(p) / f_mix(p | zeta)``, clipped into [0, 1]."""
    p = _check_p(p)
    one = np.ones(np.broadcast(p, np.asarray(zeta)).shape)
    # pi0 * f0(p) / f_mix(p) evaluated in log space for tiny p
    log_pi0 = fam.log_density(one, zeta) - np.log(null.density(one, v, t))
    val = np.exp(log_pi0 + np.log(null.density(p, v, t)) - fam.log_density(p, zeta))
    return _scalar(np.clip(val, 0.0, 1.0))

"""Synthetic data: a model-matched two-group sampler and a moving-transmitter sensor network.

Sensor placement (and hence the graph) is fixed by ``cfg.seed``. Everything
drawn per realisation (samples, walks, shadowing, noise) comes from the
``rng`` passed to ``generate``, so Monte Carlo repetitions can use
independent streams over one graph.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from functools import cached_property

import numpy as np
from scipy import stats
from scipy.linalg import LinAlgError, cholesky
from scipy.special import logsumexp

from .basis import BandlimitedSignal, DEFAULT_BOX
from .errors import DegenerateInput, NumericalError
from .estimator import SampleSet
from .graph import SpatialGraph, build_knn_graph, graph_fourier_basis
from .pvalue_model import SIGMOID_BETA, UNIFORM_NULL, lfdr

GP_JITTER = 1e-8


def grid_times(T: int) -> np.ndarray:
    """``T + 1`` equally spaced times from -pi to pi inclusive."""
    if T < 1:
        raise DegenerateInput(f"T must be >= 1, got {T}")
    return -np.pi + 2 * np.pi * np.arange(T + 1) / T


@dataclass
class GeneratedData:
    samples: SampleSet
    graph: SpatialGraph
    oracle_lfdr: np.ndarray
    gamma_true: np.ndarray | None = None
    distance: np.ndarray | None = None
    paths: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def null_proportion(self) -> float:
        return float(np.mean(self.samples.theta == 0))


# -- model-matched ----------------------------------------------------------

@dataclass(frozen=True)
class ModelMatchedConfig:
    """Data drawn exactly from the sigmoid-beta two-group model.

    ``sampling`` is ``"iid"`` (``M`` uniform draws over vertices x [-pi, pi])
    or ``"grid"`` (every vertex at each of ``grid_times(T)``).
    """

    Xi_true: tuple
    n_sensors: int = 50
    knn_k: int = 5
    extent: float = 100.0
    sampling: str = "iid"
    M: int = 1000
    T: int = 9
    box: float = DEFAULT_BOX
    seed: int = 0

    def __post_init__(self):
        Xi = np.atleast_2d(np.asarray(self.Xi_true, dtype=float))
        object.__setattr__(self, "Xi_true", tuple(map(tuple, Xi.tolist())))
        if self.sampling not in ("iid", "grid"):
            raise DegenerateInput(f"unknown sampling design {self.sampling!r}")
        if self.n_sensors < 2 or self.knn_k < 1 or self.extent <= 0:
            raise DegenerateInput("need n_sensors >= 2, knn_k >= 1, extent > 0")
        if self.sampling == "iid" and self.M < 1:
            raise DegenerateInput("M must be >= 1")
        if self.sampling == "grid" and self.T < 1:
            raise DegenerateInput("T must be >= 1")
        if Xi.shape[0] > self.n_sensors:
            raise DegenerateInput(f"K1={Xi.shape[0]} exceeds n_sensors={self.n_sensors}")
        if np.any(np.abs(Xi) > self.box):
            raise DegenerateInput(f"Xi_true outside box B={self.box}")


class ModelMatchedScenario:
    kind = "model-matched"

    def __init__(self, cfg: ModelMatchedConfig):
        self.cfg = cfg
        place = np.random.default_rng([cfg.seed, 0])
        coords = place.uniform(0.0, cfg.extent, size=(cfg.n_sensors, 2))
        self.graph = build_knn_graph(coords, cfg.knn_k)
        self.spectral = graph_fourier_basis(self.graph)
        self.signal = BandlimitedSignal(np.array(cfg.Xi_true), self.spectral, box=cfg.box)

    def sample_points(self, rng):
        cfg = self.cfg
        if cfg.sampling == "grid":
            times = grid_times(cfg.T)
            v = np.repeat(np.arange(cfg.n_sensors), len(times))
            idx = np.tile(np.arange(len(times)), cfg.n_sensors)
            return v, times[idx], idx
        v = rng.integers(0, cfg.n_sensors, size=cfg.M)
        t = rng.uniform(-np.pi, np.pi, size=cfg.M)
        return v, t, None

    def generate(self, rng=None) -> GeneratedData:
        """Draw p from the mixture marginal, then theta | p ~ Bernoulli(1 - lfdr).

        This is the same joint law as drawing theta first and p | theta second.
        """
        rng = np.random.default_rng([self.cfg.seed, 1]) if rng is None else rng
        v, t, idx = self.sample_points(rng)
        gamma = self.signal(v, t)
        p = SIGMOID_BETA.sample(gamma, rng)
        p = np.maximum(p, np.finfo(float).tiny)
        ell = lfdr(SIGMOID_BETA, UNIFORM_NULL, p, gamma)
        theta = (rng.random(len(p)) < 1.0 - ell).astype(int)
        samples = SampleSet.from_arrays(v, t, p, theta=theta, time_index=idx)
        oracle = np.atleast_1d(lfdr(SIGMOID_BETA, UNIFORM_NULL, samples.p, gamma))
        return GeneratedData(
            samples=samples,
            graph=self.graph,
            oracle_lfdr=oracle,
            gamma_true=gamma,
            metadata={"expected_null_proportion": float(np.mean(SIGMOID_BETA.density(1.0, gamma)))},
        )


def gen_model_matched(cfg: ModelMatchedConfig, rng=None) -> GeneratedData:
    return ModelMatchedScenario(cfg).generate(rng)


# -- Gaussian process shadowing --------------------------------------------

def se_kernel(coords, variance: float, length_scale: float) -> np.ndarray:
    X = np.asarray(coords, dtype=float)
    sq = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=-1)
    return variance * np.exp(-sq / (2.0 * length_scale ** 2))


def gp_factor(coords, variance: float, length_scale: float) -> np.ndarray:
    """Lower Cholesky factor of the squared-exponential covariance plus jitter."""
    if variance <= 0 or length_scale <= 0:
        raise DegenerateInput("GP variance and length scale must be positive")
    K = se_kernel(coords, variance, length_scale)
    K[np.diag_indices_from(K)] += GP_JITTER
    try:
        return cholesky(K, lower=True)
    except LinAlgError as exc:
        raise NumericalError(f"GP covariance factorisation failed: {exc}") from exc


def gp_sample(coords, variance: float, length_scale: float, seed=None, rng=None) -> np.ndarray:
    """One zero-mean draw of the squared-exponential GP at ``coords``."""
    L = gp_factor(coords, variance, length_scale)
    rng = np.random.default_rng(seed) if rng is None else rng
    return L @ rng.standard_normal(L.shape[0])


# -- moving transmitters ----------------------------------------------------

@dataclass(frozen=True)
class TransmitterConfig:
    """Transmitters on random walks over a ``grid_side`` x ``grid_side`` grid.

    Received power at a sensor is ``x0 10^((s + C) / 10) sum_j (lambda / (4 pi d_j))^2``
    with ``s`` a shadowing field in dB; distances are floored at ``min_distance``.
    """

    grid_side: int = 100
    n_sensors: int = 300
    knn_k: int = 10
    n_transmitters: int = 2
    T: int = 9
    x0: float = 3.4e6
    wavelength: float = 0.125
    const_C: float = 0.0
    gp_variance: float = 4.0
    gp_length_scale: float = 10.0
    noise_var: float = 1.5
    tau0: float = 0.1
    walk_step: int = 5
    min_distance: float = 1.0
    seed: int = 0

    def __post_init__(self):
        positive = ("grid_side", "n_sensors", "knn_k", "n_transmitters", "T", "wavelength",
                    "gp_variance", "gp_length_scale", "noise_var", "tau0", "min_distance")
        bad = [name for name in positive if not getattr(self, name) > 0]
        if self.x0 < 0:
            bad.append("x0")
        if self.walk_step < 0:
            bad.append("walk_step")
        if bad:
            raise DegenerateInput(f"transmitter config fields must be positive: {', '.join(bad)}")
        if self.n_sensors > self.grid_side ** 2:
            raise DegenerateInput("more sensors than grid points")

    def to_dict(self) -> dict:
        return asdict(self)


def two_sided_pvalue(y, sigma: float):
    """``P(Y^2 >= y^2)`` for ``Y ~ N(0, sigma^2)``: chi-squared(1) survival of ``(y / sigma)^2``."""
    return 2.0 * stats.norm.sf(np.abs(y) / sigma)


class TransmitterScenario:
    kind = "transmitter"

    def __init__(self, cfg: TransmitterConfig):
        self.cfg = cfg
        place = np.random.default_rng([cfg.seed, 0])
        flat = place.choice(cfg.grid_side ** 2, size=cfg.n_sensors, replace=False)
        coords = np.column_stack([flat % cfg.grid_side, flat // cfg.grid_side]).astype(float)
        self.coords = coords
        self.graph = build_knn_graph(coords, cfg.knn_k)
        self.spectral = graph_fourier_basis(self.graph)
        self.times = grid_times(cfg.T)

    @cached_property
    def _gp_L(self):
        return gp_factor(self.coords, self.cfg.gp_variance, self.cfg.gp_length_scale)

    def walk(self, rng) -> np.ndarray:
        """Transmitter positions, shape ``(T + 1, n_transmitters, 2)``."""
        cfg = self.cfg
        hi = cfg.grid_side - 1
        pos = rng.integers(0, cfg.grid_side, size=(cfg.n_transmitters, 2))
        out = [pos]
        for _ in range(cfg.T):
            step = rng.integers(-1, 2, size=(cfg.n_transmitters, 2)) * cfg.walk_step
            pos = np.clip(pos + step, 0, hi)
            out.append(pos)
        return np.array(out, dtype=float)

    def gain(self, paths) -> tuple[np.ndarray, np.ndarray]:
        """Summed free-space gain and nearest-transmitter distance, shape ``(T + 1, N)``."""
        cfg = self.cfg
        d = np.linalg.norm(self.coords[None, None, :, :] - paths[:, :, None, :], axis=-1)
        d = np.maximum(d, cfg.min_distance)
        g = ((cfg.wavelength / (4 * np.pi * d)) ** 2).sum(axis=1)
        return g, d.min(axis=1)

    def generate(self, rng=None) -> GeneratedData:
        cfg = self.cfg
        rng = np.random.default_rng([cfg.seed, 1]) if rng is None else rng
        paths = self.walk(rng)
        g, dist = self.gain(paths)
        n_t, n = g.shape
        shadow = (self._gp_L @ rng.standard_normal((n, n_t))).T
        x = cfg.x0 * 10.0 ** ((shadow + cfg.const_C) / 10.0) * g
        theta = (np.abs(x) > cfg.tau0).astype(int)
        sigma = np.sqrt(cfg.noise_var)
        y = x + sigma * rng.standard_normal(x.shape)
        p = two_sided_pvalue(y, sigma)

        # vertex-major flattening, matching the model-matched grid layout
        v = np.repeat(np.arange(n), n_t)
        idx = np.tile(np.arange(n_t), n)
        pick = lambda a: a.T.ravel()
        samples = SampleSet.from_arrays(v, self.times[idx], pick(p), theta=pick(theta), time_index=idx)
        oracle = transmitter_posterior_null(samples.p, pick(g), cfg)
        return GeneratedData(
            samples=samples,
            graph=self.graph,
            oracle_lfdr=oracle,
            distance=pick(dist),
            paths=paths,
            metadata={"null_proportion": float(np.mean(theta == 0))},
        )


def gen_transmitter_scenario(cfg: TransmitterConfig, rng=None) -> GeneratedData:
    return TransmitterScenario(cfg).generate(rng)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def transmitter_posterior_null(p, gain, cfg: TransmitterConfig) -> np.ndarray:
    """Exact ``P(theta = 0 | p, transmitter geometry)`` for the transmitter model.

    The shadowing marginal ``s ~ N(0, gp_variance)`` is integrated out with
    Gauss-Legendre quadrature in probability space, split at the shadowing
    level where the received power crosses ``tau0``. This is the lfdr an
    oracle that knows the transmitter positions (but not the shadowing
    realisation) would use.
    """
    p = np.asarray(p, dtype=float)
    gain = np.asarray(gain, dtype=float)
    sigma = np.sqrt(cfg.noise_var)
    sd = np.sqrt(cfg.gp_variance)
    z = stats.norm.isf(p / 2.0)[:, None]
    base = cfg.x0 * gain * 10.0 ** (cfg.const_C / 10.0)
    with np.errstate(divide="ignore"):
        s_star = 10.0 * np.log10(cfg.tau0 / base)
    u_star = stats.norm.cdf(s_star / sd)[:, None]

    def log_mass(lo, hi):
        # log of integral over u in [lo, hi] of the likelihood ratio vs. x = 0
        width = hi - lo
        u = lo + width * (_GL_NODES[None, :] + 1.0) / 2.0
        u = np.clip(u, 1e-300, 1.0 - 1e-16)
        s = sd * stats.norm.ppf(u)
        mu = base[:, None] * 10.0 ** (s / 10.0) / sigma
        log_lr = -0.5 * mu ** 2 + np.logaddexp(z * mu, -z * mu) - np.log(2.0)
        w = np.log(_GL_WEIGHTS[None, :] / 2.0) + np.log(np.maximum(width, 1e-300))
        out = logsumexp(log_lr + w, axis=1)
        return np.where(width[:, 0] > 0, out, -np.inf)

    zero = np.zeros_like(u_star)
    one = np.ones_like(u_star)
    ln_null = log_mass(zero, u_star)
    ln_alt = log_mass(u_star, one)
    with np.errstate(invalid="ignore"):
        post = np.exp(ln_null - np.logaddexp(ln_null, ln_alt))
    return np.clip(np.nan_to_num(post, nan=1.0), 0.0, 1.0)


def make_scenario(cfg):
    if isinstance(cfg, ModelMatchedConfig):
        return ModelMatchedScenario(cfg)
    if isinstance(cfg, TransmitterConfig):
        return TransmitterScenario(cfg)
    raise TypeError(f"unknown scenario config {type(cfg).__name__}")

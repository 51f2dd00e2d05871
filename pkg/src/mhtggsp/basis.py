"""Time basis on [-pi, pi], joint vertex-time design rows, and bandlimited signals.

Time basis ordering (1-based ``k``)::

    k = 1      ->  1 / sqrt(2 pi)
    k = 2j     ->  sin(j t) / sqrt(pi)
    k = 2j + 1 ->  cos(j t) / sqrt(pi)

A bandlimited signal is ``gamma(v, t) = sum_{k1, k2} Xi[k1, k2] phi_k1(v) psi_k2(t)``
where ``phi`` are graph Fourier basis vectors.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ModelOrderError
from .graph import SpectralBasis

DEFAULT_BOX = 10.0
_T_TOL = 1e-12


def _check_times(t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    bad = ~((t >= -np.pi - _T_TOL) & (t <= np.pi + _T_TOL))
    if np.any(bad):
        raise DomainError(f"time {t[bad].flat[0]!r} outside [-pi, pi]")
    return t


def time_basis_eval(k: int, t: float) -> float:
    if k < 1:
        raise DomainError(f"time basis index must be >= 1, got {k}")
    t = float(_check_times(t))
    if k == 1:
        return 1.0 / np.sqrt(2 * np.pi)
    j = k // 2
    fn = np.sin if k % 2 == 0 else np.cos
    return float(fn(j * t) / np.sqrt(np.pi))


def time_basis_matrix(t, K2: int) -> np.ndarray:
    """Evaluate psi_1..psi_K2 at every time; shape ``(len(t), K2)``."""
    t = np.atleast_1d(_check_times(t))
    out = np.empty((t.size, K2))
    out[:, 0] = 1.0 / np.sqrt(2 * np.pi)
    for k in range(2, K2 + 1):
        j = k // 2
        fn = np.sin if k % 2 == 0 else np.cos
        out[:, k - 1] = fn(j * t) / np.sqrt(np.pi)
    return out


def _check_order(spectral: SpectralBasis, K1: int, K2: int) -> None:
    if K1 < 1 or K2 < 1:
        raise ModelOrderError(f"K1, K2 must be positive, got ({K1}, {K2})")
    if K1 > spectral.n_vertices:
        raise ModelOrderError(f"K1={K1} exceeds number of vertices N={spectral.n_vertices}")


def design_matrix(spectral: SpectralBasis, v, t, K1: int, K2: int) -> np.ndarray:
    """Rows ``phi_k1(v_m) psi_k2(t_m)`` flattened row-major in ``(k1, k2)``."""
    _check_order(spectral, K1, K2)
    v = np.atleast_1d(np.asarray(v, dtype=int))
    if np.any((v < 0) | (v >= spectral.n_vertices)):
        raise DomainError(f"vertex index out of range for N={spectral.n_vertices}")
    phi = spectral.eigenvectors[v, :K1]
    psi = time_basis_matrix(t, K2)
    if phi.shape[0] != psi.shape[0]:
        raise DomainError("vertex and time arrays differ in length")
    return (phi[:, :, None] * psi[:, None, :]).reshape(len(v), K1 * K2)


def design_row(spectral: SpectralBasis, v: int, t: float, K1: int, K2: int) -> np.ndarray:
    return design_matrix(spectral, [v], [t], K1, K2)[0]


@dataclass(frozen=True)
class BandlimitedSignal:
    Xi: np.ndarray
    spectral: SpectralBasis
    box: float = DEFAULT_BOX

    def __post_init__(self):
        Xi = np.atleast_2d(np.asarray(self.Xi, dtype=float))
        object.__setattr__(self, "Xi", Xi)
        _check_order(self.spectral, *Xi.shape)
        if np.any(np.abs(Xi) > self.box):
            raise DomainError(f"coefficients exceed box bound B={self.box}")

    @property
    def K1(self) -> int:
        return self.Xi.shape[0]

    @property
    def K2(self) -> int:
        return self.Xi.shape[1]

    def __call__(self, v, t):
        """Evaluate at paired arrays (or scalars) of vertices and times."""
        scalar = np.ndim(v) == 0 and np.ndim(t) == 0
        X = design_matrix(self.spectral, v, t, self.K1, self.K2)
        out = X @ self.Xi.ravel()
        return float(out[0]) if scalar else out

    def to_dict(self) -> dict:
        return {"K1": self.K1, "K2": self.K2, "B": self.box, "Xi": self.Xi.ravel().tolist()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, spectral: SpectralBasis) -> "BandlimitedSignal":
        Xi = np.asarray(d["Xi"], dtype=float).reshape(int(d["K1"]), int(d["K2"]))
        return cls(Xi=Xi, spectral=spectral, box=float(d["B"]))

    @classmethod
    def from_json(cls, text: str, spectral: SpectralBasis) -> "BandlimitedSignal":
        return cls.from_dict(json.loads(text), spectral)


def evaluate_signal(sig: BandlimitedSignal, v, t):
    return sig(v, t)

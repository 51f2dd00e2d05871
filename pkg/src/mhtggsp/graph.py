"""Sensor graph construction and its graph Fourier basis.

The graph shift operator is the combinatorial Laplacian ``L = D - A`` of an
unweighted, undirected k-nearest-neighbour graph. Its eigenvectors, sorted by
eigenvalue, give the graph Fourier basis used for bandlimited signals.
"""
from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DegenerateInput, InvalidOperator

SYMMETRY_TOL = 1e-10
SIGN_TOL = 1e-12


@dataclass(frozen=True)
class SpatialGraph:
    """Undirected, loop-free graph on ``n_vertices`` sensors.

    Edges are stored once as ``(u, v)`` with ``u < v``.
    """

    coords: np.ndarray
    edges: frozenset
    n_vertices: int
    notes: tuple = field(default=(), compare=False)

    def __post_init__(self):
        n = self.n_vertices
        if n < 1:
            raise DegenerateInput("graph needs at least one vertex")
        for u, v in self.edges:
            if u == v:
                raise DegenerateInput(f"self-loop at vertex {u}")
            if not (0 <= u < v < n):
                raise DegenerateInput(f"edge ({u}, {v}) not normalised or out of range for N={n}")

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.n_vertices, self.n_vertices))
        for u, v in self.edges:
            A[u, v] = A[v, u] = 1.0
        return A

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def n_components(self) -> int:
        """Connected components by union-find."""
        parent = list(range(self.n_vertices))

        def find(i):
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for u, v in self.edges:
            ru, rv = find(u), find(v)
            if ru != rv:
                parent[ru] = rv
        return len({find(i) for i in range(self.n_vertices)})


@dataclass(frozen=True)
class SpectralBasis:
    """Eigenpairs of a symmetric shift operator in graph-frequency order.

    ``eigenvectors[:, k]`` is the k-th basis vector (0-based here, so the
    constant vector of a connected Laplacian is column 0).
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n_vertices(self) -> int:
        return self.eigenvectors.shape[0]


def _edge(u, v):
    u, v = int(u), int(v)
    return (u, v) if u < v else (v, u)


def build_knn_graph(coords, k: int) -> SpatialGraph:
    """Connect each point to its ``k`` nearest Euclidean neighbours.

    The directed kNN relation is symmetrised by union. Distance ties are broken
    in favour of the lower vertex index, so the result is deterministic.
    If ``k >= N`` it is clamped to ``N - 1`` and a warning is emitted.
    """
    pts = np.asarray(coords, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise DegenerateInput(f"coords must be an (N, 2) array, got shape {pts.shape}")
    n = pts.shape[0]
    if n < 2:
        raise DegenerateInput("need at least 2 points to build a kNN graph")
    if k < 1:
        raise DegenerateInput(f"k must be >= 1, got {k}")
    if len(np.unique(pts, axis=0)) != n:
        raise DegenerateInput("duplicate coordinates")

    notes = ()
    if k >= n:
        msg = f"k={k} >= N={n}; clamped to {n - 1}"
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
        notes = (msg,)
        k = n - 1

    diff = pts[:, None, :] - pts[None, :, :]
    dist = np.sqrt((diff ** 2).sum(axis=-1))
    np.fill_diagonal(dist, np.inf)
    # stable sort: equal distances keep ascending vertex order
    order = np.argsort(dist, axis=1, kind="stable")[:, :k]
    edges = frozenset(_edge(i, j) for i in range(n) for j in order[i])
    return SpatialGraph(coords=pts, edges=edges, n_vertices=n, notes=notes)


def laplacian(g: SpatialGraph) -> np.ndarray:
    A = g.adjacency()
    return np.diag(A.sum(axis=1)) - A


def _fix_signs(vecs: np.ndarray) -> np.ndarray:
    vecs = vecs.copy()
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        big = np.flatnonzero(np.abs(col) > SIGN_TOL)
        if big.size and col[big[0]] < 0:
            vecs[:, j] = -col
    return vecs


def eigendecompose(S) -> SpectralBasis:
    """Dense symmetric eigendecomposition with a fixed sign convention.

    In each eigenvector the first entry with magnitude above 1e-12 is made
    positive, which pins the basis up to genuine eigenspace multiplicity.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise InvalidOperator(f"shift operator must be square, got shape {S.shape}")
    asym = np.max(np.abs(S - S.T)) if S.size else 0.0
    if asym > SYMMETRY_TOL:
        raise InvalidOperator(f"shift operator not symmetric (max asymmetry {asym:.3g})")
    vals, vecs = np.linalg.eigh(0.5 * (S + S.T))
    return SpectralBasis(eigenvalues=vals, eigenvectors=_fix_signs(vecs))


def graph_fourier_basis(g: SpatialGraph) -> SpectralBasis:
    return eigendecompose(laplacian(g))


# -- file formats -----------------------------------------------------------

def write_edge_list(g: SpatialGraph, path) -> None:
    lines = [str(g.n_vertices)] + [f"{u} {v}" for u, v in sorted(g.edges)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_edge_list(path, coords=None) -> SpatialGraph:
    rows = [ln.split() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not rows:
        raise DegenerateInput(f"{path}: empty edge list")
    n = int(rows[0][0])
    edges = frozenset(_edge(u, v) for u, v in rows[1:])
    if coords is None:
        coords = np.full((n, 2), np.nan)
    return SpatialGraph(coords=np.asarray(coords, dtype=float), edges=edges, n_vertices=n)


def write_coords_csv(coords, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["vertex_id", "x", "y"])
        for i, (x, y) in enumerate(np.asarray(coords, dtype=float)):
            w.writerow([i, repr(float(x)), repr(float(y))])


def read_coords_csv(path) -> np.ndarray:
    with open(path, newline="") as fh:
        rows = sorted(csv.DictReader(fh), key=lambda r: int(r["vertex_id"]))
    ids = [int(r["vertex_id"]) for r in rows]
    if ids != list(range(len(ids))):
        raise DegenerateInput(f"{path}: vertex ids must be 0..N-1")
    return np.array([[float(r["x"]), float(r["y"])] for r in rows])

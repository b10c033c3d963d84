"""Undirected weighted communication topologies and their spectral objects.

The consensus analysis runs on three matrices derived from a graph: the
Laplacian ``L``, the centering matrix ``E = I - (1/n) 11^T``, and a
pseudo-inverse-like matrix ``F`` built from the eigendecomposition of ``L``
that satisfies ``F L = L F = E`` on connected graphs.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# A graph counts as connected when the second-smallest Laplacian eigenvalue
# clears this scale-relative floor.
CONNECTIVITY_RTOL = 1e-8


@dataclass(frozen=True)
class Graph:
    """Undirected weighted graph on ``n`` agents.

    ``weights`` is the symmetric nonnegative adjacency matrix with zero
    diagonal. Instances are immutable; the array is frozen on construction.
    """

    weights: np.ndarray

    def __post_init__(self) -> None:
        w = np.array(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"adjacency matrix must be square, got shape {w.shape}")
        if w.shape[0] < 1:
            raise ValueError("graph needs at least one agent")
        if not np.array_equal(w, w.T):
            raise ValueError("adjacency matrix must be symmetric")
        if np.any(np.diag(w) != 0.0):
            raise ValueError("adjacency matrix must have a zero diagonal")
        if np.any(w < 0.0):
            raise ValueError("edge weights must be nonnegative")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @property
    def n(self) -> int:
        return self.weights.shape[0]

    def neighbors(self, i: int) -> np.ndarray:
        """Indices j with a positive-weight edge {i, j}."""
        return np.flatnonzero(self.weights[i] > 0.0)

    def degree_matrix(self) -> np.ndarray:
        return np.diag(self.weights.sum(axis=1))


@dataclass(frozen=True)
class Spectrum:
    """Laplacian eigenvalues of a graph, sorted ascending.

    ``rho`` is the largest eigenvalue, ``rho2`` the smallest positive one
    (``nan`` for an edgeless graph), and ``connected`` reflects whether the
    second-smallest eigenvalue clears the connectivity tolerance.
    """

    eigenvalues: np.ndarray
    rho: float
    rho2: float
    connected: bool


@dataclass(frozen=True)
class MixingMatrices:
    """The matrix triple (L, E, F) used by the update and the diagnostics.

    ``lambda_extra`` is the eigenvalue assigned to the all-ones direction
    when building ``F``; any value in ``[lambda_2, lambda_n]`` is valid.
    """

    L: np.ndarray
    E: np.ndarray
    F: np.ndarray
    lambda_extra: float


def erdos_renyi(n: int, prob: float, seed: int) -> Graph:
    """Sample a G(n, prob) graph with unit edge weights.

    Each unordered pair is an edge independently with probability ``prob``.
    Disconnected samples are returned as-is; callers that need connectivity
    must check and resample explicitly.
    """
    if n < 2:
        raise ValueError(f"need at least two agents, got n={n}")
    if not 0.0 <= prob <= 1.0:
        raise ValueError(f"edge probability must lie in [0, 1], got {prob}")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    w = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    draws = rng.random(len(iu[0]))
    w[iu] = (draws < prob).astype(float)
    w = w + w.T
    return Graph(w)


def ring(n: int) -> Graph:
    """Cycle graph with unit weights."""
    if n < 3:
        raise ValueError(f"a ring needs at least three agents, got n={n}")
    w = np.zeros((n, n))
    for i in range(n):
        w[i, (i + 1) % n] = 1.0
        w[(i + 1) % n, i] = 1.0
    return Graph(w)


def complete(n: int) -> Graph:
    """Complete graph with unit weights."""
    if n < 2:
        raise ValueError(f"a complete graph needs at least two agents, got n={n}")
    w = np.ones((n, n)) - np.eye(n)
    return Graph(w)


def laplacian(g: Graph) -> np.ndarray:
    """L = D - A with D the diagonal of row sums."""
    return g.degree_matrix() - g.weights


def laplacian_spectrum(g: Graph) -> tuple[Spectrum, np.ndarray]:
    """Eigendecomposition of the Laplacian.

    Returns
    -------
    spectrum : Spectrum
        Eigenvalues ascending with connectivity flag.
    eigenvectors : ndarray
        Orthonormal columns matching the eigenvalue order, each scaled so
        its first component of magnitude above 1e-12 is positive. The sign
        convention makes downstream matrices reproducible across platforms.
    """
    lap = laplacian(g)
    vals, vecs = np.linalg.eigh(lap)
    order = np.argsort(vals, kind="stable")
    vals = vals[order]
    vecs = vecs[:, order]
    for j in range(vecs.shape[1]):
        col = vecs[:, j]
        lead = np.flatnonzero(np.abs(col) > 1e-12)
        if lead.size and col[lead[0]] < 0:
            vecs[:, j] = -col
    rho = float(vals[-1])
    tol = CONNECTIVITY_RTOL * max(1.0, rho)
    connected = g.n == 1 or float(vals[1]) > tol
    positive = vals[vals > tol]
    rho2 = float(positive[0]) if positive.size else float("nan")
    return Spectrum(eigenvalues=vals, rho=rho, rho2=rho2, connected=connected), vecs


def centering_matrix(n: int) -> np.ndarray:
    """E = I - (1/n) 11^T, the projector onto the consensus complement."""
    return np.eye(n) - np.ones((n, n)) / n


def f_matrix(
    spectrum: Spectrum,
    eigenvectors: np.ndarray,
    lambda_extra: float | None = None,
) -> MixingMatrices:
    """Build F from the Laplacian eigendecomposition.

    F inverts L on the complement of the all-ones direction and assigns the
    eigenvalue ``1/lambda_extra`` to the all-ones direction itself, so that
    ``F L = L F = E`` and the eigenvalues of F on the complement lie in
    ``[1/rho, 1/rho2]``. ``lambda_extra`` defaults to ``lambda_2``, the
    smallest admissible choice.
    """
    if not spectrum.connected:
        raise ValueError("graph not connected: F is only defined for connected graphs")
    vals = spectrum.eigenvalues
    n = vals.shape[0]
    lam2 = float(vals[1])
    lam_n = float(vals[-1])
    if lambda_extra is None:
        lambda_extra = lam2
    if not lam2 <= lambda_extra <= lam_n:
        raise ValueError(
            f"lambda_extra={lambda_extra} outside the admissible range [{lam2}, {lam_n}]"
        )
    # The zero eigenvector of a connected Laplacian is the normalized ones
    # vector; using it exactly keeps the basis orthogonal to fp accuracy.
    basis = eigenvectors.copy()
    basis[:, 0] = 1.0 / np.sqrt(n)
    inv = np.concatenate(([1.0 / lambda_extra], 1.0 / vals[1:]))
    f = (basis * inv) @ basis.T
    f = (f + f.T) / 2.0
    lap = (basis * np.concatenate(([0.0], vals[1:]))) @ basis.T
    lap = (lap + lap.T) / 2.0
    return MixingMatrices(L=lap, E=centering_matrix(n), F=f, lambda_extra=float(lambda_extra))


def mixing_matrices(g: Graph, lambda_extra: float | None = None) -> tuple[MixingMatrices, Spectrum]:
    """Laplacian spectrum plus the (L, E, F) triple in one call."""
    spec, vecs = laplacian_spectrum(g)
    mix = f_matrix(spec, vecs, lambda_extra)
    # Exact L, not its eigendecomposition reconstruction: the run loop sums
    # integer-weighted rows and must see weights bit-exactly.
    mix = MixingMatrices(L=laplacian(g), E=mix.E, F=mix.F, lambda_extra=mix.lambda_extra)
    return mix, spec


def edge_list_str(g: Graph) -> str:
    """Serialize as one "i j weight" line per edge, zero-based, i < j."""
    lines = [f"# n={g.n}"]
    iu = np.triu_indices(g.n, k=1)
    for i, j in zip(*iu):
        w = float(g.weights[i, j])
        if w > 0.0:
            lines.append(f"{i} {j} {w!r}")
    return "\n".join(lines) + "\n"


def graph_from_edge_list(text: str, n: int | None = None) -> Graph:
    """Parse the edge-list format written by :func:`edge_list_str`.

    ``n`` may be omitted when a "# n=.." header is present or when the
    largest endpoint determines the agent count.
    """
    edges: list[tuple[int, int, float]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            if "n=" in line and n is None:
                n = int(line.split("n=")[1].split()[0])
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"edge list line {lineno}: expected 'i j weight', got {raw!r}")
        i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        if i == j:
            raise ValueError(f"edge list line {lineno}: self-loop {i} {j} not allowed")
        edges.append((i, j, w))
    if n is None:
        if not edges:
            raise ValueError("cannot infer agent count from an empty edge list")
        n = max(max(i, j) for i, j, _ in edges) + 1
    w = np.zeros((n, n))
    for i, j, val in edges:
        if not (0 <= i < n and 0 <= j < n):
            raise ValueError(f"edge ({i}, {j}) out of range for n={n}")
        w[i, j] = val
        w[j, i] = val
    return Graph(w)

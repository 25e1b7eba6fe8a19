"""Weighted graphs, the normalized (random-walk) Laplacian and its dense spectrum."""
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

SYMMETRY_TOL = 1e-9
DEGENERACY_TOL = 1e-10


class GraphError(ValueError):
    pass


class EigenSolverError(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (residual norm {residual:.3e})")
        self.residual = residual


def _frozen(a):
    a = np.array(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class WeightedGraph:
    """Undirected graph stored as a dense symmetric weight matrix.

    ``allow_isolated`` admits nodes without edges; those become singleton
    components with a zero Laplacian row.
    """

    weights: np.ndarray
    allow_isolated: bool = False

    def __post_init__(self):
        W = np.asarray(self.weights, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise GraphError(f"weight matrix must be square, got shape {W.shape}")
        if W.shape[0] < 2:
            raise GraphError("graph needs at least 2 nodes")
        if not np.all(np.isfinite(W)):
            raise GraphError("weight matrix has non-finite entries")
        asym = np.max(np.abs(W - W.T))
        if asym > SYMMETRY_TOL:
            raise GraphError(f"weight matrix is not symmetric (max |W_ij - W_ji| = {asym:.3e})")
        if np.any(W < 0):
            raise GraphError("weights must be nonnegative")
        if np.any(np.diag(W) != 0):
            raise GraphError("self loops are not allowed (W_ii must be 0)")
        W = 0.5 * (W + W.T)
        if not self.allow_isolated:
            lonely = np.flatnonzero(W.sum(axis=1) <= 0)
            if lonely.size:
                raise GraphError(f"disconnected node(s): {lonely[:10].tolist()}")
        object.__setattr__(self, "weights", _frozen(W))

    @property
    def n(self):
        return self.weights.shape[0]

    @property
    def degrees(self):
        return self.weights.sum(axis=1)

    def edge_count(self):
        return int(np.count_nonzero(np.triu(self.weights, 1)))

    @classmethod
    def from_edges(cls, n, edges, **kwargs):
        W = np.zeros((n, n))
        for i, j, w in edges:
            i, j = int(i), int(j)
            if not (0 <= i < n and 0 <= j < n):
                raise GraphError(f"edge ({i}, {j}) out of range for n={n}")
            if i == j:
                raise GraphError(f"self loop at node {i}")
            W[i, j] += w
            W[j, i] += w
        return cls(W, **kwargs)


@dataclass(frozen=True)
class NormalizedLaplacian:
    """``L = I - D^{-1} W`` restricted to nodes with positive degree."""

    matrix: np.ndarray
    degrees: np.ndarray

    @property
    def n(self):
        return self.matrix.shape[0]

    def sparse(self):
        return sp.csr_matrix(self.matrix)

    def row_sums(self):
        return self.matrix.sum(axis=1)


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    gap_index: int
    gap_ratio: float
    degenerate: tuple = field(default=())

    @property
    def zero_multiplicity(self):
        return int(np.sum(np.abs(self.eigenvalues) < 1e-9))


def similarity_from_jacobian(Jbar, allow_isolated=False):
    """Coupling strength ``W_ij = (|J_ij| + |J_ji|) / 2`` with zero diagonal."""
    J = np.asarray(Jbar, dtype=np.float64)
    if J.ndim != 2 or J.shape[0] != J.shape[1]:
        raise GraphError(f"Jacobian must be square, got shape {J.shape}")
    if J.shape[0] < 2:
        raise GraphError("need at least 2 states")
    A = np.abs(J)
    W = 0.5 * (A + A.T)
    np.fill_diagonal(W, 0.0)
    return WeightedGraph(W, allow_isolated=allow_isolated)


def build_normalized_laplacian(g):
    W = g.weights
    deg = W.sum(axis=1)
    if not g.allow_isolated and np.any(deg <= 0):
        raise GraphError("zero-degree row")
    L = np.zeros_like(W)
    live = deg > 0
    L[live] = -W[live] / deg[live, None]
    L[np.diag_indices_from(L)] = np.where(live, 1.0, 0.0)
    return NormalizedLaplacian(_frozen(L), _frozen(deg))


def _canonical_sign(V):
    idx = np.argmax(np.abs(V), axis=0)
    s = np.sign(V[idx, np.arange(V.shape[1])])
    s[s == 0] = 1.0
    return V * s


def _pin_constant_mode(vals, Y, s):
    """Within a degenerate kernel, make the first vector the constant mode.

    ``s`` holds ``sqrt(degree)``; the constant right eigenvector of ``L`` is
    ``D^{1/2} 1`` in the symmetric basis. The rest of the kernel is made
    orthogonal to it, so ``v^(2)`` splits components instead of being an
    arbitrary mixture.
    """
    zero = np.flatnonzero(np.abs(vals) < 1e-9)
    if zero.size < 2:
        return Y
    K = Y[:, zero]
    e = s / np.linalg.norm(s)
    rest = K - np.outer(e, e @ K)
    U, sv, _ = np.linalg.svd(rest, full_matrices=False)
    Y = Y.copy()
    Y[:, zero[0]] = e
    Y[:, zero[1:]] = U[:, :zero.size - 1]
    return Y


def dense_spectrum(L, k=None, gap_mode="absolute"):
    """First ``k`` eigenpairs of ``L`` via the symmetric similarity transform.

    Eigenvectors are right eigenvectors of ``L``, scaled to unit norm with their
    largest-magnitude entry positive. The gap index is computed on the returned
    eigenvalues (all of them when ``k`` is None).
    """
    n = L.n
    k = n if k is None else int(k)
    if not 1 <= k <= n:
        raise ValueError(f"k must lie in [1, {n}], got {k}")
    d = np.asarray(L.degrees)
    live = d > 0
    s = np.where(live, np.sqrt(np.where(live, d, 1.0)), 1.0)
    # D^{1/2} L D^{-1/2} is symmetric for the random-walk Laplacian
    S = (L.matrix * s[:, None]) / s[None, :]
    S = 0.5 * (S + S.T)
    vals, Y = scipy.linalg.eigh(S, subset_by_index=[0, k - 1])
    Y = _pin_constant_mode(vals, Y, s)
    V = Y / s[:, None]
    V /= np.linalg.norm(V, axis=0)
    V = _canonical_sign(V)
    resid = np.linalg.norm(L.matrix @ V - V * vals, axis=0).max()
    scale = max(1.0, np.abs(vals).max())
    if not np.isfinite(resid) or resid > 1e-8 * scale * np.sqrt(n):
        raise EigenSolverError("dense eigensolve failed to converge", resid)
    gap = detect_spectral_gap(vals, mode=gap_mode) if k >= 3 else 1
    diffs = np.diff(vals)
    ratio = float(diffs[gap - 1] / max(np.median(diffs), 1e-300)) if k >= 2 else 0.0
    degenerate = tuple(int(i + 1) for i in np.flatnonzero(diffs < DEGENERACY_TOL) if vals[i] > 1e-9)
    return SpectrumReport(_frozen(vals), _frozen(V), int(gap), ratio, degenerate)


def detect_spectral_gap(eigenvalues, mode="absolute"):
    """Number of eigenvalues below the largest consecutive jump.

    ``mode='ratio'`` compares ``lambda_{i+1} / lambda_i`` instead of the
    difference (zero eigenvalues are skipped in that mode). Ties go to the
    smaller index.
    """
    lam = np.asarray(eigenvalues, dtype=np.float64)
    if lam.size < 3:
        raise ValueError("need at least 3 eigenvalues")
    if mode == "absolute":
        score = np.diff(lam)
    elif mode == "ratio":
        with np.errstate(divide="ignore", invalid="ignore"):
            score = np.where(lam[:-1] > 1e-12, lam[1:] / lam[:-1], -np.inf)
    else:
        raise ValueError(f"unknown gap mode {mode!r}")
    return int(np.argmax(score)) + 1


@dataclass(frozen=True)
class ClusterAssignment:
    labels: np.ndarray
    k_used: int

    def __post_init__(self):
        lab = np.asarray(self.labels, dtype=np.int64)
        if np.any(lab < 0) or (self.k_used < 63 and np.any(lab >= 2 ** self.k_used)):
            raise ValueError("labels out of range for k_used")
        lab.setflags(write=False)
        object.__setattr__(self, "labels", lab)

    @property
    def n_clusters(self):
        return len(np.unique(self.labels))

    def to_json(self):
        return {"k": int(self.k_used), "labels": [int(v) for v in self.labels]}


def sign_cluster(eigenvectors):
    """Binary sign code per node: bit ``j`` is set when ``v^(j)_i >= 0``."""
    V = np.asarray(eigenvectors, dtype=np.float64)
    if V.ndim == 1:
        V = V[:, None]
    bits = (V >= 0).astype(np.int64)
    labels = bits @ (1 << np.arange(V.shape[1], dtype=np.int64))
    return ClusterAssignment(labels, V.shape[1])


def pivoted_qr_cluster(eigenvectors):
    """Assign ``k`` clusters from the first ``k`` eigenvectors without k-means.

    Column-pivoted QR on the row embedding picks ``k`` representative nodes; each
    node joins the representative with the largest-magnitude rotated coordinate.
    Used when the gap calls for more clusters than a sign code resolves reliably.
    """
    V = np.asarray(eigenvectors, dtype=np.float64)
    k = V.shape[1]
    _, _, piv = scipy.linalg.qr(V.T, pivoting=True, mode="economic")
    Q, _ = np.linalg.qr(V[piv[:k]].T)
    labels = np.argmax(np.abs(V @ Q), axis=1)
    # relabel by first appearance for deterministic output
    _, first = np.unique(labels, return_index=True)
    order = np.argsort(first)
    remap = np.empty(k, dtype=np.int64)
    remap[np.unique(labels)[order]] = np.arange(order.size)
    return remap[labels]


def partition_agreement(labels, truth):
    """Best-bijection node accuracy between two labelings."""
    from scipy.optimize import linear_sum_assignment

    a = np.unique(np.asarray(labels), return_inverse=True)[1]
    b = np.unique(np.asarray(truth), return_inverse=True)[1]
    if a.shape != b.shape:
        raise ValueError("label vectors differ in length")
    table = np.zeros((a.max() + 1, b.max() + 1), dtype=np.int64)
    np.add.at(table, (a, b), 1)
    r, c = linear_sum_assignment(-table)
    return table[r, c].sum() / a.size


def same_partition(a, b):
    return partition_agreement(a, b) == 1.0 and len(np.unique(a)) == len(np.unique(b))

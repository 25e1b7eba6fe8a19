"""Model -> weighted graph -> spectrum -> subsystems."""
from dataclasses import dataclass

import numpy as np

from .dynet import integrate, time_avg_jacobian
from .graph import (SpectrumReport, build_normalized_laplacian, dense_spectrum, pivoted_qr_cluster,
                    similarity_from_jacobian)


@dataclass
class DecompositionResult:
    labels: np.ndarray
    n_clusters: int
    spectrum: object
    jacobian: np.ndarray
    graph: object


def spectral_decomposition(model, horizon, t0=0.0, dt=0.01, gap_mode="absolute"):
    """Cluster the states of ``model`` from its time-averaged Jacobian.

    The nominal trajectory over ``[t0, t0 + horizon]`` gives the averaged
    Jacobian, hence the similarity graph and its Laplacian. The cluster count
    is the spectral-gap index, raised to the number of connected components
    when that is larger (a fully decoupled model yields singletons).
    """
    traj = integrate(model, model.x0, model.nominal_params, t0, horizon, dt)
    J = time_avg_jacobian(model, traj, model.nominal_params)
    if model.n == 1:
        spec = SpectrumReport(np.zeros(1), np.ones((1, 1)), 1, 0.0)
        return DecompositionResult(np.zeros(1, dtype=np.int64), 1, spec, J, None)
    g = similarity_from_jacobian(J, allow_isolated=True)
    L = build_normalized_laplacian(g)
    spec = dense_spectrum(L, gap_mode=gap_mode) if model.n >= 3 else dense_spectrum(L)
    k = max(spec.gap_index, spec.zero_multiplicity)
    if k <= 1:
        labels = np.zeros(model.n, dtype=np.int64)
    else:
        labels = pivoted_qr_cluster(spec.eigenvectors[:, :k])
    return DecompositionResult(labels, int(len(np.unique(labels))), spec, J, g)

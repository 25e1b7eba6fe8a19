"""Cluster a graph by simulating the discrete wave equation on it.

Every node runs the same local update, reading only its neighbours' previous
values. Node time series are then Fourier analysed: each nonzero Laplacian
eigenvalue shows up as a resonance at ``theta = arccos(1 - c^2 lambda / 2)``
and the signed amplitude of that resonance at node ``i`` is proportional to the
``i``-th eigenvector entry.
"""
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.signal import find_peaks
from scipy.signal.windows import blackmanharris

from . import kernels
from .graph import ClusterAssignment, sign_cluster

MAX_C = math.sqrt(2.0)
PROMINENCE_FACTOR = 5.0
# Blackman-Harris main lobe half width, in bins
LOBE_BINS = 4
# sidelobes sit below 1e-4.6 of their main lobe; a peak that small next to a
# larger one is leakage
SIDELOBE_LEVEL = 1e-4
SIDELOBE_REACH = 16


# a stable run stays within a few hundred times its initial size; past this
# growth factor the iteration is diverging
GROWTH_LIMIT = 1e6
# relative spread of node DC levels above which the graph has several
# zero-frequency (component) modes
DC_SPREAD = 1e-3


class WaveInstabilityError(RuntimeError):
    def __init__(self, step):
        super().__init__(f"wave iteration diverged at step {step}; reduce c (stable for c <= sqrt(2))")
        self.step = step


class InsufficientResolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class WaveConfig:
    """Wave simulation settings. ``t_max=None`` picks a length automatically."""

    c: float = 1.4
    t_max: int = None
    k: int = 1
    eta: float = 8.0
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.c <= MAX_C:
            raise ValueError(f"wave speed must satisfy 0 < c <= sqrt(2), got {self.c}")
        if self.t_max is not None and self.t_max < 16:
            raise ValueError("t_max must be at least 16")
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.eta < 6:
            raise ValueError("eta must be >= 6")


@dataclass(frozen=True)
class WaveTrace:
    values: np.ndarray  # (n, t_max), column t-1 holds u(t)
    config: WaveConfig

    @property
    def n(self):
        return self.values.shape[0]

    @property
    def t_max(self):
        return self.values.shape[1]


@dataclass(frozen=True)
class ModeEstimate:
    """Resonances in increasing frequency; the constant mode is not included.

    ``amplitudes[:, j]`` is unit-norm with its largest-magnitude entry positive.
    """

    theta: np.ndarray
    eigenvalues: np.ndarray
    amplitudes: np.ndarray
    c: float


def initial_state(n, seed):
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=n)


def wave_run(L, cfg, u0=None, _unchecked_c=None):
    """Iterate ``u(t) = 2u(t-1) - u(t-2) - c^2 L u(t-1)`` from ``u(-1) = u(0)``.

    ``_unchecked_c`` bypasses the stability bound and is only meant for tests.
    """
    c = cfg.c if _unchecked_c is None else _unchecked_c
    t_max = cfg.t_max if cfg.t_max is not None else default_t_max(L, cfg)
    if u0 is None:
        u0 = initial_state(L.n, cfg.seed)
    u0 = np.asarray(u0, dtype=np.float64)
    limit = GROWTH_LIMIT * max(1.0, float(np.max(np.abs(u0))))
    values, bad = kernels.wave_propagate(L.sparse(), u0, c, t_max, limit)
    if bad:
        raise WaveInstabilityError(bad)
    values.setflags(write=False)
    return WaveTrace(values, replace(cfg, t_max=t_max))


def estimate_convergence_time(tau, n, eta=8.0):
    """Steps needed to resolve the slowest mode: ``ceil(eta 2pi / arccos(e^{-1/tau})) + n``."""
    if tau <= 0:
        raise ValueError("mixing time must be positive")
    return int(math.ceil(eta * 2.0 * math.pi / math.acos(math.exp(-1.0 / tau)))) + int(n)


def theta_to_eigenvalue(theta, c):
    return 2.0 * (1.0 - np.cos(theta)) / c ** 2


def eigenvalue_to_theta(lam, c):
    return np.arccos(np.clip(1.0 - c ** 2 * np.asarray(lam) / 2.0, -1.0, 1.0))


def _windowed(values):
    x = values - values.mean(axis=1, keepdims=True)
    w = blackmanharris(x.shape[1], sym=False)
    return x, w


def node_spectra(trace):
    """Per-node windowed magnitude spectra and the bin frequencies (rad/step)."""
    x, w = _windowed(np.asarray(trace.values))
    Y = np.abs(np.fft.rfft(x * w, axis=1))
    freqs = 2.0 * np.pi * np.arange(Y.shape[1]) / x.shape[1]
    return freqs, Y


def _power(x, w, t, theta):
    z = np.exp(-1j * theta * t) * w
    return float(np.sum(np.abs(x @ z) ** 2))


def dc_levels(trace):
    """Windowed per-node means, or None when they agree (a single zero mode).

    On a connected graph every node settles around the same level; distinct
    levels mean the kernel holds component indicators beyond the constant.
    """
    u = np.asarray(trace.values)
    w = blackmanharris(u.shape[1], sym=False)
    mu = (u @ w) / w.sum()
    swing = np.max(np.std(u, axis=1))
    if np.ptp(mu) > DC_SPREAD * max(swing, 1e-300):
        return mu
    return None


def find_resonances(trace, k):
    """Frequencies of the ``k`` lowest resonances of the node-summed spectrum.

    The constant mode is skipped. When the node DC levels differ, a
    zero-frequency resonance is reported first.
    """
    dc = dc_levels(trace) is not None
    k_peaks = k - 1 if dc else k
    if k_peaks == 0:
        return np.zeros(1)
    x, w = _windowed(np.asarray(trace.values))
    T = x.shape[1]
    total = np.abs(np.fft.rfft(x * w, axis=1)).sum(axis=0)
    prom = PROMINENCE_FACTOR * np.median(total)
    peaks, _ = find_peaks(total, prominence=prom, distance=LOBE_BINS)
    peaks = peaks[peaks > LOBE_BINS // 2]
    local_max = np.array([total[max(0, b - SIDELOBE_REACH):b + SIDELOBE_REACH + 1].max() for b in peaks])
    peaks = peaks[total[peaks] >= SIDELOBE_LEVEL * local_max]
    if peaks.size < k_peaks:
        raise InsufficientResolutionError(
            f"found {peaks.size} resolvable resonance(s), need {k_peaks}; increase t_max (currently {T})")
    t = np.arange(1, T + 1, dtype=np.float64)
    width = 2.0 * np.pi / T
    thetas = []
    for b in peaks[:k_peaks]:
        centre = width * b
        res = minimize_scalar(lambda th: -_power(x, w, t, th),
                              bounds=(centre - width, centre + width), method="bounded",
                              options={"xatol": 1e-10 * width})
        thetas.append(res.x if -res.fun >= _power(x, w, t, centre) else centre)
    return np.array(([0.0] if dc else []) + thetas)


def extract_modes(trace, k):
    """Resonance frequencies, implied eigenvalues and signed node amplitudes."""
    c = trace.config.c
    theta = find_resonances(trace, k)
    x, w = _windowed(np.asarray(trace.values))
    T = x.shape[1]
    t = np.arange(1, T + 1, dtype=np.float64)
    moving = theta[theta > 0]
    cols = [np.ones(T)]
    for th in moving:
        cols += [np.cos(th * t), np.sin(th * t)]
    A = np.column_stack(cols)
    sw = np.sqrt(w)
    coef, *_ = np.linalg.lstsq(A * sw[:, None], (x * sw).T, rcond=None)
    amps = np.empty((trace.n, k))
    offset = k - moving.size
    if offset:
        mu = dc_levels(trace)
        v = mu - mu.mean()
        v = v / np.linalg.norm(v)
        amps[:, 0] = v if v[np.argmax(np.abs(v))] > 0 else -v
    for j in range(moving.size):
        a, b = coef[1 + 2 * j], coef[2 + 2 * j]
        m = np.argmax(np.hypot(a, b))
        norm = math.hypot(a[m], b[m])
        v = (a * a[m] + b * b[m]) / norm
        amps[:, offset + j] = v / np.linalg.norm(v)
    return ModeEstimate(theta, theta_to_eigenvalue(theta, c), amps, c)


def default_t_max(L, cfg, coarse=256, limit=1 << 18):
    """Trace length from the convergence-time bound with ``tau = 1/lambda_2``.

    ``lambda_2`` comes from a short coarse run. The run is lengthened until it
    covers the bound it implies, so slow modes get a chance to show up.
    """
    length = coarse
    u0 = initial_state(L.n, cfg.seed)
    while length <= limit:
        trace = wave_run(L, replace(cfg, t_max=length), u0=u0)
        try:
            theta = find_resonances(trace, 1)[0]
        except InsufficientResolutionError:
            length *= 2
            continue
        lam2 = float(theta_to_eigenvalue(theta, cfg.c))
        steps = max(16, estimate_convergence_time(1.0 / lam2, L.n, cfg.eta))
        if steps <= length:
            return steps
        length = 1 << (steps - 1).bit_length()
    raise InsufficientResolutionError(f"no resonance found within {limit} steps")


def cluster_by_wave(L, cfg):
    trace = wave_run(L, cfg)
    modes = extract_modes(trace, cfg.k)
    return sign_cluster(modes.amplitudes)


def cluster_by_oracle(L, k=1):
    """Sign clustering from the dense eigenvectors 2..k+1."""
    from .graph import dense_spectrum

    spec = dense_spectrum(L, k + 1)
    return sign_cluster(spec.eigenvectors[:, 1:k + 1])


__all__ = [
    "ClusterAssignment", "InsufficientResolutionError", "ModeEstimate", "WaveConfig",
    "WaveInstabilityError", "WaveTrace", "cluster_by_oracle", "cluster_by_wave",
    "default_t_max", "estimate_convergence_time", "extract_modes", "find_resonances",
    "node_spectra", "wave_run",
]

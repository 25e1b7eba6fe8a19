"""Coupled ODE networks: models, fixed-step RK4, Jacobians and subsystem splitting."""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from . import kernels

SENSITIVITY_TOL = 1e-12


class BlowUpError(RuntimeError):
    def __init__(self, t, detail=""):
        super().__init__(f"non-finite state at t={t:.6g}{detail}")
        self.t = t
        self.samples = []


class ModelError(ValueError):
    pass


class NetworkModel:
    """``dx_i/dt = f_i(x, xi, t)`` with a per-state map of directly entering parameters.

    ``rhs(t, x, params, rows)`` takes batched ``x`` of shape ``(B, n)`` and
    ``params`` of shape ``(B, p)`` and returns ``(B, len(rows))``. It must not keep
    state between calls.
    """

    def __init__(self, n, rhs, param_map, nominal_params, x0=None, name="custom", jacobian=None):
        self.n = int(n)
        self._rhs = rhs
        self.param_map = tuple(tuple(int(k) for k in ks) for ks in param_map)
        self.nominal_params = np.asarray(nominal_params, dtype=np.float64).copy()
        self.nominal_params.setflags(write=False)
        self.p = self.nominal_params.size
        self.x0 = np.zeros(self.n) if x0 is None else np.asarray(x0, dtype=np.float64).copy()
        self.name = name
        self._jacobian = jacobian
        if len(self.param_map) != self.n:
            raise ModelError(f"param_map has {len(self.param_map)} entries for {self.n} states")
        if any(k < 0 or k >= self.p for ks in self.param_map for k in ks):
            raise ModelError("param_map index out of range")
        if self.x0.shape != (self.n,):
            raise ModelError("x0 has wrong length")

    def rhs(self, t, x, params, rows=None):
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        params = np.atleast_2d(np.asarray(params, dtype=np.float64))
        if params.shape[0] == 1 and x.shape[0] > 1:
            params = np.broadcast_to(params, (x.shape[0], params.shape[1]))
        rows = np.arange(self.n) if rows is None else np.asarray(rows, dtype=np.int64)
        return self._rhs(t, x, params, rows)

    def f(self, t, x, params):
        """Unbatched convenience form returning a length-``n`` vector."""
        return self.rhs(t, x, params)[0]

    def analytic_jacobian(self, x, params, t=0.0):
        if self._jacobian is None:
            raise NotImplementedError(f"model {self.name!r} has no analytic Jacobian")
        return self._jacobian(t, np.asarray(x, dtype=np.float64), np.asarray(params, dtype=np.float64))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (steps+1, n) or (B, steps+1, n) for batches

    @property
    def dt(self):
        return float(self.times[1] - self.times[0])


def time_grid(t0, T, dt):
    if dt <= 0:
        raise ValueError("dt must be positive")
    steps = T / dt
    n_steps = int(round(steps))
    if n_steps < 1 or abs(steps - n_steps) > 1e-9 * max(1.0, steps):
        raise ValueError(f"T/dt = {steps} is not an integer number of steps")
    return t0 + dt * np.arange(n_steps + 1)


def rk4(fun, y0, times):
    """Classical RK4 on a fixed grid. ``fun(t, y)`` maps ``(B, m)`` to ``(B, m)``."""
    y = np.array(y0, dtype=np.float64)
    out = np.empty((len(times),) + y.shape)
    out[0] = y
    for s in range(len(times) - 1):
        t, h = times[s], times[s + 1] - times[s]
        # overflow is caught below by the finiteness check
        with np.errstate(over="ignore", invalid="ignore"):
            k1 = fun(t, y)
            k2 = fun(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = fun(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = fun(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            bad = []
            if y.ndim > 1:
                bad = np.flatnonzero(~np.isfinite(y.reshape(y.shape[0], -1)).all(axis=1)).tolist()
            err = BlowUpError(times[s + 1], f" (samples {bad[:10]})" if bad else "")
            err.samples = bad
            raise err
        out[s + 1] = y
    return out


def integrate(model, x0, params, t0, T, dt):
    """Integrate one state (``x0`` shape ``(n,)``) or a batch (``(B, n)``)."""
    times = time_grid(t0, T, dt)
    x0 = np.asarray(x0, dtype=np.float64)
    batched = x0.ndim == 2
    X0 = np.atleast_2d(x0)
    P = np.atleast_2d(np.asarray(params, dtype=np.float64))
    if P.shape[0] == 1 and X0.shape[0] > 1:
        P = np.repeat(P, X0.shape[0], axis=0)
    if not batched and P.shape[0] > 1:
        X0 = np.repeat(X0, P.shape[0], axis=0)
        batched = True
    rows = np.arange(model.n)
    states = rk4(lambda t, y: model._rhs(t, y, P, rows), X0, times)
    states = np.moveaxis(states, 0, 1)  # (B, steps+1, n)
    return Trajectory(times, states if batched else states[0])


def jacobian_fd(model, x, params, t=0.0):
    """Central-difference Jacobian with steps ``1e-6 * max(1, |x_j|)``."""
    x = np.asarray(x, dtype=np.float64)
    n = model.n
    h = 1e-6 * np.maximum(1.0, np.abs(x))
    probes = np.repeat(x[None, :], 2 * n, axis=0)
    idx = np.arange(n)
    probes[idx, idx] += h
    probes[n + idx, idx] -= h
    F = model.rhs(t, probes, params)
    if not np.all(np.isfinite(F)):
        raise ModelError("non-finite right-hand side while probing the Jacobian")
    return ((F[:n] - F[n:]) / (2.0 * h)[:, None]).T


def time_avg_jacobian(model, traj, params):
    """Trapezoidal time average of the FD Jacobian along ``traj``."""
    J = np.array([jacobian_fd(model, x, params, t) for t, x in zip(traj.times, traj.states)])
    span = traj.times[-1] - traj.times[0]
    if span <= 0:
        return J[0]
    return np.trapezoid(J, traj.times, axis=0) / span


@dataclass(frozen=True)
class Subsystem:
    states: tuple
    own_params: tuple
    interface: tuple
    neighbors: tuple
    neighbor_params: tuple

    @property
    def all_params(self):
        return tuple(sorted(set(self.own_params) | set(self.neighbor_params)))


@dataclass(frozen=True)
class SubsystemDecomposition:
    subsystems: tuple
    owner: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.subsystems)

    def __getitem__(self, i):
        return self.subsystems[i]


def dependency_matrix(model, x=None, params=None, t=0.0):
    """Boolean ``D[i, j]``: ``f_i`` is sensitive to ``x_j`` at the probe state."""
    x = model.x0 if x is None else x
    params = model.nominal_params if params is None else params
    D = np.abs(jacobian_fd(model, x, params, t)) > SENSITIVITY_TOL
    np.fill_diagonal(D, False)
    return D


def decompose(model, labels, x=None, params=None):
    """Split states by cluster label and work out interfaces and parameter sets.

    Clusters are ordered by their smallest state index.
    """
    labels = np.asarray(getattr(labels, "labels", labels))
    if labels.shape != (model.n,):
        raise ModelError(f"assignment covers {labels.size} states, model has {model.n}")
    uniq, first = np.unique(labels, return_index=True)
    order = uniq[np.argsort(first)]
    owner = np.empty(model.n, dtype=np.int64)
    groups = []
    for c, lab in enumerate(order):
        members = np.flatnonzero(labels == lab)
        if members.size == 0:
            raise ModelError(f"cluster {lab} is empty")
        owner[members] = c
        groups.append(members)
    D = dependency_matrix(model, x, params)
    own = [tuple(sorted({k for i in g for k in model.param_map[i]})) for g in groups]
    subs = []
    for c, g in enumerate(groups):
        ext = np.flatnonzero(D[g].any(axis=0))
        ext = tuple(int(j) for j in ext if owner[j] != c)
        nbrs = tuple(sorted({int(owner[j]) for j in ext}))
        npar = tuple(sorted({k for j in nbrs for k in own[j]} - set(own[c])))
        subs.append(Subsystem(tuple(int(i) for i in g), own[c], ext, nbrs, npar))
    return SubsystemDecomposition(tuple(subs), owner)


# ------------------------------------------------------------------ builders

def kuramoto_builder(N, K, omega, x0=None, name="kuramoto"):
    """Phase oscillators ``dx_i/dt = omega_i + sum_j K_ij sin(x_j - x_i)``.

    Parameters are the natural frequencies; ``param_map[i] = (i,)``.
    """
    K = np.asarray(K, dtype=np.float64)
    omega = np.asarray(omega, dtype=np.float64)
    if K.shape != (N, N):
        raise ModelError(f"coupling matrix must be {N}x{N}, got {K.shape}")
    if omega.shape != (N,):
        raise ModelError(f"need {N} frequencies, got {omega.shape}")
    Ks = sp.csr_matrix(K)

    def rhs(t, x, params, rows):
        return kernels.kuramoto_rhs(Ks, x, params, rows)

    def jac(t, x, params):
        C = K * np.cos(x[None, :] - x[:, None])
        J = C.copy()
        J[np.diag_indices(N)] = -(C.sum(axis=1) - np.diag(C))
        return J

    model = NetworkModel(N, rhs, [(i,) for i in range(N)], omega, x0=x0, name=name, jacobian=jac)
    model.coupling = K
    return model


def linear_builder(C, param_of_state, nominal, x0=None, name="linear"):
    """``dx_i/dt = -xi_{k(i)} x_i + sum_j C_ij x_j``: decay rates are the parameters.

    ``C`` holds the fixed couplings (its diagonal is added as well).
    """
    C = np.asarray(C, dtype=np.float64)
    n = C.shape[0]
    if C.shape != (n, n):
        raise ModelError("coupling matrix must be square")
    k_of = np.asarray(param_of_state, dtype=np.int64)
    if k_of.shape != (n,):
        raise ModelError("param_of_state must have one entry per state")

    def rhs(t, x, params, rows):
        return x @ C[rows].T - params[:, k_of[rows]] * x[:, rows]

    def jac(t, x, params):
        return C - np.diag(params[k_of])

    model = NetworkModel(n, rhs, [(int(k),) for k in k_of], nominal, x0=x0, name=name, jacobian=jac)
    model.coupling = C
    return model


def chain3_builder(states_per_subsystem=2, inner=0.5, coupling=0.01, nominal=(1.5, 1.5, 1.5), x0=None):
    """Three subsystems in a line, weakly coupled to their neighbours.

    Subsystem ``s`` owns ``states_per_subsystem`` states bound by ``inner`` and
    one decay-rate parameter ``xi_s``. Adjacent subsystems are joined through
    their facing states with weight ``coupling``.
    """
    m = int(states_per_subsystem)
    if m < 1:
        raise ModelError("need at least one state per subsystem")
    n = 3 * m
    C = np.zeros((n, n))
    for s in range(3):
        for a in range(m - 1):
            i = s * m + a
            C[i, i + 1] = C[i + 1, i] = inner
    for s in range(2):
        i, j = s * m + m - 1, (s + 1) * m
        C[i, j] = C[j, i] = coupling
    owner = np.repeat(np.arange(3), m)
    x0 = np.ones(n) if x0 is None else x0
    model = linear_builder(C, owner, nominal, x0=x0, name="chain3")
    model.truth = owner
    return model


def order_parameter(x):
    """Kuramoto order parameter ``(R, phi)``; ``x`` may carry leading batch axes."""
    z = np.exp(1j * np.asarray(x, dtype=np.float64)).mean(axis=-1)
    return np.abs(z), np.angle(z)

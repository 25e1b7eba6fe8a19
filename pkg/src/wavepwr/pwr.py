"""Non-intrusive probabilistic waveform relaxation and sampling references.

Each subsystem is solved by collocation over its own uncertain parameters
(dense grid) and its neighbours' (sparse grid). Neighbour states enter as gPC
waveforms from the previous sweep, evaluated at the grid point's parameter
values and linearly interpolated in time at RK4 half steps.
"""
import math
import re
from dataclasses import dataclass, field

import numpy as np

from .dynet import BlowUpError, order_parameter, rk4, time_grid
from .gpc import CollocationGrid, GpcWaveform, PolyBasis, gpc_coefficients, project_waveform
from .sobol import unit_samples


class PwrDivergenceError(RuntimeError):
    def __init__(self, subsystem, iteration, points, t):
        super().__init__(f"subsystem {subsystem} diverged at iteration {iteration}, t={t:.6g}, "
                         f"grid point(s) {list(points)}")
        self.subsystem = subsystem
        self.iteration = iteration
        self.points = list(points)


class SampleFailure(RuntimeError):
    def __init__(self, indices, t):
        super().__init__(f"integration blew up at t={t:.6g} for sample(s) {list(indices)[:20]}")
        self.indices = list(indices)


# ------------------------------------------------------------------ functionals

_FUNC = re.compile(r"^(?:state:(?P<idx>\d+)|(?P<name>order_parameter|phase))(?:@(?P<t>[-+0-9.eE]+))?$")


@dataclass(frozen=True)
class Functional:
    """``state:<i>``, ``order_parameter`` or ``phase``, optionally ``@<time>``."""

    kind: str
    index: int = -1
    at: float = None

    @classmethod
    def parse(cls, text):
        m = _FUNC.match(text.strip())
        if not m:
            raise ValueError(f"cannot parse functional {text!r}")
        at = float(m["t"]) if m["t"] is not None else None
        if m["idx"] is not None:
            return cls("state", int(m["idx"]), at)
        return cls(m["name"], -1, at)

    @property
    def series_name(self):
        return f"state:{self.index}" if self.kind == "state" else self.kind

    @property
    def name(self):
        return self.series_name if self.at is None else f"{self.series_name}@{self.at:g}"

    def series(self, states):
        """Time series ``(S, T)`` from sampled states ``(S, T, n)``."""
        if self.kind == "state":
            return states[..., self.index]
        R, phi = order_parameter(states)
        return R if self.kind == "order_parameter" else phi

    def time_index(self, times):
        k = int(round((self.at - times[0]) / (times[1] - times[0])))
        if not 0 <= k < len(times) or abs(times[k] - self.at) > 1e-9 * max(1.0, abs(self.at)):
            raise ValueError(f"time {self.at} is not on the integration grid")
        return k

    def value(self, states, times):
        return self.series(states)[..., self.time_index(times)]


# ------------------------------------------------------------------ cost model

def cost_estimate(decomp, l, l_s, l_c, I_max, uncertain=None):
    """Deterministic run counts ``(R_F, R_I, R_F / R_I)`` for full-grid PCM vs PWR.

    ``p_i`` counts subsystem ``i``'s own parameters that are uncertain (all own
    parameters when ``uncertain`` is None). Counts are exact integers.
    """
    keep = None if uncertain is None else {getattr(u, "index", u) for u in uncertain}
    p_i = [len([k for k in s.own_params if keep is None or k in keep]) for s in decomp.subsystems]
    R_F = int(l) ** sum(p_i)
    R_I = 1 + sum(int(l_s) ** p for p in p_i)
    R_I += int(I_max) * sum(int(l_s) ** p_i[i] * math.prod(int(l_c) ** p_i[j] for j in s.neighbors)
                           for i, s in enumerate(decomp.subsystems))
    return R_F, R_I, R_F / R_I


# ------------------------------------------------------------------ PWR

@dataclass
class PwrReport:
    times: np.ndarray
    waveforms: list
    metric_history: list
    iterations: int
    converged: bool
    n: int
    params: tuple
    decomposition: object = field(repr=False, default=None)
    history: list = field(repr=False, default_factory=list)

    def mean(self):
        out = np.empty((self.times.size, self.n))
        for wf in self.waveforms:
            out[:, list(wf.states)] = wf.mean()
        return out

    def variance(self):
        out = np.empty((self.times.size, self.n))
        for wf in self.waveforms:
            out[:, list(wf.states)] = wf.variance()
        return out

    def sample_states(self, xi):
        """Evaluate the surrogate at parameter vectors ``xi`` ``(S, p)`` -> ``(S, T, n)``."""
        xi = np.atleast_2d(xi)
        out = np.empty((xi.shape[0], self.times.size, self.n))
        for wf in self.waveforms:
            out[:, :, list(wf.states)] = wf.evaluate(xi)
        return out

    def to_json(self):
        return {
            "iterations": self.iterations,
            "converged": self.converged,
            "metric_history": [None if not np.isfinite(m) else float(m) for m in self.metric_history],
        }


def _interp_factory(times, values):
    """Piecewise-linear lookup of ``values[:, k, :]`` on the uniform grid ``times``."""
    t0, dt, last = times[0], times[1] - times[0], len(times) - 1

    def at(t):
        s = (t - t0) / dt
        k = min(max(int(math.floor(s + 1e-9)), 0), last)
        frac = s - k
        if k == last or abs(frac) < 1e-9:
            return values[:, k]
        return (1.0 - frac) * values[:, k] + frac * values[:, k + 1]

    return at


def _solve_subsystem(model, sub, grid, nominal, x0, times, interface_values):
    """RK4 over all grid points at once; returns samples ``(G, T, S)``."""
    G = grid.size
    xi = grid.full_vectors(nominal)
    rows = np.asarray(sub.states, dtype=np.int64)
    ext = np.asarray(sub.interface, dtype=np.int64)
    scratch = np.repeat(x0[None, :], G, axis=0)
    lookup = _interp_factory(times, interface_values) if ext.size else None

    def fun(t, y):
        full = scratch.copy()
        full[:, rows] = y
        if lookup is not None:
            full[:, ext] = lookup(t)
        return model._rhs(t, full, xi, rows)

    y0 = np.repeat(x0[rows][None, :], G, axis=0)
    traj = rk4(fun, y0, times)  # (T, G, S)
    return np.moveaxis(traj, 0, 1)


def _relative_change(new, old):
    scale = max(1.0, float(np.max(np.abs(new))))
    return float(np.max(np.abs(new - old))) / scale


def pwr_solve(model, decomp, params, l_s, l_c, P=None, I_max=10, tol=1e-6,
              t0=0.0, T=1.0, dt=0.01, x0=None, keep_history=False):
    """Probabilistic waveform relaxation over a fixed subsystem decomposition.

    Sweep 1 solves every subsystem over its own uncertain parameters with
    neighbour states frozen at ``x0``. Sweep 2 moves to the grid over own plus
    neighbour parameters, feeding in the neighbours' sweep-1 expansions.
    Later sweeps feed in the neighbours' previous expansions projected onto
    the receiving subsystem's parameters. Iteration stops when the largest
    relative coefficient change is at most ``tol`` or after ``I_max`` sweeps.
    """
    times = time_grid(t0, T, dt)
    x0 = model.x0 if x0 is None else np.asarray(x0, dtype=np.float64)
    nominal = np.array(model.nominal_params, dtype=np.float64)
    by_index = {p.index: p for p in params}
    for p in params:
        nominal[p.index] = p.mean
    subs = decomp.subsystems

    own_u, coup_u = [], []
    for s in subs:
        own = [by_index[k] for k in s.own_params if k in by_index]
        mine = {p.index for p in own}
        coup = [by_index[k] for k in s.neighbor_params if k in by_index and k not in mine]
        own_u.append(own)
        coup_u.append(coup)

    def bases(i, first):
        own, coup = own_u[i], ([] if first else coup_u[i])
        basis = PolyBasis.build(own + coup, [l_s - 1] * len(own) + [l_c - 1] * len(coup), P)
        grid = CollocationGrid.build(own, coup, l_s, l_c)
        return basis, grid

    owner_of = decomp.owner
    waves, metrics, history = None, [], []
    I = 0
    converged = False
    while I < I_max:
        I += 1
        first = I == 1
        new = []
        for i, s in enumerate(subs):
            basis, grid = bases(i, first)
            ext = list(s.interface)
            if first or not ext:
                iface = np.repeat(np.repeat(x0[ext][None, None, :], grid.size, axis=0), times.size, axis=1)
            else:
                iface = np.empty((grid.size, times.size, len(ext)))
                xi = grid.full_vectors(nominal)
                sigma = [p.index for p in basis.params]
                for j in s.neighbors:
                    wf = project_waveform(waves[j], sigma)
                    vals = wf.evaluate(xi)
                    for col, e in enumerate(ext):
                        if owner_of[e] == j:
                            iface[:, :, col] = vals[:, :, wf.states.index(e)]
            try:
                samples = _solve_subsystem(model, s, grid, nominal, x0, times, iface)
            except BlowUpError as err:
                pts = getattr(err, "samples", None) or range(grid.size)
                raise PwrDivergenceError(i, I, pts, err.t) from err
            coef = gpc_coefficients(samples, grid, basis)
            new.append(GpcWaveform(i, times, coef, basis, tuple(s.states)))
        if first:
            metrics.append(math.inf)
        else:
            metrics.append(max(_relative_change(nw.coefficients, old.embed(nw.basis))
                               for nw, old in zip(new, waves)))
        waves = new
        if keep_history:
            history.append(waves)
        if metrics[-1] <= tol:
            converged = True
            break
    return PwrReport(times, waves, metrics, I, converged, model.n, tuple(params), decomp, history)


# ------------------------------------------------------------------ references

def full_grid_pcm(model, params, l, P=None, t0=0.0, T=1.0, dt=0.01, x0=None):
    """Collocation on the undecomposed model over the full tensor grid.

    Returns ``(times, coefficients, basis)`` with coefficients ``(M, T, n)``.
    """
    times = time_grid(t0, T, dt)
    x0 = model.x0 if x0 is None else np.asarray(x0, dtype=np.float64)
    nominal = np.array(model.nominal_params, dtype=np.float64)
    for p in params:
        nominal[p.index] = p.mean
    params = list(params)
    basis = PolyBasis.build(params, [l - 1] * len(params), P)
    grid = CollocationGrid.build(params, (), l, l)
    xi = grid.full_vectors(nominal)
    rows = np.arange(model.n)
    traj = rk4(lambda t, y: model._rhs(t, y, xi, rows), np.repeat(x0[None, :], grid.size, axis=0), times)
    coef = gpc_coefficients(np.moveaxis(traj, 0, 1), grid, basis)
    return times, coef, basis


@dataclass
class McResult:
    times: np.ndarray
    mean: np.ndarray
    variance: np.ndarray
    n_samples: int
    series: dict = field(default_factory=dict)  # name -> (mean, var) over time
    values: dict = field(default_factory=dict)  # name@t -> per-sample values

    def standard_error(self):
        return np.sqrt(self.variance / self.n_samples)


def parameter_samples(model, params, n_samples, sampler="sobol", seed=0):
    """Full parameter vectors ``(S, p)`` with the uncertain entries sampled."""
    U = unit_samples(n_samples, len(params), sampler, seed)
    xi = np.repeat(np.asarray(model.nominal_params, dtype=np.float64)[None, :], n_samples, axis=0)
    for k, p in enumerate(params):
        xi[:, p.index] = p.from_unit(U[:, k])
    return xi


def summarize_samples(states, times, functionals):
    """Series moments and point values of ``functionals`` for sampled states."""
    series, values = {}, {}
    for f in functionals:
        s = f.series(states)
        if f.at is None:
            series[f.name] = (s.mean(axis=0), s.var(axis=0))
        else:
            values[f.name] = s[:, f.time_index(times)]
    return series, values


def mc_reference(model, params, n_samples, seed=0, sampler="sobol", t0=0.0, T=1.0, dt=0.01,
                 x0=None, functionals=(), batch=2500):
    """Sample the full model: state moments over time plus functional statistics."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    times = time_grid(t0, T, dt)
    x0 = model.x0 if x0 is None else np.asarray(x0, dtype=np.float64)
    xi = parameter_samples(model, params, n_samples, sampler, seed)
    functionals = [Functional.parse(f) if isinstance(f, str) else f for f in functionals]
    rows = np.arange(model.n)
    s1 = np.zeros((times.size, model.n))
    s2 = np.zeros((times.size, model.n))
    acc_series = {f.name: [0.0, 0.0] for f in functionals if f.at is None}
    vals = {f.name: [] for f in functionals if f.at is not None}
    for start in range(0, n_samples, batch):
        P = xi[start:start + batch]
        try:
            traj = rk4(lambda t, y: model._rhs(t, y, P, rows), np.repeat(x0[None, :], P.shape[0], axis=0), times)
        except BlowUpError as err:
            raise SampleFailure([start + k for k in getattr(err, "samples", [])], err.t) from err
        states = np.moveaxis(traj, 0, 1)
        s1 += states.sum(axis=0)
        s2 += (states ** 2).sum(axis=0)
        for f in functionals:
            s = f.series(states)
            if f.at is None:
                acc_series[f.name][0] = acc_series[f.name][0] + s.sum(axis=0)
                acc_series[f.name][1] = acc_series[f.name][1] + (s ** 2).sum(axis=0)
            else:
                vals[f.name].append(s[:, f.time_index(times)])
    mean = s1 / n_samples
    var = np.maximum(s2 / n_samples - mean ** 2, 0.0)
    series = {}
    for name, (a, b) in acc_series.items():
        m = a / n_samples
        series[name] = (m, np.maximum(b / n_samples - m ** 2, 0.0))
    values = {name: np.concatenate(v) for name, v in vals.items()}
    return McResult(times, mean, var, n_samples, series, values)


def histogram(values, bins=30, range_=None):
    counts, edges = np.histogram(values, bins=bins, range=range_)
    return edges[:-1], edges[1:], counts


def histogram_l1(a, b, bins=30):
    """L1 distance between the empirical distributions of ``a`` and ``b`` on shared bins."""
    lo, hi = min(np.min(a), np.min(b)), max(np.max(a), np.max(b))
    if hi <= lo:
        return 0.0
    ca, _ = np.histogram(a, bins=bins, range=(lo, hi))
    cb, _ = np.histogram(b, bins=bins, range=(lo, hi))
    return float(np.abs(ca / ca.sum() - cb / cb.sum()).sum())

"""Polynomial chaos: orthonormal bases, Gauss rules, tensor grids and projections.

All weights are probability weights (they sum to 1). Legendre polynomials serve
uniform parameters and probabilists' Hermite polynomials Gaussian ones, both
scaled to unit norm so that a projection is plain coefficient truncation.
"""
import itertools
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import hermite_e, legendre


@dataclass(frozen=True)
class RandomParam:
    """One uncertain entry ``xi[index]``."""

    index: int
    kind: str
    a: float  # lo for uniform, mean for gaussian
    b: float  # hi for uniform, sigma for gaussian

    def __post_init__(self):
        if self.kind == "uniform":
            if not self.b > self.a:
                raise ValueError(f"uniform needs hi > lo, got lo={self.a} hi={self.b}")
        elif self.kind == "gaussian":
            if not self.b > 0:
                raise ValueError(f"gaussian needs sigma > 0, got {self.b}")
        else:
            raise ValueError(f"unsupported distribution {self.kind!r}")

    @classmethod
    def uniform(cls, index, lo, hi):
        return cls(int(index), "uniform", float(lo), float(hi))

    @classmethod
    def gaussian(cls, index, mean, sigma):
        return cls(int(index), "gaussian", float(mean), float(sigma))

    @property
    def mean(self):
        return 0.5 * (self.a + self.b) if self.kind == "uniform" else self.a

    @property
    def variance(self):
        return (self.b - self.a) ** 2 / 12.0 if self.kind == "uniform" else self.b ** 2

    def to_standard(self, xi):
        """Map parameter values onto ``[-1, 1]`` (uniform) or ``N(0, 1)`` (gaussian)."""
        xi = np.asarray(xi, dtype=np.float64)
        if self.kind == "uniform":
            return (2.0 * xi - (self.a + self.b)) / (self.b - self.a)
        return (xi - self.a) / self.b

    def from_standard(self, z):
        z = np.asarray(z, dtype=np.float64)
        if self.kind == "uniform":
            return 0.5 * (self.a + self.b) + 0.5 * (self.b - self.a) * z
        return self.a + self.b * z

    def from_unit(self, u):
        """Inverse CDF: map ``u`` in ``(0, 1)`` to parameter values."""
        u = np.asarray(u, dtype=np.float64)
        if self.kind == "uniform":
            return self.a + (self.b - self.a) * u
        from scipy.special import ndtri

        return self.a + self.b * ndtri(u)

    def basis_values(self, xi, degree):
        """Orthonormal polynomials of degree ``0..degree`` at ``xi``; shape ``(..., degree+1)``."""
        z = self.to_standard(xi)
        out = np.empty(z.shape + (degree + 1,))
        eye = np.eye(degree + 1)
        for d in range(degree + 1):
            if self.kind == "uniform":
                out[..., d] = legendre.legval(z, eye[d]) * math.sqrt(2 * d + 1)
            else:
                out[..., d] = hermite_e.hermeval(z, eye[d]) / math.sqrt(math.factorial(d))
        return out


def quadrature_rule(dist, l):
    """``l``-point Gauss rule for the parameter's density, mapped to its support."""
    if l < 1:
        raise ValueError("need at least one quadrature point")
    if not isinstance(dist, RandomParam):
        raise ValueError(f"unsupported distribution {dist!r}")
    if dist.kind == "uniform":
        z, w = legendre.leggauss(l)
        w = w / 2.0
    else:
        z, w = hermite_e.hermegauss(l)
        w = w / math.sqrt(2.0 * math.pi)
    # both weights are even: enforce the node symmetry exactly
    z = 0.5 * (z - z[::-1])
    w = 0.5 * (w + w[::-1])
    w = w / w.sum()
    return dist.from_standard(z), w


@dataclass(frozen=True)
class PolyBasis:
    """Tensor basis over ``params`` with per-dimension degree caps and a total-order cap."""

    params: tuple
    degrees: tuple
    total_order: int
    multi_indices: np.ndarray

    @classmethod
    def build(cls, params, degrees, total_order=None):
        params = tuple(params)
        degrees = tuple(int(d) for d in degrees)
        if len(params) != len(degrees):
            raise ValueError("one degree per parameter")
        cap = sum(degrees) if total_order is None else int(total_order)
        idx = [m for m in itertools.product(*[range(d + 1) for d in degrees]) if sum(m) <= cap]
        idx.sort(key=lambda m: (sum(m), tuple(-v for v in m)))
        mi = np.array(idx, dtype=np.int64).reshape(len(idx), len(params))
        mi.setflags(write=False)
        return cls(params, degrees, cap, mi)

    @property
    def size(self):
        return self.multi_indices.shape[0]

    @property
    def indices(self):
        return tuple(p.index for p in self.params)

    def evaluate(self, points):
        """Basis values at ``points`` of shape ``(G, dim)`` -> ``(G, size)``."""
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        G = points.shape[0]
        out = np.ones((G, self.size))
        for k, p in enumerate(self.params):
            vals = p.basis_values(points[:, k], self.degrees[k])
            out *= vals[:, self.multi_indices[:, k]]
        return out

    def evaluate_full(self, xi):
        """Like :meth:`evaluate` but picks columns out of full parameter vectors ``(G, p)``."""
        xi = np.atleast_2d(np.asarray(xi, dtype=np.float64))
        return self.evaluate(xi[:, list(self.indices)]) if self.params else np.ones((xi.shape[0], 1))


@dataclass(frozen=True)
class CollocationGrid:
    """Tensor Gauss grid; own parameters get ``l_s`` points, coupling ones ``l_c``."""

    params: tuple
    counts: tuple
    points: np.ndarray
    weights: np.ndarray

    @classmethod
    def build(cls, own, coupling=(), l_s=3, l_c=2):
        params = tuple(own) + tuple(coupling)
        counts = (l_s,) * len(own) + (l_c,) * len(coupling)
        if not params:
            return cls((), (), np.zeros((1, 0)), np.ones(1))
        rules = [quadrature_rule(p, l) for p, l in zip(params, counts)]
        pts = np.array(list(itertools.product(*[r[0] for r in rules])))
        wts = np.array([math.prod(c) for c in itertools.product(*[r[1] for r in rules])])
        return cls(params, counts, pts, wts)

    @property
    def size(self):
        return self.weights.size

    def full_vectors(self, nominal):
        """Grid points written into copies of the nominal parameter vector."""
        xi = np.repeat(np.asarray(nominal, dtype=np.float64)[None, :], self.size, axis=0)
        for k, p in enumerate(self.params):
            xi[:, p.index] = self.points[:, k]
        return xi


def gpc_coefficients(samples, grid, basis):
    """Quadrature projection ``a_m = sum_g w_g x(g) Psi_m(g)``.

    ``samples`` has the grid axis first; trailing axes (time, state) are kept.
    """
    samples = np.asarray(samples, dtype=np.float64)
    if samples.shape[0] != grid.size:
        raise ValueError(f"got {samples.shape[0]} samples for a grid of {grid.size} points")
    if set(basis.indices) - {p.index for p in grid.params}:
        raise ValueError("basis uses parameters the grid does not cover")
    col = [[p.index for p in grid.params].index(i) for i in basis.indices]
    Psi = basis.evaluate(grid.points[:, col]) if basis.params else np.ones((grid.size, 1))
    return np.tensordot(Psi * grid.weights[:, None], samples, axes=(0, 0))


@dataclass(frozen=True)
class GpcWaveform:
    """Coefficients ``a[m, t, s]`` of the owned states of one subsystem."""

    subsystem: int
    times: np.ndarray
    coefficients: np.ndarray
    basis: PolyBasis
    states: tuple = ()
    mean_only: bool = False

    def mean(self):
        return self.coefficients[0]

    def variance(self):
        return np.sum(self.coefficients[1:] ** 2, axis=0)

    def evaluate(self, xi):
        """Surrogate values at full parameter vectors ``xi`` ``(G, p)`` -> ``(G, T, S)``."""
        Psi = self.basis.evaluate_full(xi)
        return np.tensordot(Psi, self.coefficients, axes=(1, 0))

    def embed(self, basis):
        """Coefficients re-expressed in a larger ``basis`` (missing terms are 0)."""
        out = np.zeros((basis.size,) + self.coefficients.shape[1:])
        where = {p.index: k for k, p in enumerate(basis.params)}
        lookup = {tuple(m): r for r, m in enumerate(basis.multi_indices)}
        for r, m in enumerate(self.basis.multi_indices):
            full = [0] * len(basis.params)
            for k, p in enumerate(self.basis.params):
                if m[k]:
                    if p.index not in where:
                        raise ValueError("target basis lacks a parameter of this waveform")
                    full[where[p.index]] = m[k]
            pos = lookup.get(tuple(full))
            if pos is None:
                raise ValueError(f"multi-index {tuple(full)} not in target basis")
            out[pos] = self.coefficients[r]
        return out


def project_waveform(wf, target_params):
    """Conditional expectation onto the parameters in ``target_params``.

    Keeps the terms whose multi-index only involves target parameters. When no
    basis parameter is a target the mean-only waveform is returned with
    ``mean_only=True``.
    """
    targets = {getattr(p, "index", p) for p in target_params}
    keep_dims = [k for k, p in enumerate(wf.basis.params) if p.index in targets]
    mi = wf.basis.multi_indices
    drop = [k for k in range(len(wf.basis.params)) if k not in keep_dims]
    rows = np.flatnonzero(~np.any(mi[:, drop] > 0, axis=1)) if drop else np.arange(wf.basis.size)
    params = tuple(wf.basis.params[k] for k in keep_dims)
    degrees = tuple(wf.basis.degrees[k] for k in keep_dims)
    sub = mi[np.ix_(rows, keep_dims)] if keep_dims else np.zeros((rows.size, 0), dtype=np.int64)
    sub = sub.copy()
    sub.setflags(write=False)
    basis = PolyBasis(params, degrees, wf.basis.total_order, sub)
    return GpcWaveform(wf.subsystem, wf.times, wf.coefficients[rows], basis, wf.states,
                       mean_only=not keep_dims and bool(wf.basis.params))

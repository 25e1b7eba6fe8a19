"""Sobol points (Gray-code order, unscrambled) and seeded pseudo-random draws."""
import numpy as np

from ._sobol_table import DIRECTIONS

BITS = 52
MAX_DIM = len(DIRECTIONS)


def direction_numbers(dim, bits=BITS):
    """``V[d, k]``: direction integer ``k+1`` of dimension ``d`` scaled to ``bits`` bits."""
    if not 1 <= dim <= MAX_DIM:
        raise ValueError(f"Sobol dimension must lie in [1, {MAX_DIM}], got {dim}")
    V = np.zeros((dim, bits), dtype=np.uint64)
    for d in range(dim):
        poly, m_init = DIRECTIONS[d]
        m = [0] * (bits + 1)
        if d == 0:
            m[1:] = [1] * bits
        else:
            s = poly.bit_length() - 1
            a = [(poly >> (s - j)) & 1 for j in range(1, s)]
            for k in range(1, s + 1):
                m[k] = m_init[k - 1]
            for k in range(s + 1, bits + 1):
                v = m[k - s] ^ (m[k - s] << s)
                for j in range(1, s):
                    if a[j - 1]:
                        v ^= m[k - j] << j
                m[k] = v
        for k in range(1, bits + 1):
            V[d, k - 1] = np.uint64(m[k] << (bits - k))
    return V


def sobol_points(n, dim, skip=0):
    """First ``n`` Sobol points after the origin (index ``skip+1`` onwards)."""
    V = direction_numbers(dim)
    x = np.zeros(dim, dtype=np.uint64)
    out = np.empty((n, dim))
    scale = 2.0 ** -BITS
    total = skip + n
    i = 0
    for idx in range(total):
        # lowest zero bit of idx picks the direction number
        c = (~idx & (idx + 1)).bit_length() - 1
        x ^= V[:, c]
        if idx >= skip:
            out[i] = x.astype(np.float64) * scale
            i += 1
    return out


def pseudo_points(n, dim, seed):
    """Uniform draws from a Philox counter-based generator."""
    return np.random.Generator(np.random.Philox(seed)).random((n, dim))


def unit_samples(n, dim, sampler, seed=0):
    if sampler == "sobol":
        return sobol_points(n, dim)
    if sampler == "pseudo":
        return pseudo_points(n, dim, seed)
    raise ValueError(f"unknown sampler {sampler!r}")

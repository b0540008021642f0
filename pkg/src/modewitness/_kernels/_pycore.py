"""Pure numpy implementations of the hot kernels (fallback for the Cython core)."""

import itertools

import numpy as np


def lift_block(o, idx, norms):
    """Degree-N block of the lifted basis change.

    ``out[i, l] = perm(o[idx[i], :][:, idx[l]]) / norms[l]`` where ``idx`` holds
    the sorted quadrature-index vector of each generator (shape ``(L, N)``).
    """
    o = np.asarray(o, dtype=float)
    idx = np.asarray(idx, dtype=np.intp)
    n_gen, order = idx.shape
    out = np.zeros((n_gen, n_gen))
    for sigma in itertools.permutations(range(order)):
        term = np.ones((n_gen, n_gen))
        for s in range(order):
            term *= o[np.ix_(idx[:, sigma[s]], idx[:, s])]
        out += term
    return out / np.asarray(norms, dtype=float)[None, :]


def hellinger_shift(p, shift):
    """``0.5 * sum (sqrt(p[x - shift]) - sqrt(p[x]))**2`` for an integer shift vector.

    Mass shifted beyond the grid edge is dropped and counted as disjoint support.
    """
    p = np.asarray(p, dtype=float)
    root = np.sqrt(p)
    moved = np.zeros_like(root)
    src = []
    dst = []
    for ax, k in enumerate(shift):
        n = p.shape[ax]
        k = int(k)
        if abs(k) >= n:
            return 0.5 * p.sum()
        if k >= 0:
            src.append(slice(0, n - k))
            dst.append(slice(k, n))
        else:
            src.append(slice(-k, n))
            dst.append(slice(0, n + k))
    moved[tuple(dst)] = root[tuple(src)]
    # sum over the union: sum p + sum p_moved - 2 sum sqrt(p p_moved)
    return 0.5 * (p.sum() + (moved**2).sum() - 2.0 * (moved * root).sum())

"""Compiled inner loops for the matrix-free Hamiltonian action."""

import numba
import numpy as np


@numba.njit(cache=True)
def apply_combination(indptr, targets, ntot, vint, cx, cn, cv, psi, out):
    """out = (cn * ntot + cv * vint) * psi + cx * X psi.

    ``X`` sums all single-bit flips that stay inside the basis; the flips of
    state ``i`` are ``targets[indptr[i]:indptr[i + 1]]``.
    """
    dim = psi.shape[0]
    for i in range(dim):
        acc = 0.0 + 0.0j
        for p in range(indptr[i], indptr[i + 1]):
            acc += psi[targets[p]]
        out[i] = (cn * ntot[i] + cv * vint[i]) * psi[i] + cx * acc
    return out


def compress_flips(table):
    """Turn a (dim, L) flip table with -1 holes into (indptr, targets) adjacency lists."""
    valid = table >= 0
    indptr = np.zeros(table.shape[0] + 1, dtype=np.int64)
    np.cumsum(valid.sum(axis=1), out=indptr[1:])
    targets = np.ascontiguousarray(table[valid], dtype=np.int32)
    return indptr, targets

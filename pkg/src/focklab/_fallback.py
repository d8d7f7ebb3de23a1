"""Pure-Python reference kernels for basis enumeration and ladder-operator assembly.

These are the fallback implementations used when the compiled extension
(:mod:`focklab._speedups`) is unavailable.  They favour clarity over speed;
the compiled module implements the same functions with identical semantics.
"""

import numpy as np

BACKEND = "python"


def enumerate_states(modes, n_max, sector_sizes):
    """Enumerate occupation vectors with total boson number <= n_max.

    States are ordered by total number first, then lexicographically
    (ascending) within each total-number sector.

    Parameters
    ----------
    modes : int
        Number of one-particle modes M.
    n_max : int
        Largest total occupation retained.
    sector_sizes : (n_max+1,) int64 array
        Number of states per total-number sector (C(M+n-1, n)).

    Returns
    -------
    (dim, modes) int32 array
    """
    dim = int(np.sum(sector_sizes))
    out = np.zeros((dim, modes), dtype=np.int32)
    row = 0
    for n in range(n_max + 1):
        occ = [0] * modes
        occ[modes - 1] = n
        while True:
            out[row, :] = occ
            row += 1
            # lexicographic successor within the fixed-total sector
            j = modes - 2
            suffix = occ[modes - 1]
            while j >= 0 and suffix == 0:
                suffix += occ[j]
                j -= 1
            if j < 0 or suffix == 0:
                break
            occ[j] += 1
            rem = suffix - 1
            for i in range(j + 1, modes - 1):
                occ[i] = 0
            occ[modes - 1] = rem
    assert row == dim
    return out


def rank_in_sector(occ, binom):
    """Lexicographic rank of each occupation row within its own total sector.

    ``binom[t, q]`` must hold C(t+q, q); the rank is accumulated with the
    hockey-stick identity, so the cost is one table lookup per mode.
    """
    occ = np.asarray(occ, dtype=np.int64)
    if occ.ndim == 1:
        occ = occ[None, :]
    modes = occ.shape[1]
    totals = occ.sum(axis=1)
    # rem[:, j] = bosons not yet placed when position j is reached
    csum = np.cumsum(occ, axis=1)
    rem = totals[:, None] - csum + occ
    q = modes - 1 - np.arange(modes)
    rank = (binom[rem, q] - binom[rem - occ, q]).sum(axis=1)
    return rank


def annihilation_entries(states, sector_offsets, binom, amp):
    """Sparse triplets of the annihilation operator with mode amplitudes amp.

    Entry convention: state ``n`` (column) feeds ``n - e_i`` (row) with
    value ``sqrt(n_i) * amp[i]`` for every occupied mode i.

    Returns
    -------
    rows, cols : int64 arrays
    vals : complex128 array
    """
    states = np.asarray(states)
    modes = states.shape[1]
    totals = states.sum(axis=1, dtype=np.int64)
    rows_parts, cols_parts, vals_parts = [], [], []
    for i in range(modes):
        cols = np.nonzero(states[:, i] > 0)[0]
        if cols.size == 0:
            continue
        occ = states[cols].astype(np.int64)
        ni = occ[:, i].astype(np.float64)
        occ[:, i] -= 1
        ranks = rank_in_sector(occ, binom)
        rows = sector_offsets[totals[cols] - 1] + ranks
        rows_parts.append(rows)
        cols_parts.append(cols.astype(np.int64))
        vals_parts.append(np.sqrt(ni) * amp[i])
    if not rows_parts:
        z = np.zeros(0)
        return z.astype(np.int64), z.astype(np.int64), z.astype(np.complex128)
    return (
        np.concatenate(rows_parts),
        np.concatenate(cols_parts),
        np.concatenate(vals_parts).astype(np.complex128),
    )

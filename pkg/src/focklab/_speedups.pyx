# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for basis enumeration and ladder-operator assembly.

Same contracts as focklab._fallback; see that module for documentation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()

BACKEND = "compiled"


def enumerate_states(int modes, int n_max, const cnp.int64_t[:] sector_sizes):
    cdef cnp.int64_t dim = 0
    cdef int n, i, j
    for n in range(n_max + 1):
        dim += sector_sizes[n]
    out = np.zeros((dim, modes), dtype=np.int32)
    cdef cnp.int32_t[:, :] o = out
    occ_arr = np.zeros(modes, dtype=np.int32)
    cdef cnp.int32_t[:] occ = occ_arr
    cdef cnp.int64_t row = 0
    cdef int suffix, rem
    for n in range(n_max + 1):
        for i in range(modes):
            occ[i] = 0
        occ[modes - 1] = n
        while True:
            for i in range(modes):
                o[row, i] = occ[i]
            row += 1
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
    return out


cdef inline cnp.int64_t _rank_row(const cnp.int32_t[:] occ, int modes,
                                  const cnp.int64_t[:, :] binom) nogil:
    cdef cnp.int64_t rank = 0
    cdef int j, c, q, rem
    rem = 0
    for j in range(modes):
        rem += occ[j]
    for j in range(modes):
        c = occ[j]
        q = modes - j - 1
        if c > 0:
            rank += binom[rem, q] - binom[rem - c, q]
            rem -= c
        if rem == 0:
            break
    return rank


def rank_in_sector(occ, const cnp.int64_t[:, :] binom):
    occ_mat = np.ascontiguousarray(np.atleast_2d(np.asarray(occ, dtype=np.int32)))
    cdef const cnp.int32_t[:, :] om = occ_mat
    cdef int modes = om.shape[1]
    cdef cnp.int64_t nrows = om.shape[0]
    out = np.zeros(nrows, dtype=np.int64)
    cdef cnp.int64_t[:] res = out
    cdef cnp.int64_t r
    for r in range(nrows):
        res[r] = _rank_row(om[r], modes, binom)
    return out


def annihilation_entries(const cnp.int32_t[:, :] states, const cnp.int64_t[:] sector_offsets,
                         const cnp.int64_t[:, :] binom, const cnp.complex128_t[:] amp):
    cdef cnp.int64_t dim = states.shape[0]
    cdef int modes = states.shape[1]
    cdef cnp.int64_t s, nnz = 0
    cdef int i, j, c, q, total, rem
    for s in range(dim):
        for i in range(modes):
            if states[s, i] > 0:
                nnz += 1
    rows = np.empty(nnz, dtype=np.int64)
    cols = np.empty(nnz, dtype=np.int64)
    vals = np.empty(nnz, dtype=np.complex128)
    cdef cnp.int64_t[:] rv = rows
    cdef cnp.int64_t[:] cv = cols
    cdef cnp.complex128_t[:] vv = vals
    cdef cnp.int64_t pos = 0, rank
    for s in range(dim):
        total = 0
        for i in range(modes):
            total += states[s, i]
        if total == 0:
            continue
        for i in range(modes):
            if states[s, i] == 0:
                continue
            # rank of states[s] - e_i within sector total-1
            rank = 0
            rem = total - 1
            for j in range(modes):
                c = states[s, j]
                if j == i:
                    c -= 1
                q = modes - j - 1
                if c > 0:
                    rank += binom[rem, q] - binom[rem - c, q]
                    rem -= c
                if rem == 0:
                    break
            rv[pos] = sector_offsets[total - 1] + rank
            cv[pos] = s
            vv[pos] = sqrt(<double> states[s, i]) * amp[i]
            pos += 1
    return rows, cols, vals

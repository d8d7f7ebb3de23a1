"""Excitation-sector-indexed block operators."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

__all__ = ["BlockOperator", "split_segments", "join_segments"]


def split_segments(vec, dims):
    vec = np.asarray(vec)
    if vec.size != sum(dims):
        raise ValueError("vector length does not match block dimensions")
    out, pos = [], 0
    for d in dims:
        out.append(vec[pos:pos + d])
        pos += d
    return out


def join_segments(segments):
    return np.concatenate([np.asarray(s) for s in segments])


@dataclass
class BlockOperator:
    """Square block matrix over a list of block dimensions.

    ``blocks`` maps (i, j) to a sparse matrix of shape (dims[i], dims[j]);
    absent keys are zero blocks.
    """

    block_dims: list
    blocks: dict

    def __post_init__(self):
        for (i, j), m in self.blocks.items():
            expect = (self.block_dims[i], self.block_dims[j])
            if m.shape != expect:
                raise ValueError(f"block {(i, j)} has shape {m.shape}, expected {expect}")

    @property
    def dim(self) -> int:
        return sum(self.block_dims)

    def block(self, i, j):
        try:
            return self.blocks[(i, j)]
        except KeyError:
            return sp.csr_matrix((self.block_dims[i], self.block_dims[j]), dtype=complex)

    def to_sparse(self) -> sp.csr_matrix:
        n = len(self.block_dims)
        grid = [[self.blocks.get((i, j)) for j in range(n)] for i in range(n)]
        out = sp.bmat(grid, format="csr").astype(complex)
        out.sum_duplicates()
        out.sort_indices()
        return out

    def apply(self, segments):
        """Apply to per-block vector segments; returns segments."""
        n = len(self.block_dims)
        out = [np.zeros(d, dtype=complex) for d in self.block_dims]
        for (i, j), m in self.blocks.items():
            out[i] += m @ np.asarray(segments[j], dtype=complex)
        return out

    def apply_vector(self, vec):
        return join_segments(self.apply(split_segments(vec, self.block_dims)))

    def hermiticity_defect(self) -> float:
        h = self.to_sparse()
        d = h - h.conj().T
        return 0.0 if d.nnz == 0 else float(np.max(np.abs(d.data)))

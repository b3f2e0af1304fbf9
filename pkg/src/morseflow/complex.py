"""Cubical cell structure of the box [0, m-1]^d.

A cell is a code vector with one entry per coordinate: the even code ``2h``
stands for the point ``{h}`` and the odd code ``2h+1`` for the open interval
``(h, h+1)``.  Cells are indexed in C order (first coordinate most
significant), so the index of a code is its value in base ``2m-1``.
"""
from __future__ import annotations

import itertools

import numpy as np
import scipy.sparse as sp

DEFAULT_CELL_BUDGET = 10 ** 7


class CellBudgetExceeded(ValueError):
    pass


class CubicalComplex:
    def __init__(self, m, d, cell_budget=DEFAULT_CELL_BUDGET):
        if m < 3 or d < 1:
            raise ValueError(f"need m >= 3 and d >= 1, got m={m}, d={d}")
        n = (2 * m - 1) ** d
        if n > cell_budget:
            raise CellBudgetExceeded(f"{n} cells exceed the cell budget {cell_budget}")
        self.m, self.d = m, d
        self.side = 2 * m - 1
        self.shape = (self.side,) * d
        self.n_cells = n
        self.strides = np.array([self.side ** (d - 1 - j) for j in range(d)], dtype=np.int64)
        self._codes = None
        self._dims = None
        self._boundary = None
        self._closure_pairs = None

    def __repr__(self):
        return f"CubicalComplex(m={self.m}, d={self.d}, cells={self.n_cells})"

    @property
    def codes(self):
        """``(n_cells, d)`` array of codes, row ``i`` being cell ``i``."""
        if self._codes is None:
            grids = np.indices(self.shape, dtype=np.int8 if self.side < 128 else np.int32)
            self._codes = grids.reshape(self.d, -1).T.copy()
        return self._codes

    @property
    def dims(self):
        if self._dims is None:
            self._dims = (self.codes & 1).sum(axis=1).astype(np.int8)
        return self._dims

    def index(self, code):
        code = tuple(int(c) for c in code)
        if len(code) != self.d or any(not 0 <= c < self.side for c in code):
            raise ValueError(f"invalid cell code {code}")
        return int(np.dot(code, self.strides))

    def code(self, idx):
        return tuple(int(c) for c in np.unravel_index(int(idx), self.shape))

    @property
    def top_cells(self):
        """Indices of the d-dimensional cells in increasing order."""
        return np.flatnonzero(self.dims == self.d)

    @property
    def n_top(self):
        return (self.m - 1) ** self.d

    def top_grid_shape(self):
        return (self.m - 1,) * self.d

    def top_index_to_cell(self, k):
        """Cell index of the ``k``-th top cell (C order on the (m-1)^d grid)."""
        g = np.array(np.unravel_index(k, self.top_grid_shape()))
        return (2 * g + 1).T @ self.strides

    def faces(self, code):
        return faces(code)

    def closure(self, code):
        return closure(code)

    def star(self, code):
        return star(code, self.m)

    def boundary_matrix(self):
        if self._boundary is None:
            self._boundary = BoundaryMatrix.of_complex(self)
        return self._boundary

    def closure_pairs(self):
        """``(face, top)`` index arrays listing every cell of every top-cell closure.

        Sorted by top cell, then by face index.  These are exactly the pairs
        ``(eta, xi)`` with ``xi`` top and ``eta`` in ``star(xi)``'s dual,
        i.e. ``eta <= xi`` in the face order.
        """
        if self._closure_pairs is None:
            offs = np.array(list(itertools.product((-1, 0, 1), repeat=self.d)), dtype=np.int64)
            delta = np.sort(offs @ self.strides)
            itype = np.int32 if self.n_cells < 2 ** 31 else np.int64
            tops = self.top_cells.astype(itype)
            face = (tops[:, None] + delta.astype(itype)[None, :]).ravel()
            top = np.repeat(tops, delta.size)
            self._closure_pairs = (face, top)
        return self._closure_pairs

    def star_reduce(self, top_values, op):
        """Apply ``op`` (``np.minimum``/``np.maximum``) over ``star(c) ∩ top`` for every cell.

        ``top_values`` is indexed like :attr:`top_cells`.  Works one axis at a
        time because the top cells of a star form a product set.
        """
        arr = np.zeros(self.shape, dtype=np.asarray(top_values).dtype)
        odd = (slice(1, None, 2),) * self.d
        arr[odd] = np.asarray(top_values).reshape(self.top_grid_shape())
        for j in range(self.d):
            a = np.moveaxis(arr, j, 0)
            a[0] = a[1]
            a[-1] = a[-2]
            a[2:-1:2] = op(a[1:-2:2], a[3::2])
        return arr.reshape(-1)


def build_complex(m, d, cell_budget=DEFAULT_CELL_BUDGET):
    return CubicalComplex(m, d, cell_budget)


def cell_dim(code):
    return sum(c & 1 for c in code)


def faces(code):
    """Codimension-one faces, in coordinate order (lower end first)."""
    code = tuple(code)
    out = []
    for j, c in enumerate(code):
        if c & 1:
            out.append(code[:j] + (c - 1,) + code[j + 1:])
            out.append(code[:j] + (c + 1,) + code[j + 1:])
    return out


def closure(code):
    choices = [(c - 1, c, c + 1) if c & 1 else (c,) for c in code]
    return set(itertools.product(*choices))


def star(code, m):
    top = 2 * (m - 1)
    choices = []
    for c in code:
        if c & 1:
            choices.append((c,))
        else:
            choices.append(tuple(v for v in (c - 1, c, c + 1) if 0 <= v <= top))
    return set(itertools.product(*choices))


class BoundaryMatrix:
    """Sparse GF(2) matrix in compressed-column form.

    Column ``j`` holds rows ``indices[indptr[j]:indptr[j+1]]`` in increasing order.
    """

    def __init__(self, n_rows, n_cols, indptr, indices):
        self.shape = (n_rows, n_cols)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        indices = np.asarray(indices)
        if indices.dtype not in (np.int32, np.int64):
            indices = indices.astype(np.int64)
        self.indices = indices

    @classmethod
    def from_pairs(cls, n_rows, n_cols, rows, cols):
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        order = np.lexsort((rows, cols))
        rows, cols = rows[order], cols[order]
        # entries are GF(2): a repeated pair cancels
        key = cols * n_rows + rows
        uniq, counts = np.unique(key, return_counts=True)
        keep = uniq[counts % 2 == 1]
        cols, rows = np.divmod(keep, n_rows)
        indptr = np.zeros(n_cols + 1, dtype=np.int64)
        np.add.at(indptr, cols + 1, 1)
        return cls(n_rows, n_cols, np.cumsum(indptr), rows)

    @classmethod
    def of_complex(cls, x, verify=True):
        # faces of cell i are i -/+ strides[j] over its odd axes j; listing
        # -strides[0], ..., -strides[d-1], +strides[d-1], ..., +strides[0]
        # gives every column already sorted, so no global sort is needed
        itype = np.int32 if x.n_cells < 2 ** 31 else np.int64
        offsets = np.concatenate([-x.strides, x.strides[::-1]]).astype(itype)
        indptr = np.zeros(x.n_cells + 1, dtype=np.int64)
        np.cumsum(2 * x.dims.astype(np.int64), out=indptr[1:])
        indices = np.empty(int(indptr[-1]), dtype=itype)
        chunk = 1 << 18
        for lo in range(0, x.n_cells, chunk):
            hi = min(x.n_cells, lo + chunk)
            odd = (x.codes[lo:hi] & 1).astype(bool)
            mask = np.concatenate([odd, odd[:, ::-1]], axis=1)
            cand = np.arange(lo, hi, dtype=itype)[:, None] + offsets[None, :]
            indices[indptr[lo]:indptr[hi]] = cand[mask]
        b = cls(x.n_cells, x.n_cells, indptr, indices)
        if verify and not b.squares_to_zero():
            raise AssertionError("boundary does not square to zero")
        return b

    @property
    def nnz(self):
        return int(self.indices.size)

    def column(self, j):
        return self.indices[self.indptr[j]:self.indptr[j + 1]]

    def pairs(self):
        cols = np.repeat(np.arange(self.shape[1]), np.diff(self.indptr))
        return self.indices.astype(np.int64), cols

    def pair_chunks(self, chunk=1 << 20):
        """``(rows, cols)`` arrays for consecutive column ranges."""
        for lo in range(0, self.shape[1], chunk):
            hi = min(self.shape[1], lo + chunk)
            a, b = self.indptr[lo], self.indptr[hi]
            cols = np.repeat(np.arange(lo, hi), np.diff(self.indptr[lo:hi + 1]))
            yield self.indices[a:b], cols

    def to_scipy(self):
        data = np.ones(self.nnz, dtype=np.int8)
        return sp.csc_matrix((data, self.indices, self.indptr), shape=self.shape)

    def squares_to_zero(self, chunk=1 << 18):
        a = self.to_scipy().astype(np.int32)
        for lo in range(0, self.shape[1], chunk):
            sq = a @ a[:, lo:lo + chunk]
            if np.any(sq.data % 2):
                return False
        return True

    def dump_triplets(self, path):
        rows, cols = self.pairs()
        order = np.lexsort((cols, rows))
        with open(path, "w") as fh:
            for r, c in zip(rows[order].tolist(), cols[order].tolist()):
                fh.write(f"{r} {c} 1\n")


def full_betti(x):
    """GF(2) Betti numbers of the whole box complex (used as a sanity oracle)."""
    from .algebra import GradedComplex, homology_of_mask
    bd = x.boundary_matrix()
    c = GradedComplex(np.zeros(x.n_cells, dtype=np.int64), x.dims, bd.indptr, bd.indices,
                      np.ones((1, 1), dtype=bool))
    return homology_of_mask(c, np.ones(x.n_cells, dtype=bool))

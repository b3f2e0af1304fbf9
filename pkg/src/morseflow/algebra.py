"""SC-graded GF(2) chain complexes, Morse reduction and homology ranks.

Differentials are kept as sparse column/row incidence sets.  The Conley
complex is computed by repeatedly cancelling a within-grade pair ``(a, b)``
with ``D[a, b] = 1`` and applying the rule ``D[x, y] += D[x, b] D[a, y]``.
"""
from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .dynamics import InvariantError


@dataclass
class GradedComplex:
    """Generators ``0..n-1`` with an SC grade and a dimension.

    The boundary is stored column-compressed: the rows of the boundary of
    generator ``j`` are ``indices[indptr[j]:indptr[j+1]]``.  ``leq`` is the
    dense order matrix of the grading poset.  ``labels`` maps generators back
    to source objects (cell indices for cellular complexes).
    """
    grade: np.ndarray
    dim: np.ndarray
    indptr: np.ndarray
    indices: np.ndarray
    leq: np.ndarray
    labels: np.ndarray = None

    def __post_init__(self):
        self.grade = np.asarray(self.grade, dtype=np.int64)
        self.dim = np.asarray(self.dim, dtype=np.int64)
        self.indptr = np.asarray(self.indptr, dtype=np.int64)
        self.indices = np.asarray(self.indices)
        if self.indices.dtype not in (np.int32, np.int64):
            self.indices = self.indices.astype(np.int64)
        if self.labels is None:
            self.labels = np.arange(self.grade.size)

    @classmethod
    def from_columns(cls, grade, dim, columns, leq, labels=None, **kw):
        lens = [len(c) for c in columns]
        indptr = np.concatenate([[0], np.cumsum(lens)]).astype(np.int64)
        indices = np.array([r for c in columns for r in sorted(c)], dtype=np.int64)
        return cls(grade, dim, indptr, indices, leq, labels, **kw)

    @property
    def n(self):
        return int(self.grade.size)

    @property
    def n_grades(self):
        return int(self.leq.shape[0])

    def column(self, j):
        return self.indices[self.indptr[j]:self.indptr[j + 1]]

    @property
    def columns(self):
        return [self.column(j).tolist() for j in range(self.n)]

    def rows_cols(self):
        cols = np.repeat(np.arange(self.n), np.diff(self.indptr))
        return self.indices, cols

    def pairs(self):
        """Nonzero entries as sorted ``(row, col)`` tuples."""
        rows, cols = self.rows_cols()
        return sorted(zip(rows.tolist(), cols.tolist()))

    def check(self):
        """Raise unless ∂² = 0 and the differential is filtered."""
        rows, cols = self.rows_cols()
        if rows.size:
            if np.any(self.dim[rows] != self.dim[cols] - 1):
                raise InvariantError("boundary entry does not lower dimension by one")
            if not np.all(self.leq[self.grade[rows], self.grade[cols]]):
                raise InvariantError("boundary entry goes up in the grading order")
        a = sp.csc_matrix((np.ones(rows.size, dtype=np.int32), self.indices, self.indptr),
                          shape=(self.n, self.n))
        if np.any((a @ a).data % 2):
            raise InvariantError("∂² ≠ 0")
        return True

    def is_strict(self):
        rows, cols = self.rows_cols()
        return not np.any(self.grade[rows] == self.grade[cols])


@dataclass
class ConleyComplex(GradedComplex):
    """Strict graded complex; ``labels`` are the surviving source generators."""
    chain_maps: dict = field(default=None)

    def matrix(self, rows, cols):
        """Dense 0/1 block with the given generator lists as rows and columns."""
        entries = set(self.pairs())
        return [[1 if (r, c) in entries else 0 for c in cols] for r in rows]

    def to_dict(self):
        return {
            "generators": [{"id": i, "class": int(g), "q": int(q)}
                           for i, (g, q) in enumerate(zip(self.grade, self.dim))],
            "differential": [list(p) for p in self.pairs()],
        }


def graded_complex(x, scd):
    """The cellular complex of ``x`` graded by ``dyn``."""
    bd = x.boundary_matrix()
    for rows, cols in bd.pair_chunks():
        if not np.all(scd.leq[scd.dyn[rows], scd.dyn[cols]]):
            raise InvariantError("dyn is not order-preserving on a face pair")
    return GradedComplex(scd.dyn, x.dims, bd.indptr, bd.indices, scd.leq)


def connection_matrix(c, keep_chain_maps=False):
    """Graded algebraic Morse reduction to a strict complex.

    Cancelling a pair in dimensions ``(q, q+1)`` only changes the block of
    the differential from ``q+1`` to ``q`` (and drops the row of ``b`` and the
    column of ``a`` elsewhere), so the blocks are reduced one at a time from
    the bottom up and only one block is held in memory.  Within a block
    columns are visited by increasing generator index; the pivot row is the
    same-grade row with the fewest entries (ties to the lowest index), and
    columns changed by a cancellation that were already visited are queued
    again.
    """
    n = c.n
    alive = np.ones(n, dtype=bool)
    grade = c.grade.tolist()
    dim = c.dim
    maps = keep_chain_maps
    if maps and n > 50000:
        raise ValueError("chain maps are only kept for complexes with at most 50000 generators")
    if maps:
        phi = [{j} for j in range(n)]
        psi = [{j} for j in range(n)]
    max_dim = int(dim.max()) if n else 0
    final_cols = {}
    ids = list(range(n))
    lengths = np.diff(c.indptr)
    for q in range(max_dim):
        # the block from dimension q+1 to q on the current generators
        gens = np.flatnonzero(dim == q + 1)
        kk = np.repeat(gens, lengths[gens])
        starts = np.repeat(c.indptr[gens] - np.cumsum(lengths[gens]) + lengths[gens], lengths[gens])
        rr = c.indices[starts + np.arange(kk.size)]
        sel = alive[rr]
        rr, kk = rr[sel].tolist(), kk[sel].tolist()
        gens_b = [ids[g] for g in gens.tolist()]
        del gens, starts, sel
        cols = {b: set() for b in gens_b}
        rows = {ids[a]: set() for a in np.flatnonzero((dim == q) & alive).tolist()}
        for r, k in zip(rr, kk):
            # share one int object per generator; the sets hold millions of references
            r, k = ids[r], ids[k]
            cols[k].add(r)
            rows[r].add(k)
        del rr, kk
        heap = list(gens_b)
        queued = set(heap)
        while heap:
            b = heapq.heappop(heap)
            queued.discard(b)
            if not alive[b]:
                continue
            gb = grade[b]
            col_b = cols[b]
            best = None
            for r in col_b:
                if grade[r] == gb:
                    key = (len(rows[r]), r)
                    if best is None or key < best:
                        best = key
            if best is None:
                continue
            a = best[1]
            col_b.discard(a)
            row_a = rows.pop(a)
            row_a.discard(b)
            for x in col_b:
                rows[x].discard(b)
            for y in row_a:
                cy = cols[y]
                cy.discard(a)
                cy.symmetric_difference_update(col_b)
                if y < b and y not in queued:
                    heapq.heappush(heap, y)
                    queued.add(y)
            for x in col_b:
                rows[x].symmetric_difference_update(row_a)
            if maps:
                _update_maps(phi, psi, a, b, col_b, row_a)
            del cols[b]
            alive[a] = alive[b] = False
        for b, s in cols.items():
            final_cols[b] = tuple(s)
        del cols, rows
        for g in list(final_cols):
            if not alive[g]:
                del final_cols[g]
    keep = np.flatnonzero(alive)
    pos = {int(g): i for i, g in enumerate(keep)}
    new_cols = [sorted(pos[r] for r in final_cols.get(int(g), ())) for g in keep]
    chain = None
    if maps:
        chain = {"phi": phi, "psi": [psi[g] for g in keep], "survivors": keep}
    out = ConleyComplex.from_columns(c.grade[keep], c.dim[keep], new_cols, c.leq, c.labels[keep],
                                     chain_maps=chain)
    if not out.is_strict():
        raise InvariantError("reduction left a within-grade entry")
    return out


def _update_maps(phi, psi, a, b, col_b, row_a):
    # phi (source -> reduced): b maps to 0 and a to the rest of the boundary of b
    for s in phi:
        s.discard(b)
        if a in s:
            s.discard(a)
            s ^= col_b
    # psi (reduced -> source): y in row(a) picks up the lift of b
    for y in row_a:
        psi[y] ^= psi[b]


def gf2_rank(rows):
    """Rank over GF(2) of vectors given as Python int bitmasks."""
    basis = {}
    r = 0
    for v in rows:
        while v:
            h = v.bit_length() - 1
            if h in basis:
                v ^= basis[h]
            else:
                basis[h] = v
                r += 1
                break
    return r


def _block_ranks(c, sel):
    """Ranks of the boundary blocks restricted to generators in ``sel``."""
    idx = np.flatnonzero(sel)
    pos = {int(g): i for i, g in enumerate(idx)}
    ranks = {}
    vecs = {}
    for g in idx.tolist():
        v = 0
        for r in c.column(g).tolist():
            p = pos.get(int(r))
            if p is not None:
                v |= 1 << p
        if v:
            vecs.setdefault(int(c.dim[g]), []).append(v)
    for q, vs in vecs.items():
        ranks[q] = gf2_rank(vs)
    return ranks


def homology_of_mask(c, sel):
    """Per-dimension GF(2) Betti numbers of the restriction to ``sel``.

    ``sel`` must describe a sub-quotient (convex set of grades) for the
    answer to be homology; the rank arithmetic is the same either way.
    """
    if c.n > 20000:
        return _betti_persistence(c, [sel])[0]
    ranks = _block_ranks(c, sel)
    dims = c.dim[sel]
    top = int(c.dim.max()) if c.n else 0
    out = {}
    for q in range(top + 1):
        nq = int(np.count_nonzero(dims == q))
        b = nq - ranks.get(q, 0) - ranks.get(q + 1, 0)
        if b:
            out[q] = b
    return out


def homology_convex(c, conv, order=None):
    """Betti numbers of the part of ``c`` graded by the convex class set ``conv``."""
    from .order import is_convex
    conv = set(int(a) for a in conv)
    if order is not None and not is_convex(order, conv):
        raise ValueError(f"{sorted(conv)} is not convex")
    if order is None and not _convex_leq(c.leq, conv):
        raise ValueError(f"{sorted(conv)} is not convex")
    sel = np.zeros(c.n_grades, dtype=bool)
    sel[list(conv)] = True
    return homology_of_mask(c, sel[c.grade])


def _convex_leq(leq, conv):
    if not conv:
        return True
    s = np.zeros(leq.shape[0], dtype=bool)
    s[list(conv)] = True
    above = leq[s].any(axis=0)
    below = leq[:, s].any(axis=1)
    return not np.any(above & below & ~s)


def betti_bm(cc):
    """``{(class, q): rank}`` for a strict complex: count survivors."""
    out = {}
    for g, q in zip(cc.grade.tolist(), cc.dim.tolist()):
        out[(g, q)] = out.get((g, q), 0) + 1
    return out


def _betti_persistence(c, masks):
    """Betti numbers of several nested down-closed generator sets.

    ``masks`` must be increasing; one column reduction (with clearing,
    highest dimension first) over a filtration that lists each mask before
    the next serves all of them.  Generators outside the last mask are
    ignored.
    """
    n = c.n
    level = np.full(n, len(masks), dtype=np.int64)
    for k in range(len(masks) - 1, -1, -1):
        level[masks[k]] = k
    inside = level < len(masks)
    order = np.lexsort((np.arange(n), c.dim, level))
    order = order[inside[order]]
    pos = np.full(n, -1, dtype=np.int64)
    pos[order] = np.arange(order.size)
    dims = c.dim
    top = int(dims[order].max()) if order.size else 0
    pivot_of = {}  # low row position -> reduced column (as set)
    negative = np.zeros(order.size, dtype=bool)
    death = np.full(order.size, len(masks), dtype=np.int64)
    for q in range(top, 0, -1):
        for p in np.flatnonzero(dims[order] == q).tolist():
            if death[p] < len(masks) or p in pivot_of:
                continue  # clearing: this column is a pivot row, it reduces to zero
            g = int(order[p])
            col = set(pos[c.column(g)].tolist())
            col.discard(-1)
            while col:
                low = max(col)
                other = pivot_of.get(low)
                if other is None:
                    pivot_of[low] = col
                    negative[p] = True
                    death[low] = level[g]
                    break
                col ^= other
    lv = level[order]
    dd = dims[order]
    out = []
    for k in range(len(masks)):
        alive = (lv <= k) & ~negative & (death > k)
        qs, counts = np.unique(dd[alive], return_counts=True)
        out.append({int(q): int(n) for q, n in zip(qs, counts)})
    return out


class EquivalenceError(AssertionError):
    def __init__(self, alpha, src, red):
        self.alpha, self.src, self.red = alpha, src, red
        super().__init__(f"homology differs on down-set {sorted(alpha)}: source {src}, reduced {red}")


def random_linear_extension(leq, rng):
    """A uniformly chosen minimal element is appended at every step."""
    k = leq.shape[0]
    strict_below = leq.copy()
    np.fill_diagonal(strict_below, False)
    missing = strict_below.sum(axis=0)
    placed = []
    ready = sorted(int(a) for a in np.flatnonzero(missing == 0))
    while ready:
        a = ready.pop(rng.randrange(len(ready)))
        placed.append(a)
        for b in np.flatnonzero(strict_below[a]).tolist():
            missing[b] -= 1
            if missing[b] == 0:
                ready.append(b)
        ready.sort()
    if len(placed) != k:
        raise ValueError("grading relation has a cycle")
    return placed


def random_down_sets(leq, count, rng, per_chain=10):
    """``count`` random down-sets, drawn as prefixes of random linear extensions.

    Prefixes of one extension are nested, so each group of ``per_chain``
    samples can be checked with a single pass of the homology oracle.
    """
    out = []
    seen = set()
    k = leq.shape[0]
    for _ in range(20 * count):
        if len(out) >= count:
            break
        ext = random_linear_extension(leq, rng)
        cuts = sorted(rng.sample(range(k + 1), min(per_chain, k + 1)))
        for c in cuts:
            s = frozenset(ext[:c])
            if s not in seen and len(out) < count:
                seen.add(s)
                out.append(s)
    return out


def _chains(samples):
    """Greedy cover of a family of sets by increasing chains."""
    chains = []
    for s in sorted(set(samples), key=lambda s: (len(s), sorted(s))):
        for ch in chains:
            if ch[-1] <= s:
                ch.append(s)
                break
        else:
            chains.append([s])
    return chains


def verify_equivalence(src, cc, samples):
    """Compare homology of down-set restrictions of ``src`` and of ``cc``.

    The source side is computed by a separate column reduction (one pass per
    chain of nested samples); the reduced side by dense ranks on ``cc``.
    Raises :class:`EquivalenceError` on the first mismatch.
    """
    k = src.n_grades
    for alpha in samples:
        a = set(alpha)
        if any(not set(np.flatnonzero(src.leq[:, b]).tolist()) <= a for b in a):
            raise ValueError(f"{sorted(a)} is not a down-set")
    for chain in _chains([frozenset(int(a) for a in s) for s in samples]):
        masks = []
        for alpha in chain:
            m = np.zeros(k, dtype=bool)
            m[list(alpha)] = True
            masks.append(m)
        got = _betti_persistence(src, [m[src.grade] for m in masks])
        for alpha, m, h in zip(chain, masks, got):
            red = homology_of_mask(cc, m[cc.grade])
            if h != red:
                raise EquivalenceError(alpha, h, red)
    return True

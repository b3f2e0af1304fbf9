"""Crossing-number data, flow relations, the SC poset and the dyn map.

All per-cell arrays are indexed by cell index of the underlying
:class:`~morseflow.complex.CubicalComplex`; per-top-cell arrays are indexed by
position in ``complex.top_cells`` (C order on the (m-1)^d grid of top cells).
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .braid import BraidValidationError, validate
from .order import PreOrder, Relation, SccPoset, _bits, scc_condense


class InvariantError(RuntimeError):
    """A theorem-backed invariant failed; signals a bug or a bad input."""


@dataclass
class LambdaData:
    lambda_top: np.ndarray  # per top cell
    lambda_minus: np.ndarray  # per cell
    lambda_plus: np.ndarray  # per cell


def _threads():
    try:
        return max(1, int(os.environ.get("MORSEFLOW_THREADS", "1")))
    except ValueError:
        return 1


def top_lambda(x, b):
    """Crossing number of the midpoint free strand of every top cell."""
    grid = np.indices(x.top_grid_shape()).reshape(x.d, -1).T
    y = b.anchors.astype(np.float64)
    chunks = np.array_split(np.arange(grid.shape[0]), max(1, grid.shape[0] // 65536 + 1))

    def work(rows):
        mid = grid[rows] + 0.5
        xc = np.concatenate([mid, mid[:, :1]], axis=1)
        diff = xc[:, None, :] - y[None, :, :]
        return np.count_nonzero(diff[:, :, :-1] * diff[:, :, 1:] < 0, axis=(1, 2))

    if _threads() > 1 and len(chunks) > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(_threads()) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return np.concatenate(parts).astype(np.int64)


def compute_lambda(x, b):
    if (x.m, x.d) != (b.m, b.d):
        raise ValueError(f"complex is m={x.m}, d={x.d} but braid is m={b.m}, d={b.d}")
    issues = validate(b)
    if issues:
        raise BraidValidationError(issues)
    lam = top_lambda(x, b)
    if np.any(lam % 2):
        bad = int(np.flatnonzero(lam % 2)[0])
        raise InvariantError(f"odd crossing number {lam[bad]} on top cell {x.code(x.top_cells[bad])}")
    return LambdaData(lam, x.star_reduce(lam, np.minimum), x.star_reduce(lam, np.maximum))


def lambda_table(x, data):
    """Rows of the 2-d λ grid, top row first (vertical axis is the second coordinate)."""
    if x.d != 2:
        raise ValueError("λ tables are only drawn for d = 2")
    grid = data.lambda_top.reshape(x.top_grid_shape())  # grid[i0, i1]
    return [grid[:, i1].tolist() for i1 in range(x.m - 2, -1, -1)]


def format_lambda_table(rows):
    width = max(len(str(v)) for r in rows for v in r)
    return "".join(" ".join(str(v).rjust(width) for v in r) + "\n" for r in rows)


class FlowRelations:
    """The relations E, R (on all cells), Etop and F (on top cells).

    Top-cell relations use top-cell positions.  E and R are described through
    the closure pairs ``(face, top)`` of the complex, ``e_face[k] <= e_top[k]``:
    ``r_up[k]`` says ``(face, top)`` is in R and ``r_down[k]`` says
    ``(top, face)`` is in R.  These arrays are built on first use.
    """

    def __init__(self, x, lam, etop, f):
        self.complex, self.lam = x, lam
        self.etop, self.f = etop, f
        self.n_cells = x.n_cells
        self._r = None

    @property
    def e_face(self):
        return self.complex.closure_pairs()[0]

    @property
    def e_top(self):
        return self.complex.closure_pairs()[1]

    def _masks(self):
        if self._r is None:
            lam = self.lam
            face, top = self.complex.closure_pairs()
            lt = lam.lambda_minus[top]  # equals λ on the top cell
            lo, hi = lam.lambda_minus[face], lam.lambda_plus[face]
            self._r = ((lo <= lt) & (hi <= lt), (lt <= lo) & (lt <= hi))
        return self._r

    @property
    def r_up(self):
        return self._masks()[0]

    @property
    def r_down(self):
        return self._masks()[1]

    def release(self):
        """Drop the cached all-cell arrays (they are rebuilt on demand)."""
        self._r = None
        self.complex._closure_pairs = None

    def relation_e(self):
        src = np.concatenate([self.e_face, self.e_top])
        dst = np.concatenate([self.e_top, self.e_face])
        return Relation(self.n_cells, src, dst)

    def relation_r(self):
        src = np.concatenate([self.e_face[self.r_up], self.e_top[self.r_down]])
        dst = np.concatenate([self.e_top[self.r_up], self.e_face[self.r_down]])
        return Relation(self.n_cells, src, dst)


def top_adjacency(x):
    """Pairs of top-cell positions sharing a codimension-one face (both orders)."""
    shape = x.top_grid_shape()
    pos = np.arange(x.n_top).reshape(shape)
    src, dst = [], []
    for j in range(x.d):
        a = np.moveaxis(pos, j, 0)
        lo, hi = a[:-1].ravel(), a[1:].ravel()
        src += [lo, hi]
        dst += [hi, lo]
    return np.concatenate(src), np.concatenate(dst)


def relations(x, lam):
    src, dst = top_adjacency(x)
    etop = Relation(x.n_top, src, dst)
    keep = lam.lambda_top[src] <= lam.lambda_top[dst]
    f = Relation(x.n_top, src[keep], dst[keep])
    return FlowRelations(x, lam, etop, f)


@dataclass
class ScData:
    """Condensation of F with laps and the dyn grading of all cells.

    ``sc.classes`` hold top-cell positions; classes are numbered by
    (lap, smallest top-cell position).  ``leq`` is the dense order matrix
    ``leq[a, b] = [a] <= [b]``.
    """
    sc: SccPoset
    lambda_class: np.ndarray
    lap: np.ndarray
    dyn: np.ndarray
    leq: np.ndarray
    top_class: np.ndarray

    def __len__(self):
        return len(self.sc)

    @property
    def order(self):
        return self.sc.order

    def fiber(self, classes):
        """Mask of cells whose dyn class lies in ``classes``."""
        sel = np.zeros(len(self.sc), dtype=bool)
        sel[list(classes)] = True
        return sel[self.dyn]


def sc_structure(x, lam, rel):
    raw = scc_condense(rel.f)
    lam_cls = np.array([lam.lambda_top[c[0]] for c in raw.classes], dtype=np.int64)
    for k, c in enumerate(raw.classes):
        if np.any(lam.lambda_top[list(c)] != lam_cls[k]):
            raise InvariantError(f"λ not constant on class {k}")
    if np.any(lam_cls % 2):
        raise InvariantError("odd crossing number on a class")
    perm = sorted(range(len(raw)), key=lambda k: (lam_cls[k] // 2, raw.classes[k][0]))
    sc = raw.renumber(perm)
    lam_cls = lam_cls[perm]
    lap = lam_cls // 2
    k = len(sc)
    leq = np.zeros((k, k), dtype=bool)
    for b_ in range(k):
        leq[_bits(sc.order.down[b_]), b_] = True
    top_class = sc.class_of
    dyn = _dyn(x, lap, top_class, leq)
    return ScData(sc, lam_cls, lap, dyn, leq, top_class)


def _dyn(x, lap, top_class, leq):
    # the minimum of a set of classes, if it exists, has the least lap and is
    # the only candidate with that lap; pick by (lap, class) and then verify
    k = len(lap)
    key = lap[top_class] * k + top_class
    cand = x.star_reduce(key, np.minimum) % k
    face, _ = x.closure_pairs()
    per_top = 3 ** x.d
    step = max(1, 2 ** 22 // per_top)
    for lo in range(0, x.n_top, step):
        hi = min(x.n_top, lo + step)
        f = face[lo * per_top:hi * per_top]
        ok = leq[cand[f], np.repeat(top_class[lo:hi], per_top)]
        if not ok.all():
            bad = int(f[np.flatnonzero(~ok)[0]])
            raise InvariantError(f"star of cell {x.code(bad)} has no unique minimal class")
    return cand


def morse_preorder(scd):
    """The pre-order on cells pulled back from SC through dyn (small complexes only)."""
    n = scd.dyn.size
    members = [0] * len(scd.sc)
    for c, k in enumerate(scd.dyn.tolist()):
        members[k] |= 1 << c
    down = []
    for k in scd.dyn.tolist():
        m = 0
        for j in _bits(scd.order.down[k]):
            m |= members[j]
        down.append(m)
    return PreOrder(n, down)


def is_down_set(scd, alpha):
    alpha = set(alpha)
    return all(set(_bits(scd.order.down[a])) <= alpha for a in alpha)


def face_closure(x, mask):
    """Closure of a cell set under taking faces (one sweep per dimension)."""
    bd = x.boundary_matrix()
    out = mask.copy()
    dims = x.dims
    cols_all = np.repeat(np.arange(x.n_cells), np.diff(bd.indptr))
    for q in range(x.d, 0, -1):
        sel = out[cols_all] & (dims[cols_all] == q)
        out[bd.indices[sel]] = True
    return out


class _BlockChecker:
    """Index arrays shared by all :func:`verify_block` calls on one analysis."""

    def __init__(self, x, rel):
        bd = x.boundary_matrix()
        self.rows = bd.indices
        self.cols = np.repeat(np.arange(x.n_cells, dtype=bd.indices.dtype), np.diff(bd.indptr))
        up, down = rel.r_up, rel.r_down
        face, top = rel.e_face, rel.e_top
        self.up_f, self.up_t = face[up], top[up]
        self.dn_t, self.dn_f = top[down], face[down]
        self.complex = x

    def step(self, v):
        """c_R(V) = {eta : (eta, xi) in R, xi in V}."""
        img = np.zeros_like(v)
        img[self.up_f[v[self.up_t]]] = True
        img[self.dn_t[v[self.dn_f]]] = True
        return img

    def check(self, u):
        if np.any(u[self.cols] & ~u[self.rows]):
            return False
        first = self.step(u)
        if np.any(first & ~u):
            return False
        gamma = first
        while True:
            nxt = gamma | self.step(gamma)
            if np.array_equal(nxt, gamma):
                break
            gamma = nxt
        # U is closed, so a cell avoids the closure of the complement exactly
        # when every top cell of its star lies in U
        x = self.complex
        interior = x.star_reduce(u[x.top_cells], np.minimum)
        return bool(np.all(interior[gamma]))


def verify_block(x, rel, scd, alpha):
    """Check that ``dyn^{-1}(alpha)`` is closed, forward invariant and that
    its forward image lies in its interior."""
    if not is_down_set(scd, alpha):
        raise ValueError(f"{sorted(alpha)} is not a down-set of SC")
    checker = getattr(rel, "_checker", None)
    if checker is None:
        checker = rel._checker = _BlockChecker(x, rel)
    return checker.check(scd.fiber(alpha))


def verify_block_direct(x, rel, scd, alpha):
    """Same test computed straight from the definitions (slow; for cross-checks)."""
    u = scd.fiber(alpha)
    if not np.array_equal(face_closure(x, u), u):
        return False
    r = rel.relation_r()
    src, dst = r.src, r.dst
    image = np.zeros_like(u)
    image[src[u[dst]]] = True
    if np.any(image & ~u):
        return False
    gamma = image
    while True:
        nxt = gamma.copy()
        nxt[src[gamma[dst]]] = True
        if np.array_equal(nxt, gamma):
            break
        gamma = nxt
    interior = ~face_closure(x, ~u)
    return bool(np.all(interior[gamma]))


@dataclass
class Analysis:
    """Everything computed from a skeleton up to the SC poset."""
    braid: object
    complex: object
    lam: LambdaData
    rel: FlowRelations
    scd: ScData


def analyze_dynamics(b, cell_budget=None):
    from .complex import DEFAULT_CELL_BUDGET, build_complex
    x = build_complex(b.m, b.d, cell_budget or DEFAULT_CELL_BUDGET)
    lam = compute_lambda(x, b)
    rel = relations(x, lam)
    scd = sc_structure(x, lam, rel)
    rel.release()
    return Analysis(b, x, lam, rel, scd)

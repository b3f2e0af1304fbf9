"""Finite relations, pre-orders, posets and down-set lattices.

Ground sets are always ``range(n)``.  Order data is kept as Python integer
bitsets: ``down[b]`` has bit ``a`` set iff ``a <= b``.  That keeps reachability
queries cheap for the few thousand elements that occur in practice and makes
every output independent of hash iteration order.
"""
from __future__ import annotations

from itertools import combinations

import numpy as np

MAX_DOWNSET_ELEMENTS = 20


def _bits(mask):
    """Indices of the set bits of ``mask`` in increasing order."""
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def _mask(items):
    m = 0
    for i in items:
        m |= 1 << i
    return m


class Relation:
    """A binary relation on ``range(n)`` with set semantics.

    Pairs are stored as two parallel, lexicographically sorted int64 arrays.
    """

    def __init__(self, n, src=(), dst=()):
        src = np.asarray(src, dtype=np.int64).ravel()
        dst = np.asarray(dst, dtype=np.int64).ravel()
        if src.shape != dst.shape:
            raise ValueError("source and target arrays differ in length")
        if src.size and (src.min() < 0 or dst.min() < 0 or src.max() >= n or dst.max() >= n):
            raise ValueError(f"relation pair index out of range for n={n}")
        if src.size:
            key = np.unique(src * max(n, 1) + dst)
            src, dst = np.divmod(key, max(n, 1))
        self.n = int(n)
        self.src = src
        self.dst = dst

    @classmethod
    def from_pairs(cls, n, pairs):
        pairs = list(pairs)
        if not pairs:
            return cls(n)
        a, b = zip(*pairs)
        return cls(n, a, b)

    def pairs(self):
        return set(zip(self.src.tolist(), self.dst.tolist()))

    def __len__(self):
        return int(self.src.size)

    def __contains__(self, pair):
        a, b = pair
        i = np.searchsorted(self.src * max(self.n, 1) + self.dst, a * max(self.n, 1) + b)
        return bool(i < self.src.size and self.src[i] == a and self.dst[i] == b)

    def union(self, other):
        if other.n != self.n:
            raise ValueError("relations live on different ground sets")
        return Relation(self.n, np.concatenate([self.src, other.src]),
                        np.concatenate([self.dst, other.dst]))

    def successors(self):
        """Adjacency lists ``succ[a] = [b, ...]`` for pairs ``(a, b)``, sorted."""
        succ = [[] for _ in range(self.n)]
        for a, b in zip(self.src.tolist(), self.dst.tolist()):
            succ[a].append(b)
        return succ

    def __repr__(self):
        return f"Relation(n={self.n}, pairs={len(self)})"


class PreOrder:
    """Reflexive, transitive relation stored as down/up bitsets."""

    def __init__(self, n, down):
        self.n = int(n)
        self.down = list(down)
        up = [0] * self.n
        for b, mask in enumerate(self.down):
            for a in _bits(mask):
                up[a] |= 1 << b
        self.up = up
        for a in range(self.n):
            if not (self.down[a] >> a) & 1:
                raise ValueError(f"pre-order is not reflexive at {a}")

    def leq(self, a, b):
        return bool((self.down[b] >> a) & 1)

    def down_set(self, a):
        return frozenset(_bits(self.down[a]))

    def up_set(self, a):
        return frozenset(_bits(self.up[a]))

    def pairs(self):
        return {(a, b) for b in range(self.n) for a in _bits(self.down[b])}

    def as_relation(self):
        return Relation.from_pairs(self.n, sorted(self.pairs()))

    def is_down_closed(self, s):
        m = _mask(s)
        return all(self.down[a] & ~m == 0 for a in s)

    def is_up_closed(self, s):
        m = _mask(s)
        return all(self.up[a] & ~m == 0 for a in s)

    def __eq__(self, other):
        return isinstance(other, PreOrder) and self.n == other.n and self.down == other.down

    def __repr__(self):
        return f"{type(self).__name__}(n={self.n})"


class Poset(PreOrder):
    """Antisymmetric pre-order with its Hasse diagram.

    ``labels`` optionally records what each element stands for (e.g. the
    join-irreducible sets of a lattice).
    """

    def __init__(self, n, down, labels=None):
        super().__init__(n, down)
        for b in range(self.n):
            both = self.down[b] & self.up[b]
            if both != 1 << b:
                a = next(i for i in _bits(both) if i != b)
                raise ValueError(f"not antisymmetric: {a} and {b} are equivalent")
        self.labels = labels
        self._hasse = None

    @property
    def hasse(self):
        """Covering pairs ``(a, b)`` with ``a < b`` and nothing in between, sorted."""
        if self._hasse is None:
            edges = []
            strict = [self.down[b] & ~(1 << b) for b in range(self.n)]
            for b in range(self.n):
                below = 0
                for c in _bits(strict[b]):
                    below |= strict[c]
                edges.extend((a, b) for a in _bits(strict[b] & ~below))
            self._hasse = sorted(edges)
        return self._hasse

    def covers_below(self, b):
        return [a for a, c in self.hasse if c == b]

    def minimal_elements(self):
        return [a for a in range(self.n) if self.down[a] == 1 << a]

    def maximal_elements(self):
        return [a for a in range(self.n) if self.up[a] == 1 << a]

    def linear_extension(self):
        """Elements sorted so that ``a < b`` implies ``a`` comes first."""
        return sorted(range(self.n), key=lambda a: (bin(self.down[a]).count("1"), a))

    def induced(self, elements):
        """Sub-poset on ``elements`` (renumbered in the given order)."""
        elements = list(elements)
        pos = {e: i for i, e in enumerate(elements)}
        down = []
        for e in elements:
            down.append(_mask(pos[a] for a in _bits(self.down[e]) if a in pos))
        return Poset(len(elements), down, labels=elements)

    @classmethod
    def from_covers(cls, n, covers):
        """Poset generated by the pairs ``(a, b)`` meaning ``a <= b``."""
        return scc_condense(Relation.from_pairs(n, covers)).order


class SccPoset:
    """Strongly connected components of a relation, ordered by reachability.

    ``classes[k]`` is the sorted tuple of members of class ``k``;
    ``class_of[a]`` gives the class of element ``a``; ``order`` is the poset
    on classes where ``[a] <= [b]`` iff ``(a, b)`` lies in the reflexive
    transitive closure of the relation.
    """

    def __init__(self, n, classes, order):
        self.n = n
        self.classes = [tuple(c) for c in classes]
        self.order = order
        class_of = np.empty(n, dtype=np.int64)
        for k, members in enumerate(self.classes):
            class_of[list(members)] = k
        self.class_of = class_of

    def __len__(self):
        return len(self.classes)

    def renumber(self, perm):
        """Reorder classes so new class ``i`` is old class ``perm[i]``."""
        inv = {old: new for new, old in enumerate(perm)}
        down = []
        for old in perm:
            down.append(_mask(inv[a] for a in _bits(self.order.down[old])))
        return SccPoset(self.n, [self.classes[p] for p in perm], Poset(len(perm), down))


def tarjan_scc(n, succ):
    """Iterative Tarjan.  Returns components in reverse topological order."""
    index = [-1] * n
    low = [0] * n
    on_stack = [False] * n
    stack = []
    comps = []
    counter = 0
    for root in range(n):
        if index[root] >= 0:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            nbrs = succ[v]
            if i < len(nbrs):
                work[-1] = (v, i + 1)
                w = nbrs[i]
                if index[w] < 0:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                elif on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                comps.append(comp)
    return comps


def scc_condense(r):
    """Condense ``r`` into its poset of strongly connected components.

    Classes are numbered by their minimal member.
    """
    comps = tarjan_scc(r.n, r.successors())
    comps = sorted((sorted(c) for c in comps), key=lambda c: c[0])
    class_of = [0] * r.n
    for k, c in enumerate(comps):
        for a in c:
            class_of[a] = k
    k_total = len(comps)
    # (a, b) in r means a <= b, so b's down-set absorbs a's.
    preds = [set() for _ in range(k_total)]
    for a, b in zip(r.src.tolist(), r.dst.tolist()):
        ca, cb = class_of[a], class_of[b]
        if ca != cb:
            preds[cb].add(ca)
    down = [None] * k_total
    # Tarjan emits sinks of the successor graph first; here predecessors must
    # be finished before their successors, so walk in topological order.
    for k in _topological(k_total, preds):
        m = 1 << k
        for p in preds[k]:
            m |= down[p]
        down[k] = m
    return SccPoset(r.n, comps, Poset(k_total, down))


def _topological(n, preds):
    indeg = [len(p) for p in preds]
    succ = [[] for _ in range(n)]
    for b, ps in enumerate(preds):
        for a in ps:
            succ[a].append(b)
    ready = [k for k in range(n) if indeg[k] == 0]
    out = []
    while ready:
        k = ready.pop()
        out.append(k)
        for b in succ[k]:
            indeg[b] -= 1
            if indeg[b] == 0:
                ready.append(b)
    if len(out) != n:
        raise RuntimeError("condensation graph is not acyclic")
    return out


def closure_trans_refl(r):
    """Smallest reflexive, transitive relation containing ``r``."""
    scc = scc_condense(r)
    members = [_mask(c) for c in scc.classes]
    down = [0] * r.n
    for k, cls in enumerate(scc.classes):
        m = 0
        for j in _bits(scc.order.down[k]):
            m |= members[j]
        for a in cls:
            down[a] = m
    return PreOrder(r.n, down)


def principal_sets(p, a):
    """``(down, up)`` principal sets of ``a``."""
    if not 0 <= a < p.n:
        raise IndexError(a)
    return p.down_set(a), p.up_set(a)


def is_convex(p, s):
    """True iff ``a, c in s`` and ``a <= b <= c`` imply ``b in s``."""
    m = _mask(s)
    if any(not 0 <= a < p.n for a in s):
        raise IndexError("element outside ground set")
    above = 0
    below = 0
    for a in s:
        above |= p.up[a]
        below |= p.down[a]
    return (above & below) & ~m == 0


def down_sets(p):
    """All down-sets of ``p`` as frozensets, sorted by (size, members)."""
    if p.n > MAX_DOWNSET_ELEMENTS:
        raise ValueError(f"down_sets limited to {MAX_DOWNSET_ELEMENTS} elements, got {p.n}")
    order = p.linear_extension()
    found = []

    def grow(i, current):
        if i == len(order):
            found.append(current)
            return
        a = order[i]
        grow(i + 1, current)
        # a may join only if everything strictly below it is already present
        if p.down[a] & ~(1 << a) & ~current == 0:
            grow(i + 1, current | (1 << a))

    grow(0, 0)
    sets = [frozenset(_bits(m)) for m in found]
    return sorted(sets, key=lambda s: (len(s), sorted(s)))


def down_set_lattice_masks(p):
    return [_mask(s) for s in down_sets(p)]


def join_irreducibles(lattice):
    """Birkhoff dual of a finite distributive lattice of sets.

    ``lattice`` is a collection of sets closed under union and intersection
    containing the empty set.  Returns the poset of join-irreducible members
    (those with exactly one lower cover) ordered by inclusion; ``labels``
    holds the corresponding sets.
    """
    elems = sorted({frozenset(s) for s in lattice}, key=lambda s: (len(s), sorted(s)))
    if not elems:
        raise ValueError("empty lattice")
    index = set(elems)
    if frozenset() not in index:
        raise ValueError("lattice of sets must contain the empty set")
    top = frozenset().union(*elems)
    if top not in index:
        raise ValueError("lattice of sets must contain its top (union of all members)")
    for a, b in combinations(elems, 2):
        if a | b not in index or a & b not in index:
            raise ValueError(f"not closed under union/intersection: {sorted(a)}, {sorted(b)}")
    irreducible = []
    for s in elems:
        below = [t for t in elems if t < s]
        covers = [t for t in below if not any(t < u for u in below)]
        if len(covers) == 1:
            irreducible.append(s)
    down = []
    for s in irreducible:
        down.append(_mask(i for i, t in enumerate(irreducible) if t <= s))
    return Poset(len(irreducible), down, labels=irreducible)


def poset_from_leq(n, leq):
    """Poset from a predicate ``leq(a, b)``; used by tests and small examples."""
    down = [_mask(a for a in range(n) if leq(a, b)) for b in range(n)]
    return Poset(n, down)

"""Lap filtration, spectral sequence, Morse relations and phase diagrams.

Polynomials in λ (lap) and μ (dimension) are :class:`Poly` objects, mappings
``(p, q) -> coefficient``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import InvariantError
from .order import Poset, _bits

_SUP = str.maketrans("0123456789", "⁰¹²³⁴⁵⁶⁷⁸⁹")


class Poly(dict):
    """Polynomial in λ, μ with nonnegative integer coefficients."""

    def __init__(self, terms=()):
        super().__init__()
        items = terms.items() if isinstance(terms, dict) else terms
        for k, v in items:
            if v:
                self[tuple(k)] = self.get(tuple(k), 0) + int(v)
        for k in [k for k, v in self.items() if v == 0]:
            del self[k]

    @classmethod
    def mono(cls, p, q, c=1):
        return cls({(p, q): c})

    def __add__(self, other):
        out = dict(self)
        for k, v in other.items():
            out[k] = out.get(k, 0) + v
        return Poly(out)

    def __mul__(self, other):
        out = {}
        for (p1, q1), a in self.items():
            for (p2, q2), b in other.items():
                k = (p1 + p2, q1 + q2)
                out[k] = out.get(k, 0) + a * b
        return Poly(out)

    def __eq__(self, other):
        return dict(self) == dict(Poly(other) if not isinstance(other, Poly) else other)

    def __hash__(self):
        return hash(tuple(sorted(self.items())))

    def key(self):
        return tuple(sorted(self.items()))

    def __str__(self):
        if not self:
            return "0"
        parts = []
        for (p, q), c in sorted(self.items()):
            coef = "" if c == 1 else str(c)
            parts.append(f"{coef}λ{str(p).translate(_SUP)}μ{str(q).translate(_SUP)}")
        return "+".join(parts)

    __repr__ = __str__

    def to_json(self):
        return {f"{p},{q}": c for (p, q), c in sorted(self.items())}

    @classmethod
    def from_json(cls, obj):
        return cls({tuple(int(t) for t in k.split(",")): v for k, v in obj.items()})


def _lap_of(cc, scd):
    return np.asarray(scd.lap)[cc.grade]


# ---------------------------------------------------------------- blocks


@dataclass
class ParabolicModule:
    """Generators labelled by (p, q) and the lap-drop blocks of the differential.

    ``gens[(p, q)]`` lists generator indices of the Conley complex; ``blocks``
    maps ``(r, p, q)`` to the 0/1 matrix from ``gens[(p, q)]`` (columns) to
    ``gens[(p - r, q - 1)]`` (rows), for nonzero blocks only.
    """
    gens: dict
    blocks: dict

    def block(self, r, p, q):
        if (r, p, q) in self.blocks:
            return self.blocks[(r, p, q)]
        rows = self.gens.get((p - r, q - 1), [])
        cols = self.gens.get((p, q), [])
        return [[0] * len(cols) for _ in rows]


def bigraded_blocks(cc, scd):
    lap = _lap_of(cc, scd)
    gens = {}
    for g in sorted(range(cc.n), key=lambda g: (int(cc.grade[g]), g)):
        gens.setdefault((int(lap[g]), int(cc.dim[g])), []).append(g)
    entries = set(cc.pairs())
    blocks = {}
    for row, col in entries:
        r = int(lap[col] - lap[row])
        if r < 1:
            raise InvariantError(f"differential entry ({row}, {col}) does not lower the lap number")
        blocks.setdefault((r, int(lap[col]), int(cc.dim[col])), None)
    for (r, p, q) in blocks:
        rows = gens[(p - r, q - 1)]
        cols = gens[(p, q)]
        blocks[(r, p, q)] = [[1 if (a, b) in entries else 0 for b in cols] for a in rows]
    return ParabolicModule(gens, dict(sorted(blocks.items())))


def dimension_blocks(cc):
    """``{q: (rows, cols, matrix)}`` for the differential from dimension q to q-1.

    Generators are ordered by (class, index).
    """
    entries = set(cc.pairs())
    order = sorted(range(cc.n), key=lambda g: (int(cc.grade[g]), g))
    by_dim = {}
    for g in order:
        by_dim.setdefault(int(cc.dim[g]), []).append(g)
    out = {}
    for q in sorted(by_dim):
        if q == 0:
            continue
        rows, cols = by_dim.get(q - 1, []), by_dim[q]
        out[q] = (rows, cols, [[1 if (a, b) in entries else 0 for b in cols] for a in rows])
    return out


# -------------------------------------------------------- GF(2) subspaces


def _reduce(v, basis):
    while v:
        h = v.bit_length() - 1
        b = basis.get(h)
        if b is None:
            return v
        v ^= b
    return 0


def _span(vectors):
    basis = {}
    for v in vectors:
        v = _reduce(v, basis)
        if v:
            basis[v.bit_length() - 1] = v
    return basis


def _kernel(domain, f):
    """Basis of ``{x in span(domain) : f(x) = 0}`` for linear ``f``."""
    pivots = {}  # leading bit of image -> (image, preimage)
    out = []
    for v in domain:
        img, pre = f(v), v
        while img:
            h = img.bit_length() - 1
            if h not in pivots:
                pivots[h] = (img, pre)
                break
            i2, p2 = pivots[h]
            img ^= i2
            pre ^= p2
        if not img and pre:
            out.append(pre)
    return list(_span(out).values())


@dataclass
class SpectralSequence:
    """Ranks of the pages of the lap-filtration spectral sequence.

    ``e[r][(p, q)]`` is the rank of E^r_{p,q}; ``d[r][(p, q)]`` the rank of
    d^r: E^r_{p,q} -> E^r_{p-r,q-1}; ``infinity`` the limit page.
    """
    e: dict
    d: dict
    infinity: dict
    last_page: int

    def poincare(self):
        return Poly(self.infinity)

    def q_poly(self, r):
        """Q^r = Σ rank(d^r_{p+r,q+1}) λ^p μ^q."""
        return Poly({(p - r, q - 1): k for (p, q), k in self.d.get(r, {}).items() if k})


def _restricted(cc, scd, conv):
    sel = np.zeros(len(scd.lap), dtype=bool)
    sel[list(conv)] = True
    gens = [g for g in range(cc.n) if sel[cc.grade[g]]]
    pos = {g: i for i, g in enumerate(gens)}
    lap = [int(scd.lap[cc.grade[g]]) for g in gens]
    dim = [int(cc.dim[g]) for g in gens]
    bnd = []
    for g in gens:
        v = 0
        for r in cc.column(g).tolist():
            i = pos.get(int(r))
            if i is not None:
                v |= 1 << i
        bnd.append(v)
    return lap, dim, bnd


def spectral_sequence(cc, scd, conv=None):
    """Pages E^r (r >= 1) of the spectral sequence of the lap filtration on ``conv``."""
    conv = range(len(scd.lap)) if conv is None else conv
    conv = sorted(set(int(a) for a in conv))
    from .algebra import _convex_leq
    if not _convex_leq(scd.leq, set(conv)):
        raise ValueError(f"{conv} is not convex")
    lap, dim, bnd = _restricted(cc, scd, conv)
    n = len(lap)

    def d(v):
        out = 0
        for i in _bits(v):
            out ^= bnd[i]
        return out

    if n == 0:
        return SpectralSequence({1: {}}, {}, {}, 1)
    pmin, pmax = min(lap), max(lap)
    qs = sorted(set(dim))
    span_r = pmax - pmin + 1
    f_mask = {}  # generators of F_p C_q
    for p in range(pmin - 1 - span_r, pmax + span_r + 2):
        for q in range(min(qs) - 1, max(qs) + 2):
            f_mask[(p, q)] = [1 << i for i in range(n) if lap[i] <= p and dim[i] == q]

    def above(p):
        m = 0
        for i in range(n):
            if lap[i] > p:
                m |= 1 << i
        return m

    zc = {}

    def z(r, p, q):
        # Z^r_{p,q}: elements of F_p C_q whose boundary lies in F_{p-r}
        key = (r, p, q)
        if key not in zc:
            dom = f_mask.get((p, q), [])
            if r <= 0:
                zc[key] = dom
            else:
                hi = above(p - r)
                zc[key] = _kernel(dom, lambda v: d(v) & hi)
        return zc[key]

    def denom(r, p, q):
        return list(z(r - 1, p - 1, q)) + [d(v) for v in z(r - 1, p + r - 1, q + 1)]

    def e_rank(r, p, q):
        bden = _span(denom(r, p, q))
        num = _span(list(bden.values()) + list(z(r, p, q)))
        return len(num) - len(bden)

    def d_rank(r, p, q):
        tgt_den = _span(denom(r, p - r, q - 1))
        img = _span(list(tgt_den.values()) + [d(v) for v in z(r, p, q)])
        return len(img) - len(tgt_den)

    cells = sorted({(l, q) for l, q in zip(lap, dim)})
    e, dr = {}, {}
    r = 1
    while True:
        e[r] = {k: v for k in cells if (v := e_rank(r, *k))}
        dr[r] = {k: v for k in cells if (v := d_rank(r, *k))}
        if r > span_r:
            break
        r += 1
    for r in e:
        if r + 1 in e:
            for k in cells:
                p, q = k
                lhs = e[r].get(k, 0)
                rhs = e[r + 1].get(k, 0) + dr[r].get(k, 0) + dr[r].get((p + r, q + 1), 0)
                if lhs != rhs:
                    raise InvariantError(f"page bookkeeping fails at r={r}, (p,q)={k}")
    return SpectralSequence(e, {k: v for k, v in dr.items() if v}, e[r], r)


def spectral_sequence_by_cancellation(cc, scd, conv=None):
    """E^∞ and rank d^r via cancelling differential entries in increasing lap drop.

    Used only as a cross-check of :func:`spectral_sequence`.
    """
    conv = range(len(scd.lap)) if conv is None else conv
    lap, dim, bnd = _restricted(cc, scd, sorted(set(int(a) for a in conv)))
    n = len(lap)
    cols = {j: set(_bits(bnd[j])) for j in range(n)}
    alive = set(range(n))
    ranks = {}
    changed = True
    while changed:
        changed = False
        best = None
        for j in sorted(alive):
            for i in cols[j]:
                rr = lap[j] - lap[i]
                key = (rr, lap[j], j, i)
                if best is None or key < best:
                    best = key
        if best is None:
            break
        rr, _, b, a = best
        ranks.setdefault(rr, {})
        k = (lap[b], dim[b])
        ranks[rr][k] = ranks[rr].get(k, 0) + 1
        col_b = cols[b] - {a}
        for y in list(alive):
            if a in cols[y] and y != b:
                cols[y] ^= col_b
                cols[y].discard(a)
        alive -= {a, b}
        del cols[a], cols[b]
        for y in alive:
            cols[y].discard(b)
        changed = True
    inf = {}
    for g in alive:
        inf[(lap[g], dim[g])] = inf.get((lap[g], dim[g]), 0) + 1
    return inf, ranks


# --------------------------------------------------------- Morse relations


@dataclass
class MorseRelations:
    total: Poly  # Σ_S P(S)
    homology: Poly  # P⃗ of the convex set
    q: dict  # r -> Q^r
    holds: bool

    def rhs(self):
        out = Poly(self.homology)
        for r, qr in self.q.items():
            out = out + Poly({(0, 0): 1, (r, 1): 1}) * qr
        return out


def class_polys(cc, scd):
    polys = {k: Poly() for k in range(len(scd.lap))}
    for g, q in zip(cc.grade.tolist(), cc.dim.tolist()):
        polys[g] = polys[g] + Poly.mono(int(scd.lap[g]), q)
    return polys


def morse_relations(cc, scd, conv=None, ss=None):
    conv = range(len(scd.lap)) if conv is None else conv
    conv = sorted(set(int(a) for a in conv))
    ss = ss or spectral_sequence(cc, scd, conv)
    polys = class_polys(cc, scd)
    total = Poly()
    for k in conv:
        total = total + polys[k]
    q = {r: ss.q_poly(r) for r in sorted(ss.d) if ss.q_poly(r)}
    rel = MorseRelations(total, ss.poincare(), q, False)
    rel.holds = rel.rhs() == total
    if not rel.holds:
        raise InvariantError(f"Morse relation fails: {total} != {rel.rhs()}")
    return rel


# ------------------------------------------------------------ phase diagrams


@dataclass
class PhaseDiagram:
    """A poset of classes annotated with Poincaré polynomials.

    ``nodes`` are class ids; ``order`` is the poset on positions in ``nodes``.
    """
    nodes: list
    lap: dict
    polys: dict
    order: Poset
    reduced: "PhaseDiagram" = field(default=None, repr=False)

    @property
    def edges(self):
        """Hasse covers as ``(upper, lower)`` class ids, i.e. arrows of the flow."""
        return sorted((self.nodes[b], self.nodes[a]) for a, b in self.order.hasse)

    def successors(self, node):
        return sorted(lo for up, lo in self.edges if up == node)

    def total(self):
        out = Poly()
        for k in self.nodes:
            out = out + self.polys[k]
        return out

    def to_dict(self):
        return {
            "nodes": [{"id": k, "lap": self.lap[k], "poincare": self.polys[k].to_json()} for k in self.nodes],
            "edges": [list(e) for e in self.edges],
        }

    @classmethod
    def from_dict(cls, obj):
        nodes = [int(n["id"]) for n in obj["nodes"]]
        pos = {k: i for i, k in enumerate(nodes)}
        lap = {int(n["id"]): int(n["lap"]) for n in obj["nodes"]}
        polys = {int(n["id"]): Poly.from_json(n["poincare"]) for n in obj["nodes"]}
        covers = [(pos[lo], pos[up]) for up, lo in obj["edges"]]
        return cls(nodes, lap, polys, Poset.from_covers(len(nodes), covers))


def phase_diagram(scd, polys):
    k = len(scd.lap)
    full = PhaseDiagram(list(range(k)), {i: int(scd.lap[i]) for i in range(k)},
                        {i: Poly(polys.get(i, {})) for i in range(k)}, scd.order)
    keep = [i for i in range(k) if full.polys[i]]
    sub = scd.order.induced(keep)
    full.reduced = PhaseDiagram(keep, {i: full.lap[i] for i in keep}, {i: full.polys[i] for i in keep}, sub)
    return full


def diagram_isomorphic(a, b):
    return find_isomorphism(a, b) is not None


def find_isomorphism(a, b):
    """Annotation- and order-preserving bijection ``a.nodes -> b.nodes``, or None."""
    n = len(a.nodes)
    if n != len(b.nodes):
        return None
    pa, pb = a.order, b.order

    def sig(d, p, i):
        return (d.polys[d.nodes[i]].key(), bin(p.down[i]).count("1"), bin(p.up[i]).count("1"))

    sa = [sig(a, pa, i) for i in range(n)]
    sb = [sig(b, pb, i) for i in range(n)]
    if sorted(sa) != sorted(sb):
        return None
    order = sorted(range(n), key=lambda i: (sum(1 for s in sb if s == sa[i]), i))
    image = [-1] * n
    used = [False] * n

    def ok(i, j):
        for i2 in range(n):
            j2 = image[i2]
            if j2 < 0:
                continue
            if pa.leq(i, i2) != pb.leq(j, j2) or pa.leq(i2, i) != pb.leq(j2, j):
                return False
        return True

    def go(t):
        if t == n:
            return True
        i = order[t]
        for j in range(n):
            if not used[j] and sb[j] == sa[i] and ok(i, j):
                image[i], used[j] = j, True
                if go(t + 1):
                    return True
                image[i], used[j] = -1, False
        return False

    if not go(0):
        return None
    return {a.nodes[i]: b.nodes[image[i]] for i in range(n)}


def to_dot(diagram, name="phase"):
    lines = [f"digraph {name} {{", "  rankdir=BT;", "  node [shape=box];"]
    by_lap = {}
    for k in diagram.nodes:
        lines.append(f'  S{k} [label="S{k} : {diagram.polys[k]}"];')
        by_lap.setdefault(diagram.lap[k], []).append(k)
    for lap in sorted(by_lap):
        lines.append("  { rank=same; " + " ".join(f"S{k};" for k in by_lap[lap]) + " }")
    for up, lo in diagram.edges:
        lines.append(f"  S{up} -> S{lo};")
    lines.append("}")
    return "\n".join(lines) + "\n"

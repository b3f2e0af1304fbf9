"""Normal-form discretized braid diagrams.

A diagram on ``m`` strands with period ``d`` is an ``m x (d+1)`` integer
matrix of anchor points.  Strand ``alpha`` starts at height ``alpha``; strand 0
and strand ``m-1`` are the constant boundary strands.  Every column is a
permutation of ``0..m-1`` and the last column is the first one relabelled by
the closing permutation ``theta``.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from fractions import Fraction

import numpy as np


class BraidValidationError(ValueError):
    """Raised when a diagram fails validation; ``issues`` lists the reasons."""

    def __init__(self, issues):
        self.issues = list(issues)
        super().__init__("; ".join(f"{i.kind}: {i.message}" for i in self.issues))


@dataclass(frozen=True)
class BraidIssue:
    kind: str  # shape, non-permutation, periodicity, tangency, boundary, labeling, improper
    message: str


class BraidDiagram:
    """Anchor matrix of a closed discretized braid (immutable)."""

    def __init__(self, anchors):
        a = np.array(anchors, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] < 3 or a.shape[1] < 2:
            raise BraidValidationError([BraidIssue(
                "shape", f"anchors must be an m x (d+1) matrix with m >= 3, d >= 1; got shape {a.shape}")])
        a.setflags(write=False)
        self.anchors = a
        self.m = a.shape[0]
        self.d = a.shape[1] - 1

    @classmethod
    def from_inner(cls, inner):
        """Diagram from the inner strands only; boundary strands are added."""
        inner = [list(s) for s in inner]
        top = len(inner) + 1
        width = len(inner[0])
        return cls([[0] * width] + inner + [[top] * width])

    @property
    def inner(self):
        return self.anchors[1:-1]

    def __eq__(self, other):
        return isinstance(other, BraidDiagram) and np.array_equal(self.anchors, other.anchors)

    def __hash__(self):
        return hash(self.anchors.tobytes())

    def __repr__(self):
        return f"BraidDiagram(m={self.m}, d={self.d})"

    def to_dict(self):
        return {"m": self.m, "d": self.d, "anchors": self.anchors.tolist()}

    @classmethod
    def from_dict(cls, obj, check=True):
        try:
            m, d, anchors = int(obj["m"]), int(obj["d"]), obj["anchors"]
        except (KeyError, TypeError, ValueError) as exc:
            raise BraidValidationError([BraidIssue("shape", f"malformed braid record: {exc!r}")])
        b = cls(anchors)
        if (b.m, b.d) != (m, d):
            raise BraidValidationError([BraidIssue(
                "shape", f"declared m={m}, d={d} but anchors have shape {b.anchors.shape}")])
        if check:
            issues = validate(b)
            if issues:
                raise BraidValidationError(issues)
        return b


def load_braid(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise BraidValidationError([BraidIssue("shape", f"{path}: invalid JSON ({exc})")])
    return BraidDiagram.from_dict(obj)


def dump_braid(b, path=None):
    text = json.dumps(b.to_dict(), sort_keys=True) + "\n"
    if path is not None:
        with open(path, "w") as fh:
            fh.write(text)
    return text


def _is_perm(col, m):
    return sorted(col) == list(range(m))


def theta(b):
    """Closing permutation and its cycles.

    Returns ``(perm, cycles)`` where ``perm[alpha]`` is the strand that
    continues ``alpha`` after one period, and each cycle starts at its
    smallest member.
    """
    last = b.anchors[:, b.d].tolist()
    if sorted(last) != sorted(b.anchors[:, 0].tolist()) or not _is_perm(last, b.m):
        raise BraidValidationError([BraidIssue(
            "periodicity", "last column is not a relabelling of the first column")])
    start = {h: a for a, h in enumerate(b.anchors[:, 0].tolist())}
    perm = [start[h] for h in last]
    seen = set()
    cycles = []
    for a in range(b.m):
        if a in seen:
            continue
        cyc = [a]
        seen.add(a)
        nxt = perm[a]
        while nxt != a:
            cyc.append(nxt)
            seen.add(nxt)
            nxt = perm[nxt]
        cycles.append(tuple(cyc))
    return perm, cycles


def validate(b):
    """List of :class:`BraidIssue`; empty means the diagram is valid and proper."""
    issues = []
    m, d, y = b.m, b.d, b.anchors
    if y.min() < 0 or y.max() > m - 1:
        issues.append(BraidIssue("shape", f"anchor values must lie in 0..{m - 1}"))
        return issues
    if y[:, 0].tolist() != list(range(m)):
        issues.append(BraidIssue("labeling", "strand alpha must start at height alpha"))
    for i in range(d):
        if not _is_perm(y[:, i].tolist(), m):
            issues.append(BraidIssue("non-permutation", f"column {i} is not a permutation of 0..{m - 1}"))
    perm = None
    try:
        perm, cycles = theta(b)
    except BraidValidationError as exc:
        issues.extend(exc.issues)
    else:
        for a in range(m):
            if y[a, d] != y[perm[a], 0]:
                issues.append(BraidIssue("periodicity", f"strand {a} does not close up onto strand {perm[a]}"))
    if perm is not None:
        issues.extend(_tangencies(y, perm))
    if not (np.all(y[0] == 0) and np.all(y[m - 1] == m - 1)):
        issues.append(BraidIssue("boundary", f"strands 0 and {m - 1} must be constant at 0 and {m - 1}"))
    inner = y[1:m - 1]
    if inner.size and (inner.min() <= 0 or inner.max() >= m - 1):
        issues.append(BraidIssue("boundary", f"inner strands must stay strictly between 0 and {m - 1}"))
    if perm is not None and not issues:
        fixed = [a for a in range(1, m - 1) if perm[a] == a]
        if fixed:
            issues.append(BraidIssue("improper", f"inner strands {fixed} close up onto themselves"))
    return issues


def _tangencies(y, perm):
    m, d = y.shape[0], y.shape[1] - 1
    inv = [0] * m
    for a, p in enumerate(perm):
        inv[p] = a

    def value(a, i):
        # anchors continued periodically through the closing permutation
        if i < 0:
            return y[inv[a], d + i]
        if i > d:
            return y[perm[a], i - d]
        return y[a, i]

    out = []
    for i in range(d):
        col = y[:, i]
        for a in range(m):
            for a2 in range(a + 1, m):
                if col[a] != col[a2]:
                    continue
                before = value(a, i - 1) - value(a2, i - 1)
                after = value(a, i + 1) - value(a2, i + 1)
                if before * after >= 0:
                    out.append(BraidIssue("tangency", f"strands {a} and {a2} touch at anchor {i} without crossing"))
    return out


def check(b):
    issues = validate(b)
    if issues:
        raise BraidValidationError(issues)
    return b


def word_to_diagram(word, n_inner):
    """Diagram with one generator per step.

    Letter ``k`` swaps the inner strands currently at heights ``k`` and
    ``k+1``.  Raises if the word is empty, a letter is out of range, or the
    closed braid has an inner strand that closes onto itself.
    """
    word = [int(k) for k in word]
    if not word:
        raise BraidValidationError([BraidIssue("shape", "empty word")])
    if n_inner < 2:
        raise BraidValidationError([BraidIssue("shape", "need at least two inner strands")])
    bad = [k for k in word if not 1 <= k <= n_inner - 1]
    if bad:
        raise BraidValidationError([BraidIssue("shape", f"letters {bad} outside 1..{n_inner - 1}")])
    m = n_inner + 2
    height = list(range(m))  # height of each strand
    at = list(range(m))  # strand at each height
    cols = [list(height)]
    for k in word:
        lo, hi = at[k], at[k + 1]
        height[lo], height[hi] = k + 1, k
        at[k], at[k + 1] = hi, lo
        cols.append(list(height))
    b = BraidDiagram(np.array(cols).T)
    return check(b)


def diagram_to_word(b):
    """Positive word read off the crossings, step by step."""
    y = b.anchors.tolist()
    word = []
    for i in range(b.d):
        found = []
        for a in range(b.m):
            for a2 in range(a + 1, b.m):
                if (y[a][i] - y[a2][i]) * (y[a][i + 1] - y[a2][i + 1]) < 0:
                    slope = (y[a][i + 1] - y[a][i]) - (y[a2][i + 1] - y[a2][i])
                    t = Fraction(y[a2][i] - y[a][i], slope)
                    h = y[a][i] + t * (y[a][i + 1] - y[a][i])
                    found.append((t, min(y[a][i], y[a2][i]), h, a, a2))
        found.sort()
        for j in range(1, len(found)):
            if found[j][0] == found[j - 1][0] and found[j][2] == found[j - 1][2]:
                raise BraidValidationError([BraidIssue(
                    "tangency", f"crossings coincide at step {i}, parameter {found[j][0]}")])
        for t, _, h, a, a2 in found:
            below = sum(1 for s in range(b.m)
                        if y[s][i] + t * (y[s][i + 1] - y[s][i]) < h)
            word.append(below)
    if not word:
        raise BraidValidationError([BraidIssue("shape", "diagram has no crossings; empty word")])
    return word


def extend(b):
    """Append one constant step to every strand."""
    a = np.concatenate([b.anchors, b.anchors[:, -1:]], axis=1)
    return BraidDiagram(a)


def intersection_number(x, b):
    """Number of crossings of the free strand ``x`` with the diagram."""
    x = np.asarray(x, dtype=float)
    if x.shape != (b.d,):
        raise ValueError(f"free strand must have length {b.d}")
    if np.any(x == np.round(x)):
        raise ValueError("free strand must avoid integer heights")
    xc = np.append(x, x[0])
    diff = xc[None, :] - b.anchors
    return int(np.count_nonzero(diff[:, :-1] * diff[:, 1:] < 0))


def format_word(word):
    return " ".join(f"s{k}" for k in word)


def parse_word(text):
    letters = []
    for tok in text.replace(",", " ").split():
        t = tok.lower()
        if not (t.startswith("s") and t[1:].isdigit()) or int(t[1:]) < 1:
            raise BraidValidationError([BraidIssue("shape", f"bad generator token {tok!r}")])
        letters.append(int(t[1:]))
    return letters

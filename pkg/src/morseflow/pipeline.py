"""End-to-end analysis of a skeleton and its JSON report."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

from .algebra import betti_bm, connection_matrix, graded_complex
from .braid import diagram_to_word, dump_braid, format_word, theta, BraidValidationError
from .dynamics import analyze_dynamics
from .grading import (bigraded_blocks, class_polys, morse_relations, phase_diagram,
                      spectral_sequence)
from .order import _bits


@dataclass
class Result:
    dynamics: object
    graded: object
    conley: object
    spectral: object
    relations: object
    diagram: object
    module: object

    @property
    def scd(self):
        return self.dynamics.scd

    @property
    def reduced(self):
        return self.diagram.reduced

    def total(self):
        return self.diagram.total()


def analyze(b, cell_budget=None, keep_chain_maps=False):
    """Skeleton -> SC poset -> Conley complex -> parabolic homology -> phase diagrams."""
    dyn = analyze_dynamics(b, cell_budget)
    gc = graded_complex(dyn.complex, dyn.scd)
    cc = connection_matrix(gc, keep_chain_maps=keep_chain_maps)
    ss = spectral_sequence(cc, dyn.scd)
    mr = morse_relations(cc, dyn.scd, ss=ss)
    pd = phase_diagram(dyn.scd, class_polys(cc, dyn.scd))
    pm = bigraded_blocks(cc, dyn.scd)
    return Result(dyn, gc, cc, ss, mr, pd, pm)


def _pq_table(table):
    return [{"p": p, "q": q, "rank": v} for (p, q), v in sorted(table.items())]


def report(res):
    """JSON-ready dictionary; contents depend only on the input skeleton."""
    dyn = res.dynamics
    b = dyn.braid
    scd = dyn.scd
    canon = dump_braid(b)
    try:
        word = format_word(diagram_to_word(b))
    except BraidValidationError:
        word = ""
    hasse_down = {k: [] for k in range(len(scd))}
    for a, c in scd.order.hasse:
        hasse_down[c].append(a)
    classes = []
    for k, members in enumerate(scd.sc.classes):
        classes.append({
            "id": k,
            "lap": int(scd.lap[k]),
            "lambda": int(scd.lambda_class[k]),
            "top_cells": [int(t) for t in members],
            "hasse_successors": sorted(hasse_down[k]),
        })
    red = res.reduced
    diagram = red.to_dict()
    diagram["differential_blocks"] = [
        {"r": r, "p": p, "q": q, "matrix": m} for (r, p, q), m in res.module.blocks.items()]
    perm, cycles = theta(b)
    return {
        "input": {"sha256": hashlib.sha256(canon.encode()).hexdigest(), "m": b.m, "d": b.d,
                  "theta_cycles": [list(c) for c in cycles], "word": word},
        "sc": {"count": len(scd), "classes": classes},
        "betti": [{"class": g, "q": q, "rank": v} for (g, q), v in sorted(betti_bm(res.conley).items())],
        "conley_complex": res.conley.to_dict(),
        "spectral_sequence": {
            "E1": _pq_table(res.spectral.e[1]),
            "d": [{"r": r, "p": p, "q": q, "rank": v}
                  for r, t in sorted(res.spectral.d.items()) for (p, q), v in sorted(t.items())],
            "E_infinity": _pq_table(res.spectral.infinity),
        },
        "morse_relations": {
            "total": str(res.relations.total),
            "homology": str(res.relations.homology),
            "Q": {str(r): str(q) for r, q in sorted(res.relations.q.items())},
            "holds": res.relations.holds,
        },
        "total_poincare": str(res.total()),
        "phase_diagram": diagram,
        "full_phase_diagram": res.diagram.to_dict(),
    }


def report_json(res):
    return json.dumps(report(res), sort_keys=True, ensure_ascii=False, indent=1) + "\n"

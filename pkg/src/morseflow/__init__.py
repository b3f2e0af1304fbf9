"""Morse pre-orders, connection matrices and parabolic homology of discretized braids."""

from .braid import (BraidDiagram, BraidValidationError, diagram_to_word, extend,
                    intersection_number, load_braid, theta, validate, word_to_diagram)
from .complex import build_complex
from .dynamics import analyze_dynamics
from .pipeline import analyze, report

__version__ = "0.1.0"

__all__ = [
    "BraidDiagram", "BraidValidationError", "analyze", "analyze_dynamics", "build_complex",
    "diagram_to_word", "extend", "intersection_number", "load_braid", "report", "theta",
    "validate", "word_to_diagram",
]

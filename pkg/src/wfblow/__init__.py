"""Stratified geometry, pathwise extensions and blow-up transforms for the
degenerate Wright-Fisher backward equation, with numerical verification."""

from .algebra import RationalFunction, StratifiedFunction, const, parse, var
from .blowup import BlowupChain, make_chain, make_chart, map_face, transform_solution
from .extension import BaseSolution, catalog, extend_along_path, superpose
from .geometry import OrderedPath, Stratum, cube_face, enumerate_faces, simplex_face
from .operators import (
    apply_operator, restrict_operator, simplex_operator, symmetric_operator, transformed_operator,
)

__version__ = "0.1.0"

__all__ = [
    "BaseSolution", "BlowupChain", "OrderedPath", "RationalFunction", "StratifiedFunction",
    "Stratum", "apply_operator", "catalog", "const", "cube_face", "enumerate_faces",
    "extend_along_path", "make_chain", "make_chart", "map_face", "parse", "restrict_operator",
    "simplex_face", "simplex_operator", "superpose", "symmetric_operator", "transform_solution",
    "transformed_operator", "var",
]

import math
import typing

import numpy as np
import parsimonious

from .rainskit import DimSpec, InputDecodeError

common = """
    number = ~r"[+-]?(?:\\d+(?:\\.\\d*)?|\\.\\d+)(?:[eE][+-]?\\d+)?"
    integer = ~r"[0-9]+"
    ws = ~r"\\s+"
    """

dims_grammar = parsimonious.Grammar(
    """
    dims = ws* factors (ws* "|" ws* factors)? ws*
        factors = factor (ws* ~r"[x×*]" ws* factor)*
            factor = ~r"[1-9][0-9]*"
    """ + common
)

grid_grammar = parsimonious.Grammar(
    """
    grid = ws* (linspace / span / values) ws*
        linspace = "linspace" ws* "(" ws* number ws* "," ws* number ws* "," ws* integer ws* ")"
        span = number ws* ":" ws* number ws* ":" ws* number
        values = number (ws* "," ws* number)*
    """ + common
)

class Factors(tuple):
    pass

class Grid(tuple):
    pass

class DimsAndCut(typing.NamedTuple):
    dims: DimSpec
    cut: tuple[int, ...]

def _collect(children, kind: type | tuple[type, ...]) -> typing.Iterator:
    """Depth-first values of type `kind` among visited children, lists flattened."""
    for child in children:
        if isinstance(child, kind):
            yield child
        elif isinstance(child, list):
            yield from _collect(child, kind)

class DimsReader(parsimonious.NodeVisitor):
    """
    `2x2x2` or `2x2|2`. Factors after the bar form the B side of the cut; without a
    bar the last factor does.
    """
    grammar = dims_grammar
    unwrapped_exceptions: tuple[type[BaseException], ...] = (ValueError,)

    def parse(self, text: str):
        try:
            return super().parse(text.strip())
        except parsimonious.exceptions.ParseError as e:
            raise InputDecodeError(f"{type(self).__name__[:-6].lower()} spec " + str(e)) from e
    read = parse

    def visit_dims(self, node, visited_children) -> DimsAndCut:
        groups = list(_collect(visited_children, Factors))
        factors = tuple(f for group in groups for f in group)
        if len(groups) == 1:
            cut = (len(factors) - 1,)
        else:
            cut = tuple(range(len(groups[0]), len(factors)))
        return DimsAndCut(DimSpec(factors), cut)

    def visit_factors(self, node, visited_children) -> Factors:
        return Factors(_collect(visited_children, int))

    def visit_factor(self, node, _) -> int:
        return int(node.text)

    def visit_number(self, node, _) -> float:
        return float(node.text)

    def visit_integer(self, node, _) -> int:
        return int(node.text)

    def generic_visit(self, node, visited_children):
        if node.expr_name == 'ws':
            return None
        return visited_children or node

class GridReader(DimsReader):
    """`0,0.5,1`, `start:stop:step` (stop included) or `linspace(start,stop,count)`."""
    grammar = grid_grammar

    def visit_grid(self, node, visited_children) -> list[float]:
        return list(next(_collect(visited_children, Grid)))

    def visit_linspace(self, node, visited_children) -> Grid:
        start, stop = _collect(visited_children, float)
        count = next(_collect(visited_children, int))
        if count < 1:
            raise InputDecodeError(f"linspace needs at least one point, got {count}")
        return Grid(float(x) for x in np.linspace(start, stop, count))

    def visit_span(self, node, visited_children) -> Grid:
        start, stop, step = _collect(visited_children, float)
        if step == 0 or (stop - start) * step < 0:
            raise InputDecodeError(f"range {node.text!r} never reaches its stop")
        count = math.floor((stop - start) / step + 1e-12) + 1
        return Grid(start + i * step for i in range(count))

    def visit_values(self, node, visited_children) -> Grid:
        return Grid(_collect(visited_children, float))

def read_dims(text: str) -> DimsAndCut:
    return DimsReader().parse(text)

def read_grid(text: str) -> list[float]:
    return GridReader().parse(text)

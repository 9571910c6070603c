"""Exception types shared across the simulators."""
from __future__ import annotations


class ColorsimError(Exception):
    """Base class for all package errors."""


class InvalidInstance(ColorsimError):
    """Raised when a graph or palette violates a structural invariant."""


class ParseError(ColorsimError):
    pass


class CapExceeded(ColorsimError):
    pass


class Unsatisfiable(ColorsimError):
    pass


class GreedyFailure(ColorsimError):
    """A vertex ran out of palette colors during greedy coloring."""

    def __init__(self, vertex: int):
        super().__init__(f"vertex {vertex} exhausted its palette")
        self.vertex = vertex


class ParameterError(ColorsimError):
    pass


class DegreeTooLow(ColorsimError):
    pass


class InfeasibleSpec(ColorsimError):
    pass


class OverloadedVertex(ColorsimError):
    def __init__(self, vertex: int, direction: str, words: int, cap: int):
        super().__init__(f"vertex {vertex} {direction} {words} words, cap {cap}")
        self.vertex = vertex
        self.direction = direction
        self.words = words
        self.cap = cap


class MemoryExceeded(ColorsimError):
    def __init__(self, machine: int, round_index: int, words: int, cap: int):
        super().__init__(f"machine {machine} holds {words} words in round {round_index}, cap {cap}")
        self.machine = machine
        self.round_index = round_index
        self.words = words
        self.cap = cap


class UnresolvedVertices(ColorsimError):
    def __init__(self, unresolved, outputs=None):
        super().__init__(f"{len(unresolved)} vertices unresolved")
        self.unresolved = set(unresolved)
        self.outputs = outputs


class QueryBudgetExceeded(ColorsimError):
    def __init__(self, vertex: int, used: int, cap: int):
        super().__init__(f"query for vertex {vertex} used {used} probes, cap {cap}")
        self.vertex = vertex
        self.used = used
        self.cap = cap


class ConfigError(ColorsimError):
    pass


PaletteExhausted = GreedyFailure

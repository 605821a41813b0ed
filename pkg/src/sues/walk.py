"""Offset-based exploration walks.

A symbol ``t`` applied at a vertex entered through port ``s`` leaves through
port ``(s + t) mod d``.  The walker therefore only ever needs its last entry
port, which :class:`~sues.graphs.DirectedPortEdge` carries.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from .graphs import DirectedPortEdge, GraphError, LabeledGraph, Verdict


class SequenceError(ValueError):
    pass


class ExplorationSequence:
    """An immutable word over ``{0..d-1}`` backed by a ``uint8`` array."""

    __slots__ = ("d", "_a")

    def __init__(self, d: int, symbols: Iterable[int] | np.ndarray = ()):
        if not 2 <= d <= 255:
            raise SequenceError(f"alphabet size must be in 2..255, got {d}")
        a = np.array(symbols if isinstance(symbols, np.ndarray) else list(symbols), dtype=np.int64)
        if a.ndim != 1:
            raise SequenceError("symbols must be one-dimensional")
        if a.size and (a.min() < 0 or a.max() >= d):
            raise SequenceError(f"symbol out of range for d={d}")
        self.d = d
        self._a = a.astype(np.uint8)
        self._a.setflags(write=False)

    @property
    def symbols(self) -> np.ndarray:
        return self._a

    def __len__(self) -> int:
        return int(self._a.size)

    def __iter__(self) -> Iterator[int]:
        return iter(self._a.tolist())

    def __getitem__(self, key):
        if isinstance(key, slice):
            return ExplorationSequence(self.d, self._a[key])
        return int(self._a[key])

    def __add__(self, other: "ExplorationSequence") -> "ExplorationSequence":
        if not isinstance(other, ExplorationSequence):
            return NotImplemented
        if other.d != self.d:
            raise SequenceError("cannot concatenate sequences over different alphabets")
        return ExplorationSequence(self.d, np.concatenate([self._a, other._a]))

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExplorationSequence):
            return NotImplemented
        return self.d == other.d and np.array_equal(self._a, other._a)

    def __hash__(self) -> int:
        return hash((self.d, self._a.tobytes()))

    def __repr__(self) -> str:
        body = " ".join(map(str, self._a[:32].tolist()))
        more = " ..." if len(self) > 32 else ""
        return f"ExplorationSequence(d={self.d}, len={len(self)}: {body}{more})"

    def tolist(self) -> list[int]:
        return self._a.tolist()


def invert(seq: ExplorationSequence) -> ExplorationSequence:
    """Reverse the word and negate every symbol mod d."""
    a = seq.symbols[::-1].astype(np.int64)
    return ExplorationSequence(seq.d, (-a) % seq.d)


@dataclass(frozen=True)
class WalkTrace:
    edges: tuple[DirectedPortEdge, ...]

    @property
    def vertices(self) -> tuple[int, ...]:
        return (self.edges[0].tail,) + tuple(e.head for e in self.edges)

    @property
    def last(self) -> DirectedPortEdge:
        return self.edges[-1]


def step(g: LabeledGraph, e: DirectedPortEdge, symbol: int) -> DirectedPortEdge:
    w, q = g.rot[e.head][(e.entry_port + symbol) % g.d]
    return DirectedPortEdge(e.head, w, q)


def _check(g: LabeledGraph, seq: ExplorationSequence, start: DirectedPortEdge) -> None:
    if seq.d != g.d:
        raise SequenceError(f"alphabet mismatch: sequence d={seq.d}, graph d={g.d}")
    if not g.is_edge(start):
        raise GraphError(f"{start} is not an edge of the graph")


def execute(g: LabeledGraph, seq: ExplorationSequence, start: DirectedPortEdge) -> WalkTrace:
    _check(g, seq, start)
    rot, d = g.rot, g.d
    edges = [start]
    v, s = start.head, start.entry_port
    for t in seq:
        w, q = rot[v][(s + t) % d]
        edges.append(DirectedPortEdge(v, w, q))
        v, s = w, q
    return WalkTrace(tuple(edges))


def check_backtrack(g: LabeledGraph, seq: ExplorationSequence, start: DirectedPortEdge) -> Verdict:
    """Does ``0 . seq^-1 . 0`` from the final edge retrace the walk?"""
    forward = execute(g, seq, start).edges
    zero = ExplorationSequence(g.d, [0])
    back = execute(g, zero + invert(seq) + zero, forward[-1]).edges
    expected = (forward[-1],) + tuple(g.reverse(e) for e in reversed(forward)) + (forward[0],)
    if back == expected:
        return Verdict(True)
    for i, (a, b) in enumerate(zip(back, expected)):
        if a != b:
            return Verdict(False, f"reverse walk diverges at step {i}", (a.tail, i))
    return Verdict(False, "reverse walk has wrong length")


# -- file formats ------------------------------------------------------------

_SEQ_HEADER = re.compile(r"^seq\s+d=(\d+)\s+len=(\d+)\s*$")


def format_sequence(seq: ExplorationSequence, per_line: int = 64) -> str:
    items = seq.tolist()
    lines = [f"seq d={seq.d} len={len(items)}"]
    for i in range(0, len(items), per_line):
        lines.append(" ".join(map(str, items[i:i + per_line])))
    return "\n".join(lines) + "\n"


def parse_sequence(text: str) -> ExplorationSequence:
    head, _, body = text.lstrip().partition("\n")
    m = _SEQ_HEADER.match(head.strip())
    if not m:
        raise SequenceError(f"bad sequence header: {head!r}")
    d, length = int(m.group(1)), int(m.group(2))
    symbols = [int(tok) for tok in body.split()]
    if len(symbols) != length:
        raise SequenceError(f"header says len={length}, found {len(symbols)} symbols")
    return ExplorationSequence(d, symbols)


def write_sequence(path: str | Path, seq: ExplorationSequence, raw: bool = False) -> None:
    path = Path(path)
    if raw:
        path.write_bytes(seq.symbols.tobytes())
    else:
        path.write_text(format_sequence(seq))


def read_sequence(path: str | Path, d: int | None = None, raw: bool = False) -> ExplorationSequence:
    path = Path(path)
    if raw:
        if d is None:
            raise SequenceError("raw sequence files need an explicit alphabet size")
        return ExplorationSequence(d, np.frombuffer(path.read_bytes(), dtype=np.uint8))
    seq = parse_sequence(path.read_text())
    if d is not None and seq.d != d:
        raise SequenceError(f"file holds d={seq.d}, expected d={d}")
    return seq

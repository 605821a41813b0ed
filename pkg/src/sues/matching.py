"""Multi-pattern substring matching and sliding-window containment.

A window ``[a, a + L)`` contains a pattern iff some occurrence starts at or
after ``a`` and ends at or before ``a + L``.  Scanning left to right and
remembering the latest start among occurrences that have already ended
decides every window ending at the current position in O(1), so a whole
slide is one pass over the text with constant memory.
"""

from __future__ import annotations

from collections import deque
from typing import Iterable, Sequence

import numpy as np


class PatternAutomaton:
    """Aho-Corasick automaton over the alphabet ``{0..d-1}``, compiled to a full DFA."""

    def __init__(self, d: int, patterns: Sequence[Sequence[int]]):
        if not patterns or any(len(p) == 0 for p in patterns):
            raise ValueError("patterns must be non-empty")
        self.d = d
        self.patterns = [tuple(int(x) for x in p) for p in patterns]
        goto: list[list[int]] = [[-1] * d]
        outputs: list[list[int]] = [[]]
        for k, p in enumerate(self.patterns):
            s = 0
            for x in p:
                if not 0 <= x < d:
                    raise ValueError(f"pattern symbol {x} outside alphabet")
                if goto[s][x] < 0:
                    goto[s][x] = len(goto)
                    goto.append([-1] * d)
                    outputs.append([])
                s = goto[s][x]
            outputs[s].append(k)
        fail = [0] * len(goto)
        queue = deque()
        for x in range(d):
            if goto[0][x] < 0:
                goto[0][x] = 0
            else:
                queue.append(goto[0][x])
        while queue:
            s = queue.popleft()
            outputs[s] = outputs[s] + outputs[fail[s]]
            for x in range(d):
                t = goto[s][x]
                if t < 0:
                    goto[s][x] = goto[fail[s]][x]
                else:
                    fail[t] = goto[fail[s]][x] if s else 0
                    queue.append(t)
        self.delta = goto
        self.outputs = [tuple(sorted(set(o))) for o in outputs]
        # length of the shortest pattern ending in each state, 0 if none
        self.shortest = [min((len(self.patterns[k]) for k in o), default=0) for o in self.outputs]

    def find_all(self, text: Iterable[int]) -> list[tuple[int, int]]:
        """All ``(start, pattern index)`` occurrences, sorted."""
        delta, outputs = self.delta, self.outputs
        hits = []
        s = 0
        for i, x in enumerate(text):
            s = delta[s][x]
            for k in outputs[s]:
                hits.append((i + 1 - len(self.patterns[k]), k))
        return sorted(hits)


def window_failures(
    auto: PatternAutomaton, text: Iterable[int], length: int, limit: int | None = None
) -> tuple[int, list[int]]:
    """Slide a window of ``length`` over ``text``; return (windows, starts lacking every pattern).

    A text shorter than ``length`` forms a single window covering all of it.
    """
    delta, short = auto.delta, auto.shortest
    latest = -1
    s = 0
    n = 0
    bad: list[int] = []
    for i, x in enumerate(text):
        s = delta[s][x]
        if short[s]:
            latest = max(latest, i + 1 - short[s])
        n = i + 1
        a = n - length
        if a >= 0 and latest < a:
            bad.append(a)
            if limit is not None and len(bad) >= limit:
                break
    if n < length:
        windows = 1 if n else 0
        if n and latest < 0:
            bad.append(0)
        return windows, bad
    return n - length + 1, bad


def contains_any(auto: PatternAutomaton, text: Iterable[int]) -> bool:
    delta, short = auto.delta, auto.shortest
    s = 0
    for x in text:
        s = delta[s][x]
        if short[s]:
            return True
    return False


def scrub(text: np.ndarray, auto: PatternAutomaton, d: int, max_rounds: int = 64) -> tuple[np.ndarray, int]:
    """Mutate one symbol of every pattern occurrence until none remain.

    The middle symbol of each occurrence is shifted by one mod ``d``.  New
    occurrences created by a mutation are caught by the next round.
    Returns the mutated copy and the number of mutations.
    """
    out = np.array(text, dtype=np.int64)
    flips = 0
    for _ in range(max_rounds):
        hits = auto.find_all(out.tolist())
        if not hits:
            return out, flips
        done_until = -1
        for a, k in hits:
            if a <= done_until:
                continue
            p = auto.patterns[k]
            m = a + len(p) // 2
            out[m] = (out[m] + 1) % d
            flips += 1
            done_until = a + len(p) - 1
    if auto.find_all(out.tolist()):
        raise RuntimeError("could not remove every pattern occurrence")
    return out, flips

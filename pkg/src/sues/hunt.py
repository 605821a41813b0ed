"""Treasure hunt: a stationary treasure and a seeker driven by the infinite sequence.

Time is discrete.  At instant ``t`` an active seeker sits at the head of its
current directed edge; between instants it consumes one symbol.  A meeting
is co-location of the two robots at an instant at which both are active.
Crossing paths on an edge is not a meeting.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import islice
from typing import Iterator

import numpy as np

from ._pool import pmap
from .construction import SuesIndexer, SuesParams, period_exponent
from .graphs import DirectedPortEdge, GraphError, LabeledGraph
from .oracle import Environments, EnvSpec, OracleError, split_specs, world_specs
from .walk import step as walk_step


class HuntError(ValueError):
    pass


def cover_level(n_target: int, params: SuesParams) -> tuple[int, int]:
    """``(j, K)``: first family level covering ``n_target`` and the window level ``K``.

    ``K = 2k^((lam+1)/lam)`` rounded up to a power of two, for ``k = 2^j``.
    """
    try:
        j = params.family.min_level(n_target)
    except OracleError as exc:
        raise HuntError(str(exc)) from None
    return j, 1 << (1 + period_exponent(j, params.lam))


def cover_time(n_target: int, params: SuesParams) -> int:
    """Window length after which the seeker is guaranteed to have met the treasure."""
    _, big = cover_level(n_target, params)
    return SuesIndexer(params).level_length(big.bit_length() - 1) + 1


@dataclass(frozen=True)
class HuntScenario:
    graph: LabeledGraph
    treasure_vertex: int
    seeker_start: DirectedPortEdge
    seeker_activation: int = 0
    treasure_activation: int = 0

    def __post_init__(self):
        if not 0 <= self.treasure_vertex < self.graph.n:
            raise GraphError(f"treasure vertex {self.treasure_vertex} not in graph")
        if not self.graph.is_edge(self.seeker_start):
            raise GraphError(f"{self.seeker_start} is not an edge of the graph")
        if self.seeker_activation < 0 or self.treasure_activation < 0:
            raise HuntError("activation times must be >= 0")

    @property
    def later_activation(self) -> int:
        return max(self.seeker_activation, self.treasure_activation)


@dataclass(frozen=True)
class HuntOutcome:
    met: bool
    meeting_time: int | None
    steps_executed: int
    bound_used: int


@dataclass(frozen=True)
class Checkpoint:
    t: int
    edge: DirectedPortEdge | None
    consumed: int
    outcome: HuntOutcome | None = None


@dataclass
class HuntSimulator:
    """Step-by-step run of one scenario; can be paused and resumed."""

    scenario: HuntScenario
    params: SuesParams
    horizon: int
    bound: int
    t: int = 0
    edge: DirectedPortEdge | None = None
    consumed: int = 0
    outcome: HuntOutcome | None = None
    _symbols: Iterator[int] | None = field(default=None, repr=False)

    def _next_symbol(self) -> int:
        if self._symbols is None:
            self._symbols = SuesIndexer(self.params).stream(self.consumed)
        self.consumed += 1
        return next(self._symbols)

    def step(self) -> HuntOutcome | None:
        """Examine instant ``t`` and advance the clock; returns the outcome once decided."""
        if self.outcome is not None:
            return self.outcome
        sc = self.scenario
        if self.t >= self.horizon:
            self.outcome = HuntOutcome(False, None, self.t, self.bound)
            return self.outcome
        if self.t == sc.seeker_activation:
            self.edge = sc.seeker_start
        elif self.edge is not None:
            # the seeker sees only its step index and last entry port
            self.edge = walk_step(sc.graph, self.edge, self._next_symbol())
        if (
            self.edge is not None
            and self.t >= sc.treasure_activation
            and self.edge.head == sc.treasure_vertex
        ):
            self.outcome = HuntOutcome(True, self.t - sc.later_activation, self.t + 1, self.bound)
        self.t += 1
        return self.outcome

    def run(self, max_steps: int | None = None) -> HuntOutcome | None:
        n = 0
        while self.outcome is None and (max_steps is None or n < max_steps):
            self.step()
            n += 1
        return self.outcome

    def checkpoint(self) -> Checkpoint:
        return Checkpoint(self.t, self.edge, self.consumed, self.outcome)

    @classmethod
    def resume(cls, scenario, params, horizon, bound, cp: Checkpoint) -> "HuntSimulator":
        return cls(scenario, params, horizon, bound, cp.t, cp.edge, cp.consumed, cp.outcome)


def simulator(scenario: HuntScenario, params: SuesParams, horizon: int | None = None) -> HuntSimulator:
    bound = cover_time(scenario.graph.n, params)
    if horizon is None:
        horizon = scenario.later_activation + bound + 1
    return HuntSimulator(scenario, params, horizon, bound)


def run_hunt(scenario: HuntScenario, params: SuesParams, horizon: int | None = None) -> HuntOutcome:
    return simulator(scenario, params, horizon).run()


# -- adversary sweep ---------------------------------------------------------


@dataclass(frozen=True)
class SweepReport:
    d: int
    n_target: int
    lam: int
    schedule: str
    bound: int
    offsets: tuple[int, int]
    scenarios: int
    unmet: int
    max_meeting_time: int
    argmax: dict
    replay: dict
    unmet_examples: list

    @property
    def passed(self) -> bool:
        return (
            self.unmet == 0
            and self.max_meeting_time <= self.bound
            and self.replay.get("agrees", False)
        )

    def to_dict(self) -> dict:
        return {
            "report": "adversary-sweep",
            "d": self.d,
            "n_target": self.n_target,
            "lambda": self.lam,
            "schedule": self.schedule,
            "bound": self.bound,
            "offsets": list(self.offsets),
            "scenarios": self.scenarios,
            "unmet": self.unmet,
            "max_meeting_time": self.max_meeting_time,
            "argmax": self.argmax,
            "replay": self.replay,
            "unmet_examples": self.unmet_examples,
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


_NEVER = np.iinfo(np.int32).max
SHARD_WALKS = 4096


def _trajectories(envs: Environments, symbols: np.ndarray) -> tuple[np.ndarray, object]:
    """Local vertex of every walk at instants ``0..len(symbols)`` (uint8, walks x time)."""
    st = envs.start_states()
    d = envs.d
    pos = np.empty((len(st), len(symbols) + 1), dtype=np.uint8)
    vb = envs.vbase[st.env]
    pos[:, 0] = st.h // d - vb
    for t, x in enumerate(symbols.tolist(), start=1):
        st = envs.step(st, x)
        pos[:, t] = st.h // d - vb
    return pos, st


def _sweep_shard(task):
    d, specs, symbols, offsets, bound = task
    envs = Environments(d, specs)
    pos, st = _trajectories(envs, symbols)
    lo, hi = offsets
    offs = np.arange(lo, hi + 1)
    cols = np.maximum(offs, 0)  # a late seeker sees the same walk as offset 0
    width = pos.shape[1]
    times = np.arange(width, dtype=np.int32)
    scen = 0
    unmet = 0
    best = None
    unmet_examples = []
    sizes = envs.size[st.env]
    for x in range(int(envs.size.max())):
        valid = sizes > x
        hit = np.where(pos == x, times, _NEVER)
        nxt = np.minimum.accumulate(hit[:, ::-1], axis=1)[:, ::-1]
        mt = (nxt[:, cols].astype(np.int64) - cols)[valid]
        env, start = st.env[valid], st.start[valid]
        scen += mt.size
        miss = mt > bound
        if miss.any():
            unmet += int(miss.sum())
            r, c = np.nonzero(miss)
            for a, b in list(zip(r.tolist(), c.tolist()))[:8]:
                unmet_examples.append(_key(envs, int(env[a]), int(start[a]), x, int(offs[b])))
        good = np.where(miss, -1, mt)
        m = int(good.max()) if good.size else -1
        if m < 0:
            continue
        r, c = np.nonzero(good == m)
        cand = min(_key(envs, int(env[a]), int(start[a]), x, int(offs[b])) for a, b in zip(r.tolist(), c.tolist()))
        if best is None or (m, _neg(cand)) > (best[0], _neg(best[1])):
            best = (m, cand)
    return scen, unmet, best, sorted(unmet_examples)[:8]


def _key(envs, env, start, treasure, offset):
    return (int(envs.size[env]), int(envs.topology[env]), int(envs.labeling[env]), start, treasure, offset)


def _neg(key):
    return tuple(-k for k in key)


def _scenario_from_key(d: int, key, bound: int) -> HuntScenario:
    from .graphs import labeling_perms, load_catalog

    size, topo, lab, start, treasure, offset = key
    g = LabeledGraph.from_adjacency(load_catalog(d, size)[topo], labeling_perms(lab, d, size), True, topo, lab)
    v, p = divmod(start, d)
    w, q = g.rot[v][p]
    sa, ta = (0, offset) if offset >= 0 else (-offset, 0)
    return HuntScenario(g, treasure, DirectedPortEdge(v, w, q), sa, ta)


def _describe(d: int, key) -> dict:
    size, topo, lab, start, treasure, offset = key
    v, p = divmod(start, d)
    return {
        "size": size,
        "topology": topo,
        "labeling": lab,
        "start_tail": v,
        "start_port": p,
        "treasure": treasure,
        "offset": offset,
    }


def adversary_sweep(
    d: int,
    n_target: int,
    params: SuesParams,
    offsets: range | tuple[int, int] | None = None,
    workers: int = 1,
    shards: int | None = None,
    labelings: range | None = None,
) -> SweepReport:
    """Worst meeting time over every world graph, start edge, treasure vertex and offset.

    An offset ``o >= 0`` activates the treasure ``o`` instants after the
    seeker; ``o < 0`` activates the seeker ``-o`` instants after the treasure.
    The worst scenario (ties broken by the smallest key) is replayed through
    :func:`run_hunt` as an independent check of the vectorised sweep.
    ``labelings`` restricts every topology to a subset of its labelings.
    """
    if d != params.d:
        raise HuntError(f"family alphabet {params.d} differs from d={d}")
    bound = cover_time(n_target, params)
    if offsets is None:
        lo, hi = 0, bound
    elif isinstance(offsets, range):
        if offsets.step != 1 or len(offsets) == 0:
            raise HuntError("offsets must be a non-empty contiguous range")
        lo, hi = offsets.start, offsets.stop - 1
    else:
        lo, hi = offsets
    specs = world_specs(d, n_target, "exhaustive")
    if labelings is not None:
        specs = [EnvSpec(sp.size, sp.topology, [x for x in labelings if x in sp.labelings]) for sp in specs]
        specs = [sp for sp in specs if len(sp.labelings)]
    symbols = np.fromiter(islice(SuesIndexer(params).stream(0), max(hi, 0) + bound), dtype=np.int64)
    walks = sum(len(sp.labelings) * sp.size * d for sp in specs)
    parts = shards if shards is not None else max(workers, -(-walks // SHARD_WALKS))
    pieces = split_specs(specs, parts)
    results = pmap(_sweep_shard, [(d, sh, symbols, (lo, hi), bound) for sh in pieces], workers)
    scen = sum(r[0] for r in results)
    unmet = sum(r[1] for r in results)
    bests = [r[2] for r in results if r[2] is not None]
    best = max(bests, key=lambda b: (b[0], _neg(b[1]))) if bests else (-1, None)
    examples = sorted(e for r in results for e in r[3])[:8]
    replay = {"agrees": best[1] is None}
    if best[1] is not None:
        sc = _scenario_from_key(d, best[1], bound)
        out = run_hunt(sc, params, horizon=sc.later_activation + bound + 1)
        replay = {
            "met": out.met,
            "meeting_time": out.meeting_time,
            "agrees": out.met and out.meeting_time == best[0],
        }
    report = SweepReport(
        d, n_target, params.lam, params.schedule, bound, (lo, hi), scen, unmet,
        best[0], _describe(d, best[1]) if best[1] else {}, replay,
        [_describe(d, e) for e in examples],
    )
    return report

"""Executable structural checks with machine-readable reports.

Every report is a pure function of its parameters and seed: failures are
sorted, no timings are recorded and keys are emitted in a fixed order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import islice

import numpy as np

from ._pool import chunks, pmap
from .construction import (
    DIVIDES,
    ConstructionError,
    SuesIndexer,
    SuesParams,
    period_exponent,
    sues_length,
)
from .hunt import cover_level, cover_time
from .matching import PatternAutomaton, contains_any, scrub, window_failures
from .oracle import Environments
from .treasure import bound_constants
from .walk import ExplorationSequence, invert

MAX_LISTED = 64  # failures kept verbatim in a report; the total is always counted

# printed s-values for lambda = 2 under the divisibility schedule
REFERENCE_S_TABLE = {1: 1, 2: 6, 4: 16, 8: 46, 16: 126, 32: 286, 256: 3426}


class PropertyError(ValueError):
    pass


@dataclass
class PropertyReport:
    property: str
    params: dict
    windows_checked: int
    failures: list
    mode: str
    seed: int | None = None
    expectation: str = "pass"
    extra: dict = field(default_factory=dict)

    @property
    def failure_count(self) -> int:
        return self.extra.get("failure_count", len(self.failures))

    @property
    def passed(self) -> bool:
        """Pass reports must be clean; expected-fail probes must catch something."""
        clean = self.failure_count == 0
        return clean if self.expectation == "pass" else not clean

    def to_dict(self) -> dict:
        return {
            "property": self.property,
            "params": {k: self.params[k] for k in sorted(self.params)},
            "mode": self.mode,
            "seed": self.seed,
            "expectation": self.expectation,
            "windows_checked": self.windows_checked,
            "failure_count": self.failure_count,
            "failures": self.failures,
            "extra": {k: self.extra[k] for k in sorted(self.extra)},
            "passed": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def _log2(x: int, what: str) -> int:
    if x < 1 or x & (x - 1):
        raise PropertyError(f"{what} must be a power of two, got {x}")
    return x.bit_length() - 1


def containment_level(k: int, lam: int) -> int:
    """Window level ``K = 2k^((lam+1)/lam)``, rounded up to a power of two."""
    return 1 << (1 + period_exponent(_log2(k, "k"), lam))


def containment_patterns(ix: SuesIndexer, k: int) -> PatternAutomaton:
    sk = ix.build(k)
    zero = ExplorationSequence(sk.d, [0])
    return PatternAutomaton(sk.d, [sk.tolist(), (zero + invert(sk)).tolist()])


def _slide_shard(task):
    d, patterns, text, lo, hi, length = task
    auto = PatternAutomaton(d, patterns)
    windows, bad = window_failures(auto, text[lo:hi + length - 1], length)
    return windows, [lo + a for a in bad]


def _slide(auto: PatternAutomaton, text: np.ndarray, length: int, workers: int) -> tuple[int, list[int]]:
    """Shard window starts across workers; shards overlap by ``length - 1`` symbols."""
    n_windows = max(1, len(text) - length + 1)
    tasks = [
        (auto.d, auto.patterns, text, lo, hi, length)
        for lo, hi in chunks(0, n_windows, max(1, workers))
    ]
    out = pmap(_slide_shard, tasks, workers)
    return sum(o[0] for o in out), sorted(a for o in out for a in o[1])


def check_window_containment(
    n: int,
    k: int,
    params: SuesParams,
    fault_injection: bool = False,
    workers: int = 1,
) -> PropertyReport:
    """Every window of length ``s_K + 1`` of ``S_n`` and of its inverse holds ``S_k`` or ``0 S_k^-1``.

    With ``fault_injection`` every occurrence of both patterns in ``S_n`` is
    first broken by a one-symbol mutation; the checker must then report
    failures, so the report expects them.
    """
    lam = params.lam
    m = _log2(k, "k")
    _log2(n, "n")
    big = containment_level(k, lam)
    if n < big:
        raise PropertyError(f"need n >= {big} for k={k}, lambda={lam}; got n={n}")
    ix = SuesIndexer(params)
    length = ix.length(big) + 1
    auto = containment_patterns(ix, k)
    text = ix.build(n).symbols.astype(np.int64)
    flips = 0
    if fault_injection:
        text, flips = scrub(text, auto, params.d)
    inverse = invert(ExplorationSequence(params.d, text)).symbols.astype(np.int64)
    failures = []
    windows = 0
    total_bad = 0
    for name, t in (("forward", text), ("inverse", inverse)):
        w, bad = _slide(auto, t, length, workers)
        windows += w
        total_bad += len(bad)
        failures.extend({"text": name, "offset": a, "reason": "no pattern"} for a in bad)
    failures.sort(key=lambda f: (f["text"] != "forward", f["offset"]))
    return PropertyReport(
        "containment",
        {
            "n": n,
            "k": k,
            "lambda": lam,
            "d": params.d,
            "schedule": params.schedule,
            "window_length": length,
            "fault_injection": fault_injection,
        },
        windows,
        failures[:MAX_LISTED],
        "exhaustive",
        None,
        "fail" if fault_injection else "pass",
        {
            "failure_count": total_bad,
            "integral_exponent": m % lam == 0,
            "window_level": big,
            "mutations": flips,
        },
    )


def _window_shard(task):
    params, n_target, mode, labelings, seed, starts, length, k = task
    ix = SuesIndexer(params)
    envs = Environments.world(params.d, n_target, mode, labelings, seed)
    auto = containment_patterns(ix, k)
    out = []
    for a in starts:
        syms = ix.symbols_at(np.arange(a, a + length, dtype=np.int64))
        left = envs.run(syms)
        contained = contains_any(auto, syms.tolist())
        miss = None
        if len(left):
            i = int(np.lexsort((left.start, left.env))[0])
            env = int(left.env[i])
            gap = int(envs.full[env] & ~left.visited[i])
            miss = {
                "size": int(envs.size[env]),
                "topology": int(envs.topology[env]),
                "labeling": int(envs.labeling[env]),
                "start": int(left.start[i]),
                "unvisited": (gap & -gap).bit_length() - 1,
                "walks_failed": len(left),
            }
        out.append((int(a), contained, miss))
    return out


def check_window_ues(
    params: SuesParams,
    n_target: int,
    window_len: int | None = None,
    windows: int = 200,
    seed: int = 0,
    span: int | None = None,
    mode: str = "exhaustive",
    labelings: int = 16,
    probe: bool = False,
    placement: str | None = None,
    gap_n: int = 1 << 15,
    workers: int = 1,
) -> PropertyReport:
    """Seeded windows of the infinite sequence must each be universal for ``n_target``.

    With ``placement="uniform"`` window starts are drawn from ``[0, span)``;
    the default span is ``|S_{2^30}|``.  With ``placement="gaps"`` they are
    drawn from the windows of ``S_{gap_n}`` that contain neither ``S_k`` nor
    ``0 S_k^-1``, the only places a failure can hide.

    ``probe`` shortens the window by ``s_k`` below the cover time, defaults to
    gap placement and expects at least one failure.  Each window is also
    checked for containment of ``S_k`` (``k`` the covering family level); a
    window holding it must be universal, so a disagreement is a failure.
    """
    j, _ = cover_level(n_target, params)
    k = 1 << j
    ix = SuesIndexer(params)
    p = cover_time(n_target, params)
    if window_len is None:
        window_len = p - ix.level_length(j) if probe else p
    if window_len < 1:
        raise PropertyError("window length must be positive")
    if placement is None:
        placement = "gaps" if probe else "uniform"
    rng = np.random.default_rng(seed)
    candidates = None
    if placement == "uniform":
        if span is None:
            span = ix.level_length(30)
        starts = np.sort(rng.integers(0, span, size=windows)).tolist()
    elif placement == "gaps":
        span = ix.length(gap_n)
        _, gaps = window_failures(containment_patterns(ix, k), ix.build(gap_n).tolist(), window_len)
        gaps = [a for a in gaps if a + window_len <= span]
        candidates = len(gaps)
        pick = rng.choice(len(gaps), size=min(windows, len(gaps)), replace=False) if gaps else []
        starts = sorted(gaps[i] for i in pick)
    else:
        raise PropertyError(f"unknown placement {placement!r}")
    tasks = [
        (params, n_target, mode, labelings, seed, starts[lo:hi], window_len, k)
        for lo, hi in chunks(0, len(starts), max(1, workers))
    ] if starts else []
    rows = [r for part in pmap(_window_shard, tasks, workers) for r in part]
    failures = []
    contained = 0
    disagree = 0
    for a, has, miss in rows:
        contained += has
        if miss is not None:
            reason = "contains S_k but is not universal" if has else "not universal"
            disagree += has
            failures.append({"offset": a, "reason": reason, **miss})
    failures.sort(key=lambda f: f["offset"])
    return PropertyReport(
        "window-ues",
        {
            "n_target": n_target,
            "k": k,
            "lambda": params.lam,
            "d": params.d,
            "schedule": params.schedule,
            "window_length": window_len,
            "span": span,
            "labelings": labelings if mode == "sampled" else None,
            "placement": placement,
        },
        len(rows),
        failures[:MAX_LISTED],
        mode,
        seed,
        "fail" if probe else "pass",
        {
            "failure_count": len(failures),
            "cover_time": p,
            "windows_containing_S_k": contained,
            "direction_violations": disagree,
            "gap_candidates": candidates,
        },
    )


def check_length_bounds(lam: int = 2, max_level: int = 20, schedule: str = DIVIDES) -> PropertyReport:
    """Exact length table against the reference values, ``258 n`` and the treasure bound."""
    if max_level < 0:
        raise PropertyError("max_level must be >= 0")
    tc = bound_constants(lam, schedule)
    failures = []
    table = []
    for j in range(max_level + 1):
        n = 1 << j
        s = sues_length(j, lam, schedule)
        row = {"level": j, "n": n, "s": s, "ratio": float(Fraction(s, n))}
        if lam == 2 and schedule == DIVIDES:
            if n in REFERENCE_S_TABLE and s != REFERENCE_S_TABLE[n]:
                failures.append({"level": j, "reason": f"s={s}, reference {REFERENCE_S_TABLE[n]}"})
            if not s < 258 * n:
                failures.append({"level": j, "reason": f"s={s} >= 258n"})
        verdict = tc.holds(s, n)
        if verdict is not True:
            why = "undecided at working precision" if verdict is None else "exceeds bound"
            failures.append({"level": j, "reason": f"s={s} {why}"})
        row["slack"] = tc.bound_coefficient.mid - row["ratio"]
        table.append(row)
    tail = [r["ratio"] for r in table if r["level"] >= tc.g]
    return PropertyReport(
        "bounds",
        {"lambda": lam, "schedule": schedule, "max_level": max_level},
        max_level + 1,
        failures,
        "exhaustive",
        None,
        "pass",
        {
            "golden_point": tc.g,
            "q_g": tc.q_g.mid,
            "c_finite": tc.c_finite.mid,
            "c_max": str(tc.c_max),
            "bound_coefficient": tc.bound_coefficient.mid,
            "table": table,
            # informational: the ratio is not required to be monotone
            "ratio_nonincreasing_after_golden_point": all(b <= a for a, b in zip(tail, tail[1:])),
        },
    )


def check_prefix_chain(params: SuesParams, max_level: int = 10) -> PropertyReport:
    """``S_n`` is a prefix of ``S_2n``, and the streamed prefix equals the built one."""
    ix = SuesIndexer(params)
    failures = []
    prev = None
    for j in range(max_level + 1):
        try:
            cur = ix.build(1 << j).symbols
        except ConstructionError as exc:
            failures.append({"level": j, "reason": str(exc)})
            break
        if prev is not None and not np.array_equal(cur[:len(prev)], prev):
            failures.append({"level": j, "reason": "previous level is not a prefix"})
        prev = cur
    if prev is not None:
        streamed = np.fromiter(islice(ix.stream(0), len(prev)), dtype=np.uint8)
        if not np.array_equal(streamed, prev):
            failures.append({"level": max_level, "reason": "stream disagrees with build"})
    return PropertyReport(
        "prefix-chain",
        {"lambda": params.lam, "d": params.d, "schedule": params.schedule, "max_level": max_level},
        max_level + 1,
        failures,
        "exhaustive",
    )

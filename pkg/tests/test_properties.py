import json

import numpy as np
import pytest

from sues.construction import MAGNITUDE, SuesIndexer, SuesParams
from sues.matching import PatternAutomaton, window_failures
from sues.properties import (
    REFERENCE_S_TABLE,
    PropertyError,
    check_length_bounds,
    check_prefix_chain,
    check_window_containment,
    check_window_ues,
    containment_level,
)
from sues.walk import invert


def test_containment_level():
    assert containment_level(1, 2) == 2
    assert containment_level(4, 2) == 16
    assert containment_level(8, 2) == 64
    assert containment_level(4, 3) == 16


@pytest.mark.parametrize("k,n", [(1, 64), (4, 16), (4, 1024)])
def test_containment_holds(params, k, n):
    r = check_window_containment(n, k, params)
    assert r.passed and r.failures == []
    assert r.windows_checked > 0


def test_containment_vacuous_at_window_level(params):
    r = check_window_containment(16, 4, params)
    ix = SuesIndexer(params)
    assert r.params["window_length"] == ix.length(16) + 1 == 127
    assert r.windows_checked == 2  # one short window per direction
    assert r.passed


def test_containment_by_brute_force(params):
    """Naive substring search agrees with the automaton on a modest text."""
    ix = SuesIndexer(params)
    text = ix.build(256).tolist()
    inv = invert(ix.build(256)).tolist()
    sk = ix.build(4).tolist()
    alt = [0] + invert(ix.build(4)).tolist()
    L = ix.length(16) + 1

    def has(w, p):
        return any(w[i:i + len(p)] == p for i in range(len(w) - len(p) + 1))

    for t in (text, inv):
        for a in range(0, len(t) - L + 1, 7):
            w = t[a:a + L]
            assert has(w, sk) or has(w, alt)


def test_fault_injection_is_caught(params):
    r = check_window_containment(64, 4, params, fault_injection=True)
    assert r.expectation == "fail"
    assert r.failure_count > 0 and r.passed
    assert r.extra["mutations"] > 0
    assert len(r.failures) <= 64


def test_containment_preconditions(params):
    with pytest.raises(PropertyError):
        check_window_containment(8, 4, params)
    with pytest.raises(PropertyError):
        check_window_containment(48, 4, params)
    with pytest.raises(PropertyError):
        check_window_containment(64, 3, params)


def test_integrality_flag(params):
    assert check_window_containment(16, 4, params).extra["integral_exponent"]
    assert not check_window_containment(64, 8, params).extra["integral_exponent"]


def test_containment_worker_independent(params):
    a = check_window_containment(512, 4, params, workers=1)
    b = check_window_containment(512, 4, params, workers=3)
    assert a.to_json() == b.to_json()


def test_window_ues_from_offset_zero(params):
    r = check_window_ues(params, 4, windows=1, span=1)
    assert r.passed and r.windows_checked == 1
    assert r.extra["cover_time"] == 667


def test_window_ues_seeded_sample(params):
    r = check_window_ues(params, 4, windows=12, seed=3)
    assert r.passed
    assert r.extra["direction_violations"] == 0
    again = check_window_ues(params, 4, windows=12, seed=3, workers=2)
    assert r.to_json() == again.to_json()


def test_window_ues_sampled_mode(params):
    r = check_window_ues(params, 4, windows=4, mode="sampled", labelings=8, seed=1)
    assert r.passed and r.mode == "sampled" and r.params["labelings"] == 8


def test_shortened_windows_probe(params):
    r = check_window_ues(params, 4, windows=40, probe=True, seed=0)
    assert r.expectation == "fail"
    assert r.params["window_length"] == 667 - 46
    assert r.params["placement"] == "gaps"
    assert r.failure_count > 0 and r.passed
    assert r.extra["direction_violations"] == 0
    f = r.failures[0]
    assert f["reason"] == "not universal"
    assert 0 <= f["unvisited"] < f["size"]


def test_probe_failures_are_real(params):
    """Replay a reported failure by walking the named environment directly."""
    from sues.graphs import LabeledGraph, labeling_perms, load_catalog
    from sues.walk import ExplorationSequence, execute

    r = check_window_ues(params, 4, windows=10, probe=True, seed=0)
    f = r.failures[0]
    ix = SuesIndexer(params)
    L = r.params["window_length"]
    seq = ExplorationSequence(3, ix.symbols_at(np.arange(f["offset"], f["offset"] + L)))
    g = LabeledGraph.from_adjacency(load_catalog(3, f["size"])[f["topology"]], labeling_perms(f["labeling"], 3, f["size"]))
    start = list(g.start_edges())[f["start"]]
    assert f["unvisited"] not in execute(g, seq, start).vertices[1:]


def test_gap_placement_picks_containment_gaps(params):
    r = check_window_ues(params, 4, windows=5, probe=True, seed=2)
    ix = SuesIndexer(params)
    auto = PatternAutomaton(3, [ix.build(8).tolist(), [0] + invert(ix.build(8)).tolist()])
    L = r.params["window_length"]
    for f in r.failures:
        w = ix.symbols_at(np.arange(f["offset"], f["offset"] + L)).tolist()
        assert window_failures(auto, w, L)[1] == [0]


def test_window_ues_rejects_bad_input(params):
    with pytest.raises(PropertyError):
        check_window_ues(params, 4, window_len=0)
    with pytest.raises(PropertyError):
        check_window_ues(params, 4, placement="everywhere")


@pytest.mark.parametrize("lam", [2, 3, 5])
def test_length_bounds(lam):
    r = check_length_bounds(lam, 20)
    assert r.passed
    assert len(r.extra["table"]) == 21
    assert all(row["slack"] > 0 for row in r.extra["table"])


def test_length_bounds_table_values():
    r = check_length_bounds(2, 8)
    s = {row["n"]: row["s"] for row in r.extra["table"]}
    assert all(s[n] == v for n, v in REFERENCE_S_TABLE.items())
    assert r.extra["golden_point"] == 5
    assert r.extra["c_max"] == "63/8"
    assert isinstance(r.extra["ratio_nonincreasing_after_golden_point"], bool)


def test_magnitude_schedule_breaks_linear_bound():
    """The magnitude reading of the schedule grows superlinearly; the check must say so."""
    r = check_length_bounds(2, 12, MAGNITUDE)
    assert r.params["schedule"] == MAGNITUDE
    assert not r.passed
    assert min(f["level"] for f in r.failures) == 8


def test_prefix_chain_report(params, family):
    assert check_prefix_chain(params, 12).passed
    capped = check_prefix_chain(SuesParams(2, family, cap=100), 12)
    assert not capped.passed


def test_report_json_is_stable(params):
    r = check_length_bounds(2, 6)
    d = json.loads(r.to_json())
    assert list(d) == [
        "property", "params", "mode", "seed", "expectation",
        "windows_checked", "failure_count", "failures", "extra", "passed",
    ]
    assert list(d["params"]) == sorted(d["params"])
    assert r.to_json() == check_length_bounds(2, 6).to_json()

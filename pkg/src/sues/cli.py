"""Command suite: ``ues``, ``sues`` and ``hunt`` share one dispatcher.

Every leaf command accepts ``--config FILE`` holding ``key=value`` lines
named after its long flags; flags given on the command line win.  Output
files are written only after the command has finished, so a bad invocation
never leaves partial artifacts behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from itertools import islice
from pathlib import Path

from ._pool import default_workers
from .construction import DIVIDES, MAGNITUDE, SuesIndexer, SuesParams
from .graphs import DirectedPortEdge, GraphError, LabeledGraph
from .oracle import (
    OracleError,
    family_from_ues,
    read_family,
    search_ues,
    searched_family,
    verify_ues,
)
from .walk import ExplorationSequence, SequenceError, format_sequence, read_sequence


class UsageError(ValueError):
    pass


# -- argument plumbing -------------------------------------------------------


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--workers", type=int, default=None, help="worker processes (default: SUES_WORKERS or all cores)")
    p.add_argument("--out", help="write the result here")
    p.add_argument("--format", choices=("json", "csv", "text"), default=None)


def _family_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--lambda", dest="lam", type=int, default=2)
    p.add_argument("--schedule", choices=(DIVIDES, MAGNITUDE), default=DIVIDES)
    p.add_argument("--family", help="family archive; default is the searched d=3 family")
    p.add_argument("--d", type=int, default=3)


def build_parser() -> tuple[argparse.ArgumentParser, dict]:
    root = argparse.ArgumentParser(prog="sues", description="Exploration sequence toolkit")
    groups = root.add_subparsers(dest="group", required=True)
    leaves: dict[tuple[str, str], argparse.ArgumentParser] = {}

    def leaf(grp, group, name, help_):
        p = grp.add_parser(name, help=help_)
        _common(p)
        leaves[(group, name)] = p
        return p

    ues = groups.add_parser("ues", help="search and verify universal exploration sequences")
    ues_cmds = ues.add_subparsers(dest="command", required=True)
    p = leaf(ues_cmds, "ues", "search", "shortest UES by iterative deepening")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--max-len", type=int, default=12)
    p.add_argument("--budget", type=int, default=None)
    p.add_argument("--strategy", choices=("ids", "greedy"), default="ids")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--family-out", help="also write a family archive built on the result")
    p = leaf(ues_cmds, "ues", "verify", "check a sequence against every world graph")
    p.add_argument("--seq-file", required=True)
    p.add_argument("--raw", action="store_true", help="sequence file holds one byte per symbol")
    p.add_argument("--d", type=int, default=3)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
    p.add_argument("--count", type=int, default=16, help="labelings per topology when sampling")
    p.add_argument("--seed", type=int, default=0)

    sues = groups.add_parser("sues", help="build, index and check the infinite sequence")
    sues_cmds = sues.add_subparsers(dest="command", required=True)
    p = leaf(sues_cmds, "sues", "build", "materialise S_n")
    _family_opts(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--raw", action="store_true")
    p = leaf(sues_cmds, "sues", "at", "random access into the infinite sequence")
    _family_opts(p)
    p.add_argument("--t", type=int, nargs="+", required=True)
    p = leaf(sues_cmds, "sues", "stream", "print a stretch of the infinite sequence")
    _family_opts(p)
    p.add_argument("--from", dest="start", type=int, default=0)
    p.add_argument("--count", type=int, required=True)
    p = leaf(sues_cmds, "sues", "bounds", "length table and the constants of the linear bound")
    p.add_argument("--lambda", dest="lam", type=int, default=2)
    p.add_argument("--schedule", choices=(DIVIDES, MAGNITUDE), default=DIVIDES)
    p.add_argument("--levels", type=int, default=20)
    p = leaf(sues_cmds, "sues", "verify", "run a structural property check")
    _family_opts(p)
    p.add_argument("--property", choices=("containment", "window-ues", "bounds", "prefix-chain"), required=True)
    p.add_argument("--k", type=int, default=4)
    p.add_argument("--n", type=int, default=None, help="S_n for containment, target size for window-ues")
    p.add_argument("--levels", type=int, default=20)
    p.add_argument("--mode", choices=("exhaustive", "sampled"), default="exhaustive")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--windows", type=int, default=200)
    p.add_argument("--window-len", type=int, default=None)
    p.add_argument("--labelings", type=int, default=16)
    p.add_argument("--placement", choices=("uniform", "gaps"), default=None)
    p.add_argument("--probe", action="store_true", help="shortened windows; failures are expected")
    p.add_argument("--fault-injection", action="store_true")

    hunt = groups.add_parser("hunt", help="treasure hunt simulation")
    hunt_cmds = hunt.add_subparsers(dest="command", required=True)
    p = leaf(hunt_cmds, "hunt", "run", "simulate one scenario")
    _family_opts(p)
    p.add_argument("--graph-file", required=True)
    p.add_argument("--treasure", type=int, required=True)
    p.add_argument("--start", required=True, help="TAIL:PORT of the seeker's start edge")
    p.add_argument("--activations", default="0,0", help="SEEKER,TREASURE activation times")
    p.add_argument("--horizon", type=int, default=None)
    p = leaf(hunt_cmds, "hunt", "sweep", "worst case over every scenario of the world")
    _family_opts(p)
    p.add_argument("--n", type=int, default=4)
    p.add_argument("--offsets", default=None, help="LO:HI inclusive treasure activation offsets")
    return root, leaves


def _flag_actions(parser: argparse.ArgumentParser) -> dict:
    out = {}
    for a in parser._actions:
        for s in a.option_strings:
            if s.startswith("--"):
                out[s[2:].replace("-", "_")] = (s, a)
    return out


def _config_tokens(parser: argparse.ArgumentParser, path: str) -> list[str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    flags = _flag_actions(parser)
    tokens = []
    for num, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or not key:
            raise UsageError(f"{path}:{num}: expected key=value")
        if key in ("config", "help") or key not in flags:
            raise UsageError(f"{path}:{num}: unknown key {key!r}")
        opt, action = flags[key]
        if isinstance(action, argparse._StoreTrueAction):
            if value.lower() in ("1", "true", "yes", "on"):
                tokens.append(opt)
            elif value.lower() not in ("0", "false", "no", "off"):
                raise UsageError(f"{path}:{num}: {key} expects a boolean")
        elif action.nargs == "+":
            tokens.append(opt)
            tokens.extend(value.split())
        else:
            tokens.extend([opt, value])
    return tokens


def _config_path(argv: list[str]) -> str | None:
    path = None
    for i, tok in enumerate(argv):
        if tok == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif tok.startswith("--config="):
            path = tok.split("=", 1)[1]
    return path


def parse(argv: list[str]) -> argparse.Namespace:
    """Parse ``argv``; a config file's entries are spliced in ahead of the explicit flags."""
    root, leaves = build_parser()
    path = _config_path(argv)
    parser = leaves.get(tuple(argv[:2]))
    if path is not None and parser is not None:
        try:
            extra = _config_tokens(parser, path)
        except UsageError as exc:
            parser.error(str(exc))
        argv = argv[:2] + extra + argv[2:]
    return root.parse_args(argv)


# -- output ------------------------------------------------------------------


class Outputs:
    """Collects artifacts and commits them only when the command completes."""

    def __init__(self):
        self.files: list[tuple[Path, bytes]] = []

    def add(self, path: str | None, data: str | bytes) -> None:
        if path is None:
            return
        self.files.append((Path(path), data.encode() if isinstance(data, str) else data))

    def commit(self) -> None:
        umask = os.umask(0)
        os.umask(umask)
        for path, data in self.files:
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.chmod(tmp, 0o666 & ~umask)  # mkstemp creates 0600
            os.replace(tmp, path)


def _fmt(ns, fallback: str) -> str:
    if ns.format:
        return ns.format
    if ns.out and ns.out.endswith(".csv"):
        return "csv"
    if ns.out and ns.out.endswith(".json"):
        return "json"
    return fallback


def _params(ns) -> SuesParams:
    if ns.family:
        fam = read_family(ns.family)
    else:
        fam = searched_family(ns.d, ns.d + 1)
    if fam.d != ns.d:
        raise UsageError(f"family has d={fam.d}, expected d={ns.d}")
    return SuesParams(ns.lam, fam, ns.schedule)


def _workers(ns) -> int:
    return ns.workers if ns.workers is not None else default_workers()


def _emit(ns, outputs: Outputs, text: str) -> None:
    """Send ``text`` to ``--out`` if given, otherwise to stdout."""
    if ns.out:
        outputs.add(ns.out, text)
    else:
        sys.stdout.write(text)


# -- commands ----------------------------------------------------------------


def cmd_ues_search(ns, outputs: Outputs) -> int:
    res = search_ues(ns.d, ns.n, ns.max_len, ns.budget, ns.strategy, _workers(ns))
    report = {
        "report": "ues-search",
        "d": ns.d,
        "n": ns.n,
        "max_len": ns.max_len,
        "strategy": ns.strategy,
        "seed": ns.seed,
        "status": res.status,
        "sequence": res.sequence.tolist() if res.sequence is not None else None,
        "refuted_below": res.refuted_below,
        "minimal": res.minimal,
        "nodes": res.nodes,
    }
    if _fmt(ns, "text") == "json":
        _emit(ns, outputs, json.dumps(report, indent=2) + "\n")
    elif res.found:
        _emit(ns, outputs, format_sequence(res.sequence))
    else:
        _emit(ns, outputs, f"status={res.status} refuted_below={res.refuted_below}\n")
    if res.found and ns.family_out:
        fam = family_from_ues(res.sequence.tolist(), ns.d, ns.n)
        outputs.add(ns.family_out, _family_text(fam))
    return 0 if res.found else 1


def _family_text(fam) -> str:
    from .oracle import format_family

    return format_family(fam)


def cmd_ues_verify(ns, outputs: Outputs) -> int:
    seq = read_sequence(ns.seq_file, ns.d if ns.raw else None, ns.raw)
    v = verify_ues(seq, ns.d, ns.n, ns.mode, ns.count, ns.seed, _workers(ns))
    cex = None
    if v.counterexample is not None:
        c = v.counterexample
        cex = {
            "size": c.size,
            "topology": c.topology,
            "labeling": c.labeling,
            "start": [c.start.tail, c.start.head, c.start.entry_port],
            "unvisited": c.unvisited,
        }
    report = {
        "report": "ues-verify",
        "d": ns.d,
        "n": ns.n,
        "length": len(seq),
        "mode": ns.mode,
        "seed": ns.seed if ns.mode == "sampled" else None,
        "walks_checked": v.walks_checked,
        "is_ues": v.is_ues,
        "counterexample": cex,
    }
    _emit(ns, outputs, json.dumps(report, indent=2) + "\n")
    return 0 if v.is_ues else 1


def cmd_sues_build(ns, outputs: Outputs) -> int:
    seq = SuesIndexer(_params(ns)).build(ns.n)
    if ns.raw:
        if not ns.out:
            raise UsageError("--raw needs --out")
        outputs.add(ns.out, seq.symbols.tobytes())
    else:
        _emit(ns, outputs, format_sequence(seq))
    return 0


def cmd_sues_at(ns, outputs: Outputs) -> int:
    ix = SuesIndexer(_params(ns))
    if any(t < 0 for t in ns.t):
        raise UsageError("indices must be >= 0")
    syms = ix.symbols_at(ns.t).tolist()
    _emit(ns, outputs, "".join(f"{t} {x}\n" for t, x in zip(ns.t, syms)))
    return 0


def cmd_sues_stream(ns, outputs: Outputs) -> int:
    if ns.start < 0 or ns.count < 0:
        raise UsageError("--from and --count must be >= 0")
    params = _params(ns)
    syms = list(islice(SuesIndexer(params).stream(ns.start), ns.count))
    _emit(ns, outputs, format_sequence(ExplorationSequence(params.d, syms)))
    return 0


def _bounds_csv(report) -> str:
    buf = io.StringIO()
    ex = report.extra
    for key in ("golden_point", "q_g", "c_finite", "c_max", "bound_coefficient"):
        buf.write(f"# {key}={ex[key]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["level", "n", "s", "ratio", "slack"])
    for row in ex["table"]:
        w.writerow([row["level"], row["n"], row["s"], repr(row["ratio"]), repr(row["slack"])])
    return buf.getvalue()


def cmd_sues_bounds(ns, outputs: Outputs) -> int:
    from .properties import check_length_bounds

    report = check_length_bounds(ns.lam, ns.levels, ns.schedule)
    text = report.to_json() if _fmt(ns, "csv") == "json" else _bounds_csv(report)
    _emit(ns, outputs, text)
    return 0 if report.passed else 1


def cmd_sues_verify(ns, outputs: Outputs) -> int:
    from . import properties as pr

    workers = _workers(ns)
    if ns.property == "bounds":
        report = pr.check_length_bounds(ns.lam, ns.levels, ns.schedule)
    elif ns.property == "containment":
        if ns.n is None:
            raise UsageError("containment needs --n")
        report = pr.check_window_containment(ns.n, ns.k, _params(ns), ns.fault_injection, workers)
    elif ns.property == "window-ues":
        report = pr.check_window_ues(
            _params(ns), ns.n or 4, ns.window_len, ns.windows, ns.seed,
            mode=ns.mode, labelings=ns.labelings, probe=ns.probe,
            placement=ns.placement, workers=workers,
        )
    else:
        report = pr.check_prefix_chain(_params(ns), ns.levels)
    if ns.out:
        outputs.add(ns.out, report.to_json())
    status = "pass" if report.passed else "FAIL"
    sys.stdout.write(
        f"{report.property}: {status} ({report.windows_checked} checked, "
        f"{report.failure_count} failures, expected {report.expectation})\n"
    )
    return 0 if report.passed else 1


def _pair(text: str, sep: str, what: str) -> tuple[int, int]:
    try:
        a, b = text.split(sep)
        return int(a), int(b)
    except ValueError:
        raise UsageError(f"{what} must look like A{sep}B, got {text!r}") from None


def cmd_hunt_run(ns, outputs: Outputs) -> int:
    from .hunt import HuntScenario, run_hunt

    g = LabeledGraph.from_text(Path(ns.graph_file).read_text())
    tail, port = _pair(ns.start, ":", "--start")
    if not (0 <= tail < g.n and 0 <= port < g.d):
        raise UsageError(f"start {ns.start} is not a port of the graph")
    sa, ta = _pair(ns.activations, ",", "--activations")
    w, q = g.rot[tail][port]
    sc = HuntScenario(g, ns.treasure, DirectedPortEdge(tail, w, q), sa, ta)
    out = run_hunt(sc, _params(ns), ns.horizon)
    report = {
        "report": "hunt-run",
        "treasure": ns.treasure,
        "start": [tail, port],
        "activations": [sa, ta],
        "met": out.met,
        "meeting_time": out.meeting_time,
        "steps_executed": out.steps_executed,
        "bound_used": out.bound_used,
    }
    _emit(ns, outputs, json.dumps(report, indent=2) + "\n")
    return 0 if out.met else 1


def cmd_hunt_sweep(ns, outputs: Outputs) -> int:
    from .hunt import adversary_sweep

    offsets = _pair(ns.offsets, ":", "--offsets") if ns.offsets else None
    if offsets is not None and offsets[0] > offsets[1]:
        raise UsageError("--offsets needs LO <= HI")
    report = adversary_sweep(ns.d, ns.n, _params(ns), offsets, _workers(ns))
    if ns.out:
        outputs.add(ns.out, report.to_json())
    sys.stdout.write(
        f"sweep: {'pass' if report.passed else 'FAIL'} ({report.scenarios} scenarios, "
        f"max meeting time {report.max_meeting_time}, bound {report.bound})\n"
    )
    return 0 if report.passed else 1


COMMANDS = {
    ("ues", "search"): cmd_ues_search,
    ("ues", "verify"): cmd_ues_verify,
    ("sues", "build"): cmd_sues_build,
    ("sues", "at"): cmd_sues_at,
    ("sues", "stream"): cmd_sues_stream,
    ("sues", "bounds"): cmd_sues_bounds,
    ("sues", "verify"): cmd_sues_verify,
    ("hunt", "run"): cmd_hunt_run,
    ("hunt", "sweep"): cmd_hunt_sweep,
}

ERRORS = (UsageError, GraphError, SequenceError, OracleError, OSError, ValueError)


def dispatch(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        ns = parse(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if ns.workers is not None and ns.workers < 1:
        sys.stderr.write("error: --workers must be >= 1\n")
        return 2
    outputs = Outputs()
    try:
        code = COMMANDS[(ns.group, ns.command)](ns, outputs)
    except ERRORS as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 2
    outputs.commit()
    return code


def main(argv: list[str] | None = None) -> None:
    sys.exit(dispatch(argv))


def _group_main(group: str, argv: list[str] | None) -> None:
    argv = list(sys.argv[1:] if argv is None else argv)
    sys.exit(dispatch([group, *argv]))


def sues_main(argv: list[str] | None = None) -> None:
    _group_main("sues", argv)


def ues_main(argv: list[str] | None = None) -> None:
    _group_main("ues", argv)


def hunt_main(argv: list[str] | None = None) -> None:
    _group_main("hunt", argv)

"""Command line: ``gen`` scripts, ``run`` them through the engine, ``bench`` work."""
from __future__ import annotations

import argparse
import json
import statistics
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

from .decomposition import WidthExceeded, nice_decomposition
from .engine import Engine, EngineConfig, Mode
from .generators import (
    PROPERTIES,
    Query,
    ScriptError,
    ScriptLine,
    format_script,
    gen_partial_ktree,
    mixed_script,
    parse_script,
    script_universe,
)
from .graph import EdgeChange, GraphError
from .oracles import exact_answer
from .plugins import get_plugin


@dataclass
class RunRecord:
    step: int
    line: str
    property: str | None
    answer: dict | None
    counters: dict
    phase: str | None
    epoch: int | None
    serving: bool

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


@dataclass
class RunResult:
    records: list[RunRecord] = field(default_factory=list)
    engine: Engine | None = None
    mismatch: str | None = None


def answer_ok(prop: str, ans, oracle, g) -> bool:
    plugin = get_plugin(prop)
    if ans.value != oracle.value:
        return False
    if plugin.optimization:
        return ans.witness is not None and len(ans.witness) == ans.value and plugin.check(g, ans.witness)
    return True


def run_script(lines: Sequence[ScriptLine], config: EngineConfig, verify: bool = False) -> RunResult:
    """Drive the engine over a script; one record per line."""
    eng = Engine(config)
    res = RunResult(engine=eng)
    try:
        for step, line in enumerate(lines, 1):
            prop = answer = None
            if isinstance(line, Query):
                prop = line.prop
                ans = eng.query(prop)
                answer = ans.to_json()
                if verify:
                    oracle = exact_answer(eng.graph, prop)
                    if not answer_ok(prop, ans, oracle, eng.graph):
                        res.mismatch = f"step {step}: {line}: engine {answer}, oracle {oracle.to_json()}"
            else:
                eng.on_change(line)
            ep = eng.epoch
            res.records.append(RunRecord(
                step=step,
                line=str(line),
                property=prop,
                answer=answer,
                counters=eng.snapshot_counters(),
                phase=eng.phase.value if eng.phase else None,
                epoch=ep.index if ep else None,
                serving=eng.serving,
            ))
            if res.mismatch:
                break
    finally:
        eng.close()
    return res


def _config(args, lines, properties=None) -> EngineConfig:
    n = args.n if args.n is not None else max(1, script_universe(lines))
    if properties is None:
        properties = sorted({l.prop for l in lines if isinstance(l, Query)}) or list(PROPERTIES)
    return EngineConfig(n=n, k_budget=args.k_budget, epoch_factor=args.epoch_factor,
                        mode=args.mode, seed=args.seed, properties=tuple(properties))


def _read_script(path: str) -> list[ScriptLine]:
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return parse_script(text)


def _summary(eng: Engine) -> dict:
    c = eng.counters
    return {
        "mode": eng.config.mode.value,
        "epoch_length": eng.f,
        "handovers": c.handovers,
        "foreground_units": c.foreground_units,
        "builder_units": c.builder_units,
        "bootstrap_units": c.bootstrap_units,
        "full_units": c.full_units,
        "total_units": c.builder_units + c.bootstrap_units + c.full_units,
        "skeleton_dp_states": c.skeleton_dp_states,
    }


def _dump_tables(eng: Engine) -> str:
    live = eng.live
    if live is None:
        return ""
    out = []
    for name, store in sorted(live.stores.items()):
        for t, tab in sorted(store.tables.items()):
            out.append(f"{name} {t.kind.value} {t.i0} {t.i1} {t.i2} {len(tab.entries)}\n")
    return "".join(out)


# -- subcommands ------------------------------------------------------------

def cmd_gen(args) -> int:
    if args.length is not None:
        lines = mixed_script(args.n, args.k, args.length, seed=args.seed, keep_prob=args.keep,
                             delete_prob=args.delete_prob, query_prob=args.query_prob)
    else:
        lines = list(gen_partial_ktree(args.n, args.k, args.keep, args.seed, args.delete_prob))
    text = format_script(lines)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_run(args) -> int:
    lines = _read_script(args.script)
    config = _config(args, lines)
    res = run_script(lines, config, verify=args.verify)
    body = "".join(r.to_json() + "\n" for r in res.records)
    if args.json and args.json != "-":
        Path(args.json).write_text(body)
    else:
        sys.stdout.write(body)
    eng = res.engine
    if args.dump_td:
        # decomposition of the final graph, not the (stale) serving one
        Path(args.dump_td).write_text(nice_decomposition(eng.graph, config.k_budget).dump())
    if args.dump_tables:
        Path(args.dump_tables).write_text(_dump_tables(eng))
    summ = _summary(eng)
    print(f"{len(res.records)} steps, " + ", ".join(f"{k}={v}" for k, v in summ.items()), file=sys.stderr)
    if res.mismatch:
        print(f"verify failed at {res.mismatch}", file=sys.stderr)
        return 1
    return 0


def bench(lines: Sequence[ScriptLine], config: EngineConfig) -> dict:
    """Run the script in epoch mode and in full-recompute mode."""
    out = {}
    for mode in (config.mode if config.mode is not Mode.FULL else Mode.INLINE, Mode.FULL):
        cfg = EngineConfig(config.n, config.k_budget, config.epoch_factor, mode, config.seed, config.properties)
        res = run_script(lines, cfg)
        per_step = [r.counters["table_units_built"] for r in res.records]
        serving = [r.counters["table_units_built"] for r in res.records if r.serving]
        summ = _summary(res.engine)
        summ["per_step_units"] = {
            "mean": statistics.fmean(per_step) if per_step else 0.0,
            "max": max(per_step, default=0),
        }
        summ["serving_steps"] = len(serving)
        summ["serving_max_units"] = max(serving, default=0)
        out["full" if mode is Mode.FULL else "epoch"] = summ
    full, ep = out["full"]["total_units"], out["epoch"]["total_units"]
    out["ratio"] = full / ep if ep else float("inf")
    return out


def cmd_bench(args) -> int:
    if args.script:
        lines = _read_script(args.script)
    else:
        from .engine import epoch_length
        length = args.length or 10 * epoch_length(args.n, args.epoch_factor)
        lines = mixed_script(args.n, args.k_budget, length, seed=args.seed, query_prob=args.query_prob)
    config = _config(args, lines, properties=args.properties)
    result = bench(lines, config)
    text = json.dumps(result, indent=2, sort_keys=True)
    if args.json and args.json != "-":
        Path(args.json).write_text(text + "\n")
    else:
        print(text)
    e, f = result["epoch"], result["full"]
    print(f"epoch total {e['total_units']} units vs full-recompute {f['total_units']} "
          f"(ratio {result['ratio']:.2f}); serving max units {e['serving_max_units']}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dyntw", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a partial k-tree change script")
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--k", type=int, default=2)
    g.add_argument("--keep", type=float, default=0.8)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--delete-prob", type=float, default=0.0)
    g.add_argument("--length", type=int, help="mixed script of this many lines (with queries)")
    g.add_argument("--query-prob", type=float, default=0.35)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    def engine_flags(p, modes):
        p.add_argument("--n", type=int, help="universe size (default: from the script)")
        p.add_argument("--k-budget", type=int, default=3)
        p.add_argument("--epoch-factor", type=float, default=1.0)
        p.add_argument("--mode", choices=modes, default="inline")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--json", help="write output here instead of stdout")

    r = sub.add_parser("run", help="run a script, one JSON record per line")
    engine_flags(r, ["inline", "background", "full-recompute"])
    r.add_argument("--script", required=True, help="script path, or - for stdin")
    r.add_argument("--verify", action="store_true", help="check every query against an oracle")
    r.add_argument("--dump-td")
    r.add_argument("--dump-tables")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="compare epoch and full-recompute table work")
    engine_flags(b, ["inline", "background"])
    b.add_argument("--script")
    b.add_argument("--length", type=int)
    b.add_argument("--query-prob", type=float, default=0.35)
    b.add_argument("--properties", nargs="+", choices=PROPERTIES, default=list(PROPERTIES))
    b.set_defaults(func=cmd_bench)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "bench" and not args.script and args.n is None:
        args.n = 512
    try:
        return args.func(args)
    except ScriptError as exc:
        print(f"script error: {exc}", file=sys.stderr)
        return 2
    except (GraphError, WidthExceeded) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()

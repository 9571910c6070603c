"""Experiment harness.

    colorsim run --model clique --gen gnp:1000,0.1 --trials 3 --seed 9 --out reports/run
    colorsim lca --gen gnp:4096,0.003 --seed 1 --query 17
    colorsim lca --gen gnp:4096,0.003 --seed 1 --sweep

Exit codes: 0 when every trial validated, 1 on a validation failure or a
violated runtime check, 2 on configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import io
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .bidding import color_list_instance, generate_good_instance
from .clique import CliqueConfig, run_clique_coloring
from .errors import ColorsimError, ConfigError, ParseError
from .graph import (ListColoringInstance, generate_graph, read_edge_list, read_palette_file,
                    validate_coloring)
from .lca import LcaConfig, LcaEngine, LcaOracle
from .mpc import MpcConfig, run_mpc_coloring
from .partition import Slack
from .shattering import analyze_bad_set
from .tape import derive_seed

log = logging.getLogger("colorsim")

MODELS = ("clique", "mpc", "lca", "bidding")

# knob name -> (config section, field, type)
KNOBS = {
    "cL": ("clique", "c_L", float),
    "lenzenRounds": ("clique", "lenzen_rounds", int),
    "cStop": ("clique", "c_stop", float),
    "cHd": ("clique", "c_hd", float),
    "eps": ("clique", "eps", float),
    "cQ": ("shared", "c_q", float),
    "cMin": ("shared", "c_min", float),
    "cBase": ("mpc", "c_base", float),
    "cMem": ("mpc", "c_mem", float),
    "machineSlack": ("mpc", "machine_slack", float),
    "minPartitionSteps": ("mpc", "min_partition_steps", int),
    "cQuery": ("lca", "c_query", float),
    "cComp": ("lca", "c_comp", float),
    "reuseDecoding": ("lca", "reuse_decoding", lambda s: s.lower() in ("1", "true", "yes")),
    "pStar": ("shared", "p_star", int),
    "slackEdges": ("slack", "edges", float),
    "slackLeftover": ("slack", "leftover", float),
    "slackPartDegree": ("slack", "part_degree", float),
    "slackLeftoverDegree": ("slack", "leftover_degree", float),
    "slackVertexDegree": ("slack", "vertex_degree", float),
}


@dataclasses.dataclass
class RunConfig:
    model: str = "clique"
    gen: str | None = None
    edge_list: str | None = None
    palette_file: str | None = None
    seed: int = 0
    trials: int = 1
    alpha: float = 0.5
    beta: float = 2.0
    c0: int = 8
    gamma: float | None = None
    out: str | None = None
    knobs: dict = dataclasses.field(default_factory=dict)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def parse_knobs(items) -> dict:
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"knob {item!r} is not key=value")
        key, value = item.split("=", 1)
        if key not in KNOBS:
            raise ConfigError(f"unknown knob {key!r}; known: {', '.join(sorted(KNOBS))}")
        try:
            out[key] = KNOBS[key][2](value)
        except ValueError:
            raise ConfigError(f"bad value for knob {key}: {value!r}") from None
    return out


def parse_gen(spec: str) -> tuple[str, list]:
    """``gnp:n,p`` | ``regular:n,d`` | ``gnpdeg:n,delta`` | ``good:n,delta[,palette]``."""
    if ":" not in spec:
        raise ConfigError(f"generator {spec!r} should look like model:args")
    model, args = spec.split(":", 1)
    try:
        values = [float(x) if "." in x or "e" in x.lower() else int(x) for x in args.split(",") if x]
    except ValueError:
        raise ConfigError(f"bad generator arguments {args!r}") from None
    arity = {"gnp": (2,), "regular": (2,), "gnpdeg": (2,), "good": (2, 3)}
    if model not in arity:
        raise ConfigError(f"unknown generator {model!r}")
    if len(values) not in arity[model]:
        raise ConfigError(f"generator {model} takes {arity[model]} arguments")
    return model, values


def _sections(cfg: RunConfig):
    clique = CliqueConfig(C0=cfg.c0, beta=cfg.beta)
    mpc = MpcConfig(alpha=cfg.alpha)
    lca = LcaConfig(C0=cfg.c0, beta=cfg.beta)
    slack = Slack()
    if cfg.gamma is not None:
        clique.gamma = cfg.gamma
        mpc.gamma = cfg.gamma
    shared_p_star = None
    for key, raw in cfg.knobs.items():
        section, fieldname, conv = KNOBS[key]
        value = conv(raw) if isinstance(raw, str) else raw
        if section == "shared":
            if fieldname == "p_star":
                shared_p_star = value
                clique.p_star = value
                lca.p_star = value
            else:
                setattr(clique, fieldname, value)
                setattr(mpc, fieldname, value)
        elif section == "slack":
            setattr(slack, fieldname, value)
        else:
            setattr({"clique": clique, "mpc": mpc, "lca": lca}[section], fieldname, value)
    clique.slack = slack
    mpc.slack = slack
    return clique, mpc, lca, shared_p_star


def build_instance(cfg: RunConfig, trial_seed: int) -> ListColoringInstance:
    if cfg.gen:
        model, v = parse_gen(cfg.gen)
        if model == "good":
            n, delta = int(v[0]), int(v[1])
            size = int(v[2]) if len(v) > 2 else 2 * delta + 1
            return generate_good_instance(n, delta, size, cfg.c0, cfg.beta, trial_seed).as_list_instance()
        if model == "gnpdeg":
            from .graph import gnp_for_max_degree
            graph = generate_graph("gnp", trial_seed, n=int(v[0]), p=gnp_for_max_degree(int(v[0]), int(v[1])))
        elif model == "gnp":
            graph = generate_graph("gnp", trial_seed, n=int(v[0]), p=float(v[1]))
        else:
            graph = generate_graph("regular", trial_seed, n=int(v[0]), d=int(v[1]))
    else:
        graph = read_edge_list(cfg.edge_list)
    if cfg.palette_file:
        return ListColoringInstance(graph, read_palette_file(cfg.palette_file, graph))
    return ListColoringInstance.with_uniform_palettes(graph)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.floating):
        return float(x)
    if isinstance(x, np.ndarray):
        return x.tolist()
    return x


def run_trial(cfg: RunConfig, t: int) -> dict:
    seed = derive_seed(cfg.seed, t)
    entry = {"trial": t, "seed": str(seed)}
    try:
        inst = build_instance(cfg, seed)
    except ColorsimError as exc:
        return {**entry, "valid": False, "error": f"{type(exc).__name__}: {exc}"}
    clique_cfg, mpc_cfg, lca_cfg, p_star = _sections(cfg)
    entry.update({"n": inst.n, "delta": inst.graph.max_degree, "edges": inst.graph.num_edges})
    try:
        if cfg.model == "clique":
            colors, trace = run_clique_coloring(inst, clique_cfg, seed)
            trace = trace.to_dict()
        elif cfg.model == "mpc":
            colors, trace = run_mpc_coloring(inst, cfg.alpha, mpc_cfg, seed)
            trace = trace.to_dict()
        elif cfg.model == "bidding":
            colors, res = color_list_instance(inst, seed, cfg.c0, cfg.beta, p_star)
            trace = {"model": "bidding", "iterations": res.trace, "k": res.params.k,
                     "cSequence": list(res.params.cseq.values), "fallback": res.params.fallback}
            entry["properties"] = {"badSet": analyze_bad_set(inst.graph, res.colors < 0).to_dict()}
        else:
            engine = LcaEngine(LcaOracle(inst, seed), lca_cfg)
            answers = [engine.color(v) for v in range(inst.n)]
            colors = np.array([a.color for a in answers], dtype=np.int64)
            totals = np.array([a.total for a in answers])
            trace = {"model": "lca", "cap": engine.cap, "maxQueries": int(totals.max(initial=0)),
                     "meanQueries": float(totals.mean()) if len(totals) else 0.0,
                     "maxRadius": max((a.radius for a in answers), default=0),
                     "overCap": int(np.sum(totals > engine.cap))}
    except (ColorsimError, AssertionError) as exc:
        return {**entry, "valid": False, "error": f"{type(exc).__name__}: {exc}"}
    report = validate_coloring(inst, colors)
    entry.update({"valid": report.ok, "validity": report.to_dict(), "trace": trace})
    return _jsonable(entry)


SUMMARY_FIELDS = ("trial", "seed", "model", "n", "delta", "edges", "valid", "rounds", "depth", "error")


def summary_rows(cfg: RunConfig, trials: list) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    w.writeheader()
    for tr in trials:
        trace = tr.get("trace", {})
        w.writerow({"trial": tr["trial"], "seed": tr["seed"], "model": cfg.model, "n": tr.get("n", ""),
                    "delta": tr.get("delta", ""), "edges": tr.get("edges", ""), "valid": tr["valid"],
                    "rounds": trace.get("rounds", ""), "depth": trace.get("depth", ""),
                    "error": tr.get("error", "")})
    return buf.getvalue()


def workers(trials: int) -> int:
    cap = os.environ.get("COLORSIM_THREADS")
    limit = int(cap) if cap and cap.isdigit() and int(cap) > 0 else (os.cpu_count() or 1)
    return max(1, min(limit, trials))


def validate_config(cfg: RunConfig):
    if cfg.model not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}")
    if cfg.trials < 0:
        raise ConfigError("trials must be non-negative")
    if bool(cfg.gen) == bool(cfg.edge_list):
        raise ConfigError("give exactly one of --gen and --edge-list")
    if cfg.gen:
        parse_gen(cfg.gen)
    if cfg.edge_list and not Path(cfg.edge_list).is_file():
        raise ConfigError(f"edge list {cfg.edge_list} not found")
    if cfg.palette_file and not Path(cfg.palette_file).is_file():
        raise ConfigError(f"palette file {cfg.palette_file} not found")
    if not 0 < cfg.alpha < 1:
        raise ConfigError("alpha must lie in (0, 1)")
    if cfg.edge_list and cfg.trials:
        # parse once so malformed files are configuration errors
        try:
            g = read_edge_list(cfg.edge_list)
            if cfg.palette_file:
                ListColoringInstance(g, read_palette_file(cfg.palette_file, g))
        except ColorsimError as exc:
            raise ConfigError(str(exc)) from None


def run(cfg: RunConfig) -> tuple[int, dict]:
    validate_config(cfg)
    jobs = workers(cfg.trials)
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            trials = list(pool.map(run_trial, [cfg] * cfg.trials, range(cfg.trials)))
    else:
        trials = [run_trial(cfg, t) for t in range(cfg.trials)]
    clique_cfg, mpc_cfg, lca_cfg, _ = _sections(cfg)
    resolved = {"clique": clique_cfg.to_dict(), "mpc": mpc_cfg.to_dict(), "lca": dataclasses.asdict(lca_cfg)}
    report = {"config": cfg.to_dict(), "resolved": _jsonable(resolved), "trials": trials,
              "timestamp": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())}
    if cfg.out:
        base = Path(cfg.out)
        base.parent.mkdir(parents=True, exist_ok=True)
        base.with_suffix(".json").write_text(json.dumps(report, indent=1, sort_keys=True) + "\n")
        base.with_suffix(".csv").write_text(summary_rows(cfg, trials))
    code = 0 if all(t["valid"] for t in trials) else 1
    return code, report


def _common(p: argparse.ArgumentParser):
    p.add_argument("--gen", help="gnp:n,p | gnpdeg:n,delta | regular:n,d | good:n,delta[,palette]")
    p.add_argument("--edge-list")
    p.add_argument("--palette-file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--beta", type=float, default=2.0)
    p.add_argument("--c0", type=int, default=8)
    p.add_argument("--knob", action="append", default=[], metavar="KEY=VALUE")
    p.add_argument("-v", "--verbose", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="colorsim", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command")
    r = sub.add_parser("run", help="run trials of a pipeline and write reports")
    _common(r)
    r.add_argument("--model", default="clique")
    r.add_argument("--trials", type=int, default=1)
    r.add_argument("--alpha", type=float, default=0.5)
    r.add_argument("--gamma", type=float)
    r.add_argument("--out")
    q = sub.add_parser("lca", help="answer LCA queries, one JSON line per vertex")
    _common(q)
    mode = q.add_mutually_exclusive_group(required=True)
    mode.add_argument("--query", type=int, action="append")
    mode.add_argument("--sweep", action="store_true")
    return parser


class _ArgError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _ArgError(message)


def _lca(args) -> int:
    cfg = RunConfig(model="lca", gen=args.gen, edge_list=args.edge_list, palette_file=args.palette_file,
                    seed=args.seed, beta=args.beta, c0=args.c0, knobs=parse_knobs(args.knob))
    validate_config(cfg)
    inst = build_instance(cfg, cfg.seed)
    _, _, lca_cfg, _ = _sections(cfg)
    engine = LcaEngine(LcaOracle(inst, cfg.seed), lca_cfg)
    targets = range(inst.n) if args.sweep else args.query
    colors = np.full(inst.n, -1, dtype=np.int64)
    for v in targets:
        if not 0 <= v < inst.n:
            raise ConfigError(f"vertex {v} out of range")
        ans = engine.color(v)
        colors[v] = ans.color
        print(json.dumps(ans.to_dict(), sort_keys=True))
    if args.sweep:
        return 0 if validate_coloring(inst, colors).ok else 1
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in ("run", "lca", "-h", "--help"):
        argv = ["run"] + argv
    parser = make_parser()
    parser.__class__ = _Parser
    for action in parser._subparsers._group_actions:
        for p in action.choices.values():
            p.__class__ = _Parser
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(message)s")
        if args.command == "lca":
            return _lca(args)
        cfg = RunConfig(model=args.model, gen=args.gen, edge_list=args.edge_list,
                        palette_file=args.palette_file, seed=args.seed, trials=args.trials,
                        alpha=args.alpha, beta=args.beta, c0=args.c0, gamma=args.gamma, out=args.out,
                        knobs=parse_knobs(args.knob))
        code, report = run(cfg)
    except (_ArgError, ConfigError, ParseError) as exc:
        print(f"colorsim: error: {exc}", file=sys.stderr)
        return 2
    except ColorsimError as exc:
        print(f"colorsim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    failed = sum(not t["valid"] for t in report["trials"])
    print(f"{cfg.model}: {len(report['trials'])} trials, {failed} failed", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())

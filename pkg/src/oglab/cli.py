"""Command-line front end: ``oglab {gen,profile,train,evaluate,aggregate,report}``.

Settings come from (lowest to highest precedence) built-in defaults, a flat
JSON object given with ``--config`` and explicit flags. Keys in the config file
use the flag names with underscores (``eval_every``); training runs also accept
any hyperparameter name. Every effective setting is written to the run
directory and to the first line of the run log.

Exit codes: 0 success, 2 usage or configuration error, 3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .baselines import ALGORITHMS, HyperParams, load_bundle
from .envs import REGISTRY, make_env, oracle_bounds
from .errors import ConfigurationError, OglabError, ParseError
from .evalstats import (
    PUBLISHED_TABLES,
    Column,
    NormalizationBounds,
    ResultTable,
    annotate_table,
    bootstrap_ci,
    ingest_result_table,
    iqm,
    matches_printed,
    normalize,
    normalize_by_reference,
    performance_profile,
    published_table,
    read_references,
    render_table,
)
from .harness import (
    EvalProtocol,
    ExperimentResult,
    JsonlSink,
    checkpoint_report,
    evaluate,
    fixed_clock,
    preferred_by_checkpoint,
    run_experiment,
    train_offline,
)
from .vault import QUALITIES, generate_dataset, profile, read_vault, write_vault

log = logging.getLogger("oglab")

HP_FIELDS = {f.name for f in fields(HyperParams)}

DEFAULTS: dict[str, dict] = {
    "gen": {"env": "gridspread-3", "quality": "good", "episodes": 3000, "seed": 0, "out": None},
    "profile": {"vault": None, "out": None},
    "train": {"algo": None, "vault": None, "updates": 5000, "eval_every": 250, "eval_episodes": 32, "seeds": 10,
              "checkpoints": [], "workers": 1, "out": None, "save_checkpoints": False, "fixed_clock": False,
              "set": []},
    "evaluate": {"checkpoint": None, "episodes": 32, "seed": 0, "eval_index": 0, "out": None},
    "aggregate": {"results": [], "metric": "final", "checkpoints": [], "normalize": None, "resamples": 2000,
                  "confidence": 0.95, "out": None},
    "report": {"table": None, "results": [], "metric": "final", "normalize_by_sota": None, "taus": 51,
               "check_published": False, "out": None},
}

REQUIRED = {"profile": ["vault"], "train": ["algo", "vault"], "evaluate": ["checkpoint"]}


def default_out() -> Path:
    return Path(os.environ.get("OGLAB_OUT", "oglab_out"))


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _help(cmd: str, key: str, text: str) -> str:
    return f"{text} (default: {DEFAULTS[cmd][key]!r})"


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    p = argparse.ArgumentParser(prog="oglab", description="Offline multi-agent RL laboratory.")
    p.add_argument("--version", action="version", version=f"oglab {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def cmd(name: str, help_text: str) -> argparse.ArgumentParser:
        sp = sub.add_parser(name, help=help_text, description=help_text, argument_default=S)
        sp.add_argument("--config", help="flat JSON object of settings; explicit flags override it")
        return sp

    g = cmd("gen", "generate a vault of behaviour-policy episodes")
    g.add_argument("--env", choices=sorted(REGISTRY), help=_help("gen", "env", "environment id"))
    g.add_argument("--quality", choices=list(QUALITIES), help=_help("gen", "quality", "behaviour tier"))
    g.add_argument("--episodes", type=int, help=_help("gen", "episodes", "number of episodes"))
    g.add_argument("--seed", type=int, help=_help("gen", "seed", "generation seed"))
    g.add_argument("--out", help="vault path (default: $OGLAB_OUT/<env>-<quality>.vlt)")

    pr = cmd("profile", "print the statistical profile of a vault")
    pr.add_argument("--vault", help="vault path (required)")
    pr.add_argument("--out", help="write the profile JSON here instead of stdout")

    t = cmd("train", "train an algorithm on a vault under the fixed-budget protocol")
    t.add_argument("--algo", choices=sorted(ALGORITHMS), help="algorithm id (required)")
    t.add_argument("--vault", help="vault path (required)")
    t.add_argument("--updates", type=int, help=_help("train", "updates", "update budget"))
    t.add_argument("--eval-every", dest="eval_every", type=int, help=_help("train", "eval_every", "updates between evaluations"))
    t.add_argument("--eval-episodes", dest="eval_episodes", type=int,
                   help=_help("train", "eval_episodes", "episodes per evaluation"))
    t.add_argument("--seeds", type=int, help=_help("train", "seeds", "number of seeds, run as 0..seeds-1"))
    t.add_argument("--checkpoints", type=_int_list, help="extra evaluation/checkpoint updates, comma separated")
    t.add_argument("--workers", type=int, help=_help("train", "workers", "seeds trained concurrently (threads)"))
    t.add_argument("--out", help="run directory (default: $OGLAB_OUT/<algo>-<env>-<quality>)")
    t.add_argument("--save-checkpoints", dest="save_checkpoints", action="store_true",
                   help="save parameters at each checkpoint and at the end of the budget")
    t.add_argument("--fixed-clock", dest="fixed_clock", action="store_true",
                   help="log wall_clock_s as 0 so logs are byte-reproducible")
    t.add_argument("--set", action="append", metavar="KEY=VALUE",
                   help=f"hyperparameter override, repeatable; keys: {', '.join(sorted(HP_FIELDS))}")

    e = cmd("evaluate", "evaluate a saved checkpoint with greedy actions")
    e.add_argument("--checkpoint", help="checkpoint directory written by train (required)")
    e.add_argument("--episodes", type=int, help=_help("evaluate", "episodes", "evaluation episodes"))
    e.add_argument("--seed", type=int, help=_help("evaluate", "seed", "run seed for evaluation resets"))
    e.add_argument("--eval-index", dest="eval_index", type=int, help=_help("evaluate", "eval_index", "evaluation index"))
    e.add_argument("--out", help="write the result JSON here instead of stdout")

    a = cmd("aggregate", "aggregate experiment summaries: mean, std, IQM, bootstrap interval, checkpoints")
    a.add_argument("--results", nargs="+", help="summary.json files written by train")
    a.add_argument("--metric", choices=["final", "max", "average"], help=_help("aggregate", "metric", "run metric"))
    a.add_argument("--checkpoints", type=_int_list, help="budget checkpoints to report, comma separated")
    a.add_argument("--normalize", choices=["oracle"], help="normalise with random/expert oracle returns")
    a.add_argument("--resamples", type=int, help=_help("aggregate", "resamples", "bootstrap resamples"))
    a.add_argument("--confidence", type=float, help=_help("aggregate", "confidence", "bootstrap confidence"))
    a.add_argument("--out", help="directory for aggregate.json and aggregate.csv (default: stdout only)")

    r = cmd("report", "bold/star annotated result table, SOTA ratios and performance-profile data")
    r.add_argument("--table", help=f"result table file or bundled name ({', '.join(PUBLISHED_TABLES)})")
    r.add_argument("--results", nargs="+", help="summary.json files to tabulate (rows: env/quality)")
    r.add_argument("--metric", choices=["final", "max", "average"], help=_help("report", "metric", "run metric"))
    r.add_argument("--normalize-by-sota", dest="normalize_by_sota", metavar="REFS",
                   help="reference scores file (task,quality,score) for ratio-to-best output")
    r.add_argument("--taus", type=int, help=_help("report", "taus", "points on the profile tau grid"))
    r.add_argument("--check-published", dest="check_published", action="store_true",
                   help="compare recomputed bold/star flags with the ones printed in the table")
    r.add_argument("--out", help="output directory (default: $OGLAB_OUT/report)")
    return p


def resolve(command: str, ns: argparse.Namespace) -> dict:
    """Defaults, then the config file, then explicit flags."""
    settings = dict(DEFAULTS[command])
    explicit = {k: v for k, v in vars(ns).items() if k not in ("command", "config", "verbose")}
    if getattr(ns, "config", None):
        try:
            with open(ns.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except OSError as e:
            raise ConfigurationError(f"cannot read config {ns.config}: {e}") from None
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"config {ns.config} is not valid JSON: {e}") from None
        if not isinstance(cfg, dict):
            raise ConfigurationError("config file must hold a flat JSON object")
        allowed = set(settings) | (HP_FIELDS if command == "train" else set())
        unknown = set(cfg) - allowed
        if unknown:
            raise ConfigurationError(f"unknown settings for {command}: {sorted(unknown)}")
        settings.update(cfg)
    settings.update(explicit)
    missing = [k for k in REQUIRED.get(command, []) if not settings.get(k)]
    if missing:
        raise ConfigurationError(f"{command} needs --{' --'.join(m.replace('_', '-') for m in missing)}")
    return settings


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def hyperparams(algo: str, settings: dict) -> HyperParams:
    overrides = {k: settings[k] for k in HP_FIELDS if k in settings}
    for item in settings.get("set") or []:
        key, sep, value = item.partition("=")
        if not sep or key not in HP_FIELDS:
            raise ConfigurationError(f"--set expects KEY=VALUE with KEY a hyperparameter, got {item!r}")
        overrides[key] = _parse_value(value)
    try:
        return HyperParams.for_algo(algo, **overrides)
    except TypeError as e:
        raise ConfigurationError(str(e)) from None


def _emit(payload, out: str | None) -> None:
    text = json.dumps(payload, indent=1, sort_keys=True)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n")
    print(text)


# -- subcommands --------------------------------------------------------------------

def cmd_gen(s: dict) -> int:
    vault = generate_dataset(s["env"], s["quality"], s["episodes"], s["seed"])
    out = Path(s["out"]) if s["out"] else default_out() / f"{s['env']}-{s['quality']}.vlt"
    write_vault(out, vault.header, vault.episodes)
    prof = profile(vault)
    print(json.dumps({"vault": str(out), "settings": s, "profile": prof.to_dict()}, sort_keys=True))
    return 0


def cmd_profile(s: dict) -> int:
    vault = read_vault(s["vault"])
    h = vault.header
    _emit({"env_id": h.env_id, "quality": h.quality, "behaviour_policy": h.behaviour_policy,
           "creation_seed": h.creation_seed, **profile(vault).to_dict()}, s["out"])
    return 0


def cmd_train(s: dict) -> int:
    vault = read_vault(s["vault"])
    hp = hyperparams(s["algo"], s)
    protocol = EvalProtocol(eval_episodes=s["eval_episodes"], eval_every=s["eval_every"], num_seeds=s["seeds"],
                            update_budget=s["updates"], checkpoints=tuple(s["checkpoints"]))
    out = Path(s["out"]) if s["out"] else default_out() / f"{s['algo']}-{vault.header.env_id}-{vault.header.quality}"
    out.mkdir(parents=True, exist_ok=True)
    effective = {**{k: v for k, v in s.items() if k not in HP_FIELDS and k != "set"},
                 "hyperparameters": hp.to_dict(), "protocol": protocol.to_dict(),
                 "env_id": vault.header.env_id, "quality": vault.header.quality, "version": __version__}
    (out / "config.json").write_text(json.dumps(effective, indent=1, sort_keys=True) + "\n")
    log_path = out / "run_log.jsonl"
    log_path.unlink(missing_ok=True)
    sink = JsonlSink(log_path)
    sink({"event": "settings", **effective})
    log.info("settings: %s", json.dumps(effective, sort_keys=True))
    clock = fixed_clock if s["fixed_clock"] else None
    kw = {} if clock is None else {"clock": clock}
    ckpt = out / "checkpoints" if s["save_checkpoints"] else None
    if protocol.num_seeds == 1:
        from .harness import config_hash, vault_digest

        cfg = config_hash(s["algo"], vault_digest(vault), hp, protocol)
        rec = train_offline(s["algo"], vault, hp, protocol, 0, sink=sink, cfg_hash=cfg,
                            checkpoint_dir=None if ckpt is None else ckpt / "seed_0", **kw)
        result = ExperimentResult(s["algo"], vault.header.env_id, cfg, protocol, [rec], quality=vault.header.quality)
    else:
        result = run_experiment(s["algo"], vault, hp, protocol, sink=sink, workers=s["workers"],
                                checkpoint_root=ckpt, **kw)
    (out / "summary.json").write_text(json.dumps(result.to_dict(), indent=1, sort_keys=True) + "\n")
    agg = result.aggregate()
    print(json.dumps({"run_dir": str(out), "seeds": len(result.records), "failed": result.failed,
                      **{m: f"{v[0]:.4f}±{v[1]:.4f}" for m, v in agg.items()}}, sort_keys=True, ensure_ascii=False))
    if result.failed:
        for seed, msg in result.errors:
            print(f"seed {seed} failed: {msg}", file=sys.stderr)
        return 4 if any("NumericError" in msg for _, msg in result.errors) else 1
    return 0


def cmd_evaluate(s: dict) -> int:
    bundle = load_bundle(s["checkpoint"])
    protocol = EvalProtocol(eval_episodes=s["episodes"], eval_every=1, num_seeds=1, update_budget=1)
    mean = evaluate(bundle, make_env(bundle.env_id), protocol, s["seed"], s["eval_index"])
    _emit({"checkpoint": str(s["checkpoint"]), "algo_id": bundle.algo_id, "env_id": bundle.env_id,
           "updates": bundle.updates, "episodes": s["episodes"], "seed": s["seed"], "eval_index": s["eval_index"],
           "mean_return": mean}, s["out"])
    return 0


def _load_results(paths: Sequence[str]) -> list[ExperimentResult]:
    if not paths:
        raise ConfigurationError("no --results files given")
    out = []
    for p in paths:
        try:
            with open(p, encoding="utf-8") as fh:
                out.append(ExperimentResult.from_dict(json.load(fh)))
        except (KeyError, TypeError, json.JSONDecodeError) as e:
            raise ParseError(f"{p} is not an experiment summary: {e}") from None
    return out


def cmd_aggregate(s: dict) -> int:
    results = _load_results(s["results"])
    bounds_cache: dict[str, NormalizationBounds] = {}
    rows = []
    for res in results:
        vals = res.values(s["metric"])
        if s["normalize"] == "oracle":
            if res.env_id not in bounds_cache:
                bounds_cache[res.env_id] = NormalizationBounds(*oracle_bounds(res.env_id, 200, 0))
            vals = np.array([normalize(v, bounds_cache[res.env_id]) for v in vals])
        row = {"algo_id": res.algo_id, "env_id": res.env_id, "quality": res.quality, "n": len(vals),
               "failed": res.failed, "mean": float(vals.mean()), "std": float(vals.std()), "iqm": iqm(vals)}
        if len(vals) >= 2:
            row["ci_lo"], row["ci_hi"] = bootstrap_ci(vals, "mean", s["resamples"], s["confidence"])
        if s["checkpoints"]:
            row["checkpoints"] = [{"update": c.update, "mean": c.mean, "std": c.std}
                                  for c in checkpoint_report(res, s["checkpoints"])]
        rows.append(row)
    payload = {"settings": s, "rows": rows,
               "bounds": {k: [b.s_random, b.s_expert] for k, b in bounds_cache.items()}}
    if s["checkpoints"]:
        groups: dict[tuple[str, str], dict[str, ExperimentResult]] = {}
        for res in results:
            groups.setdefault((res.env_id, res.quality), {})[res.algo_id] = res
        payload["preferred"] = [{"env_id": k[0], "quality": k[1],
                                 "by_checkpoint": {str(c): a for c, a in preferred_by_checkpoint(g, s["checkpoints"]).items()}}
                                for k, g in groups.items() if len(g) > 1]
    if s["out"]:
        out = Path(s["out"])
        out.mkdir(parents=True, exist_ok=True)
        (out / "aggregate.json").write_text(json.dumps(payload, indent=1, sort_keys=True) + "\n")
        cols = ["algo_id", "env_id", "quality", "n", "mean", "std", "iqm", "ci_lo", "ci_hi"]
        lines = [",".join(cols)] + [",".join(str(r.get(c, "")) for c in cols) for r in rows]
        (out / "aggregate.csv").write_text("\n".join(lines) + "\n")
    print(json.dumps(payload, indent=1, sort_keys=True))
    return 0


def table_from_results(results: Sequence[ExperimentResult], metric: str) -> ResultTable:
    algos = list(dict.fromkeys(r.algo_id for r in results))
    keys = list(dict.fromkeys((r.env_id, r.quality) for r in results))
    n_of = {}
    cells = [[None] * len(algos) for _ in keys]
    for r in results:
        st = r.summary_stat(metric)
        cells[keys.index((r.env_id, r.quality))][algos.index(r.algo_id)] = st
        n_of[r.algo_id] = max(n_of.get(r.algo_id, 0), st.n)
    return ResultTable([Column(a, n_of[a], "ours") for a in algos], keys, cells)


def cmd_report(s: dict) -> int:
    if bool(s["table"]) == bool(s["results"]):
        raise ConfigurationError("report needs exactly one of --table or --results")
    if s["table"]:
        table = published_table(s["table"]) if s["table"] in PUBLISHED_TABLES else ingest_result_table(s["table"])
    else:
        table = table_from_results(_load_results(s["results"]), s["metric"])
    annotated = annotate_table(table)
    out = Path(s["out"]) if s["out"] else default_out() / "report"
    out.mkdir(parents=True, exist_ok=True)
    rendered = render_table(annotated)
    (out / "annotated.csv").write_text(rendered)

    ann_lines = ["task,quality,algo,mean,std,n,bold,star,t,df,p"]
    for row in annotated.rows:
        for j, (col, cell) in enumerate(zip(annotated.columns, row.cells)):
            if cell is None:
                continue
            tr = row.tests[j]
            stat = ("", "", "") if tr is None else (f"{tr.t:.6g}", f"{tr.df:.6g}", f"{tr.p:.6g}")
            ann_lines.append(",".join([*row.key, col.algo, f"{cell.mean}", f"{cell.std}", str(cell.n),
                                       str(j == row.bold).lower(), str(row.starred[j]).lower(), *stat]))
    (out / "annotations.csv").write_text("\n".join(ann_lines) + "\n")

    refs = read_references(s["normalize_by_sota"]) if s["normalize_by_sota"] else None
    scores: dict[str, list[float]] = {c.algo: [] for c in annotated.columns}
    ratio_lines = ["task,quality,algo,ratio"]
    for row in annotated.rows:
        present = [c.mean for c in row.cells if c is not None]
        if refs is not None:
            if row.key not in refs:
                raise ConfigurationError(f"no reference score for {row.key[0]}/{row.key[1]}")
            ref = refs[row.key]
        else:
            ref = max(present)
        for col, cell in zip(annotated.columns, row.cells):
            if cell is None:
                continue
            ratio = normalize_by_reference(cell.mean, ref)
            scores[col.algo].append(ratio)
            ratio_lines.append(f"{row.key[0]},{row.key[1]},{col.algo},{ratio:.6g}")
    (out / "sota_ratios.csv").write_text("\n".join(ratio_lines) + "\n")

    pooled = [v for vals in scores.values() for v in vals]
    taus = np.linspace(min(0.0, min(pooled)), max(pooled), max(int(s["taus"]), 2))
    prof_lines = ["algo,tau,fraction"]
    for algo, vals in scores.items():
        if vals:
            for tau, frac in performance_profile(vals, taus).rows():
                prof_lines.append(f"{algo},{tau:.6g},{frac:.6g}")
    (out / "profile.csv").write_text("\n".join(prof_lines) + "\n")

    print(rendered, end="")
    if s["check_published"]:
        if not any(any(r) for r in table.printed_bold):
            raise ConfigurationError("the table carries no printed annotations to check")
        bad = 0
        for key in table.rows:
            ok = matches_printed(table, annotated, *key)
            bad += not ok
            print(f"{'MATCH' if ok else 'DIFF '} {key[0]}/{key[1]}")
        print(f"{len(table.rows) - bad}/{len(table.rows)} rows match the printed annotations")
    print(f"wrote {out}/annotated.csv, annotations.csv, sota_ratios.csv, profile.csv", file=sys.stderr)
    return 0


COMMANDS = {"gen": cmd_gen, "profile": cmd_profile, "train": cmd_train, "evaluate": cmd_evaluate,
            "aggregate": cmd_aggregate, "report": cmd_report}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s", stream=sys.stderr)
    try:
        settings = resolve(ns.command, ns)
        return COMMANDS[ns.command](settings)
    except OglabError as e:
        print(f"oglab {ns.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return e.exit_code
    except FileNotFoundError as e:
        print(f"oglab {ns.command}: file not found: {e.filename}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

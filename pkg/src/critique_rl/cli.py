"""Command-line entry point: ``critique-rl <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .data import ArgumentSet, argument_from_dict, dump_dataset, load_dataset, render_critique
from .judge import JudgeClient, JudgeResponse, remote_similarity
from .prompts import render_prompt
from .report import emit_report
from .similarity import compute_similarity
from .tournament import GrmJudge, OracleJudge, bon_select, double_elimination, feedback_edit
from .training import REGIMES, TrainConfig, experiment_from_config, load_config, run_experiment


def _config(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
        changes["env_seed"] = args.seed
    if getattr(args, "regime", None):
        changes["regime"] = args.regime
    return cfg.replace(**changes) if changes else cfg


def _client(args) -> JudgeClient:
    return JudgeClient(cache_dir=args.cache_dir, offline=args.offline)


def _emit(obj, out):
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


# --- subcommands ---------------------------------------------------------------

def cmd_gen_data(args):
    cfg = _config(args)
    _, samples = experiment_from_config(cfg)
    out = Path(args.out or "dataset.jsonl")
    out.parent.mkdir(parents=True, exist_ok=True)
    dump_dataset(samples, out)
    n_h = sum(s.has_critique for s in samples)
    print(f"wrote {len(samples)} samples ({n_h} with critiques) to {out}")


def cmd_train(args):
    cfg = _config(args)
    env, samples = experiment_from_config(cfg)
    out = Path(args.out or f"runs/{cfg.regime}_seed{cfg.seed}")
    result = run_experiment(cfg, env, samples, out)
    last = result.metrics[-1] if result.metrics else None
    print(f"{cfg.regime}: {cfg.steps} steps -> {out / 'metrics.csv'}")
    if last is not None:
        print(f"final outcome_accuracy={last.outcome_accuracy:.4f} "
              f"mean_similarity_f1={last.mean_similarity_f1:.4f}")


def _tournament_inputs(args):
    """Candidates and a judge. The local oracle, without a candidates file,
    builds ``n`` synthetic responses whose hidden quality it can read back."""
    if args.candidates:
        candidates = json.loads(Path(args.candidates).read_text(encoding="utf-8"))
        if args.judge == "local-oracle":
            raise SystemExit("the local oracle only judges its own synthetic candidates; use --judge remote")
        return candidates, None
    if args.judge == "remote":
        raise SystemExit("--judge remote needs --candidates")
    rng = np.random.default_rng(args.seed or 0)
    quality = rng.permutation(args.n)
    candidates = [f"candidate {i} (quality {int(q)})" for i, q in enumerate(quality)]
    return candidates, {c: int(q) for c, q in zip(candidates, quality)}


def _pairwise_judge(args, quality):
    if quality is not None:
        return OracleJudge(quality.__getitem__)
    return GrmJudge(_client(args), args.query)


def _run_tournament(args, fn):
    candidates, quality = _tournament_inputs(args)
    result = fn(candidates, _pairwise_judge(args, quality), args.seed or 0)
    doc = {
        "winner": result.winner,
        "winner_text": candidates[result.winner],
        "ranking": result.ranking,
        "pointwise_scores": {str(k): v for k, v in result.pointwise_scores.items()},
        "match_log": [[m.a, m.b, m.winner, m.swapped] for m in result.match_log],
    }
    if quality is not None:
        doc["true_best"] = int(max(range(len(candidates)), key=lambda i: quality[candidates[i]]))
    _emit(doc, args.out)


def cmd_eval_bon(args):
    _run_tournament(args, bon_select)


def cmd_eval_double_elim(args):
    if args.n < 2 and not args.candidates:
        raise SystemExit("double elimination needs --n >= 2")
    _run_tournament(args, double_elimination)


class _LocalEditor:
    """Offline stand-in for the edit model: returns the preferred response unchanged."""

    def call(self, template_id, bindings):
        return JudgeResponse(template_id, render_prompt(template_id, bindings),
                             bindings["response_A"], bindings["response_A"])


class _LocalGrm(OracleJudge):
    def critique(self, a, b):
        return f"Chatbot A's response ({a}) is better than Chatbot B's ({b})."


def cmd_feedback_edit(args):
    candidates, quality = _tournament_inputs(args)
    if quality is not None:
        judge, editor = _LocalGrm(quality.__getitem__), _LocalEditor()
    else:
        client = _client(args)
        judge, editor = GrmJudge(client, args.query), client
    text = feedback_edit(candidates, judge, editor, args.query, args.seed or 0)
    _emit({"edited": text}, args.out)


def _read_generated(path):
    out = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            obj = json.loads(line)
            args = ArgumentSet(tuple(argument_from_dict(a, lineno) for a in obj.get("critique", [])))
            out[obj["id"]] = (args, obj.get("critique_text"))
    return out


def cmd_score(args):
    """Similarity of generated critiques (JSONL: id, critique[, critique_text])
    to the dataset's human critiques."""
    if not args.dataset or not args.critiques:
        raise SystemExit("score needs --dataset and --critiques")
    samples = {s.id: s for s in load_dataset(args.dataset)}
    generated = _read_generated(args.critiques)
    client = _client(args) if args.judge == "remote" else None
    rows = []
    for sid, (gen, gen_text) in generated.items():
        sample = samples.get(sid)
        if sample is None or not sample.has_critique:
            continue
        if client is None:
            scores = compute_similarity(sample.human_critique, gen, args.mode)
        else:
            ref_text = sample.human_critique_text or render_critique(sample.human_critique)
            scores = remote_similarity(client, ref_text, gen_text or render_critique(gen), args.mode)
        rows.append({"id": sid, **scores.rounded()})
    text = "".join(json.dumps(r, sort_keys=True) + "\n" for r in rows)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def cmd_report(args):
    if not args.metrics:
        raise SystemExit("report needs at least one metrics CSV")
    written = emit_report(args.metrics, args.out or "report")
    for p in written:
        print(p)


# --- parser ----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value training config file")
    common.add_argument("--seed", type=int)
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--judge", choices=("local-oracle", "remote"), default="local-oracle")
    common.add_argument("--cache-dir", default=".judge_cache")
    common.add_argument("--offline", action="store_true", help="serve remote judge calls from the cache only")

    parser = argparse.ArgumentParser(prog="critique-rl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", parents=[common], help="write a synthetic JSONL dataset")
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", parents=[common], help="run one training regime")
    p.add_argument("--regime", choices=REGIMES)
    p.set_defaults(func=cmd_train)

    for name, func, help_text in (("eval-bon", cmd_eval_bon, "best-of-N tournament selection"),
                                  ("eval-double-elim", cmd_eval_double_elim, "double-elimination ranking"),
                                  ("feedback-edit", cmd_feedback_edit, "select, critique and edit")):
        p = sub.add_parser(name, parents=[common], help=help_text)
        p.add_argument("--n", type=int, default=8, help="number of synthetic candidates")
        p.add_argument("--candidates", help="JSON list of response texts")
        p.add_argument("--query", default="")
        p.set_defaults(func=func)

    p = sub.add_parser("score", parents=[common], help="critique similarity against human critiques")
    p.add_argument("--dataset")
    p.add_argument("--critiques")
    p.add_argument("--mode", choices=("core", "all"), default="core")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("report", parents=[common], help="plots and summary from metrics CSVs")
    p.add_argument("metrics", nargs="*")
    p.set_defaults(func=cmd_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    args.func(args)
    return 0


if __name__ == "__main__":
    sys.exit(main())

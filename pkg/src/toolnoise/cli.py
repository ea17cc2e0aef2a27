"""Command-line orchestration: generate, run, score, augment, report.

All randomness flows from the --seed flag; every command is byte-idempotent
for identical inputs and seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import random
import sys
from pathlib import Path
from typing import Sequence

from . import augment as aug
from . import noise as nz
from .backend import BackendConfig, make_backend, run_batch
from .catalog import CatalogError, canonical_dumps, parse_catalog, serialize_catalog
from .evaluation import (
    TranscriptEntry,
    evaluate_transcript_entry,
    transcript_entry_from_dict,
    transcript_entry_to_dict,
)
from .noise import NoiseLevel, build_environment, parse_environment, serialize_environment
from .stats import build_report, render_table

logger = logging.getLogger(__name__)

ALL_LEVELS = [lv.value for lv in NoiseLevel]


def _config_hash(payload: dict) -> str:
    return hashlib.sha256(
        json.dumps(payload, sort_keys=True).encode("utf-8")
    ).hexdigest()[:16]


def _parse_levels(raw: str) -> list[NoiseLevel]:
    levels = []
    for token in raw.split(","):
        token = token.strip().lower()
        if not token:
            continue
        if token == "all":
            return [NoiseLevel(v) for v in ALL_LEVELS]
        levels.append(NoiseLevel(token))
    if not levels:
        raise ValueError("levels must be non-empty")
    return levels


def _env_path(out: Path, level: NoiseLevel) -> Path:
    return out / "environments" / f"{level.value}.json"


def _transcript_path(out: Path, level: NoiseLevel) -> Path:
    return out / "transcripts" / f"{level.value}.jsonl"


def cmd_generate(args: argparse.Namespace) -> int:
    out = Path(args.out)
    cases = parse_catalog(Path(args.catalog).read_bytes())
    if args.scenario:
        cases = [c for c in cases if c.scenario == args.scenario]
    levels = _parse_levels(args.levels)
    (out / "environments").mkdir(parents=True, exist_ok=True)
    counts: dict[str, int] = {}
    for level in levels:
        env = build_environment(cases, level, args.seed)
        _env_path(out, level).write_text(serialize_environment(env), encoding="utf-8")
        counts[level.value] = len(env)
    manifest = {
        "seed": args.seed,
        "config_hash": _config_hash(
            {"catalog": serialize_catalog(cases), "levels": [l.value for l in levels], "seed": args.seed}
        ),
        "counts": counts,
    }
    (out / "manifest.json").write_text(canonical_dumps(manifest), encoding="utf-8")
    print(f"generated {sum(counts.values())} cases across {len(levels)} level(s) -> {out}")
    return 0


def _load_answers(path: str | None) -> dict[str, str]:
    if not path:
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {str(k): str(v) for k, v in data.items()}


def cmd_run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    levels = _parse_levels(args.levels)
    config = BackendConfig(
        kind=args.backend,
        endpoint=args.endpoint,
        model_name=args.model,
        concurrency_limit=args.concurrency,
    )
    backend = make_backend(config, answers=_load_answers(args.answers))
    (out / "transcripts").mkdir(parents=True, exist_ok=True)
    for level in levels:
        env_path = _env_path(out, level)
        if not env_path.exists():
            print(f"error: environment file missing: {env_path}", file=sys.stderr)
            return 1
        env = parse_environment(env_path.read_bytes())
        tpath = _transcript_path(out, level)
        existing: dict[str, TranscriptEntry] = {}
        if tpath.exists():
            for line in tpath.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    entry = transcript_entry_from_dict(json.loads(line))
                    if entry.error is None:
                        existing[entry.case_id] = entry
        pending = [c for c in env if c.id not in existing]
        results = run_batch(pending, backend, config.concurrency_limit)
        for res in results:
            existing[res.case_id] = TranscriptEntry(
                case_id=res.case_id, output=res.text, error=res.error
            )
        # Rewrite in environment order so resumed runs emit identical bytes.
        lines = [
            json.dumps(transcript_entry_to_dict(existing[c.id]), ensure_ascii=False)
            for c in env
            if c.id in existing
        ]
        tpath.write_text("\n".join(lines) + "\n", encoding="utf-8")
        failures = sum(1 for c in env if existing.get(c.id) and existing[c.id].error)
        print(f"{level.value}: {len(lines)} transcript(s), {failures} failure(s)")
    return 0


def cmd_score(args: argparse.Namespace) -> int:
    out = Path(args.out)
    levels = _parse_levels(args.levels)
    records = []
    per_case = []
    for level in levels:
        env_path = _env_path(out, level)
        tpath = _transcript_path(out, level)
        if not env_path.exists() or not tpath.exists():
            print(f"error: missing inputs for level {level.value}", file=sys.stderr)
            return 1
        env = {c.id: c for c in parse_environment(env_path.read_bytes())}
        for line in tpath.read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            try:
                entry = transcript_entry_from_dict(json.loads(line))
            except (ValueError, KeyError) as exc:
                logger.warning("unreadable transcript line skipped: %s", exc)
                continue
            case = env.get(entry.case_id)
            if case is None:
                logger.warning("transcript for unknown case %r skipped", entry.case_id)
                continue
            if args.scenario and case.scenario != args.scenario:
                continue
            record = evaluate_transcript_entry(case, entry)
            records.append(record)
            per_case.append(
                {
                    "id": record.case_id,
                    "level": record.level.value,
                    "scenario": record.scenario,
                    "s_ts": record.scores.s_ts,
                    "s_pi": record.scores.s_pi,
                    "s_cf": record.scores.s_cf,
                    "hallucinated": record.hallucinated,
                    "noise_corrected": record.noise_corrected,
                    "parse_failed": record.parse_failed,
                }
            )
    if not records:
        print("warning: no transcripts scored; writing empty report", file=sys.stderr)
    report = build_report(records, anova_stage=args.anova_stage)
    report["records"] = per_case
    (out / "results.json").write_text(canonical_dumps(report), encoding="utf-8")
    if records:
        from .stats import stage_means

        print(render_table(stage_means(records)))
    return 0


def cmd_augment(args: argparse.Namespace) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cases = {c.id: c for c in parse_catalog(Path(args.catalog).read_bytes())}
    trajectories = aug.parse_trajectories(Path(args.trajectories).read_bytes())
    plan = aug.AugmentationPlan.default().scaled(args.plan_scale)
    sampled = aug.sample_plan(trajectories, plan, args.seed)

    per_level: dict[NoiseLevel, list[tuple[aug.Trajectory, nz.PerturbedCase]]] = {}
    counts: dict[str, int] = {}
    errors: list[str] = []
    ordered_ids = list(cases)
    envs = {
        level: build_environment([cases[i] for i in ordered_ids], level, args.seed)
        for level in NoiseLevel
    }
    by_base: dict[NoiseLevel, dict[str, list[nz.PerturbedCase]]] = {}
    for level, env in envs.items():
        grouped: dict[str, list[nz.PerturbedCase]] = {}
        for pc in env:
            grouped.setdefault(pc.base, []).append(pc)
        by_base[level] = grouped

    for level, trajs in sampled.items():
        pick_rng = random.Random(nz.derive_subseed(args.seed, "variant_pick", "augment", level.value))
        items: list[tuple[aug.Trajectory, nz.PerturbedCase]] = []
        for traj in trajs:
            variants = by_base[level].get(traj.source_case)
            if not variants:
                errors.append(f"{level.value}: no case {traj.source_case!r} in catalog")
                continue
            case = variants[pick_rng.randrange(len(variants))]
            try:
                rewritten = aug.rewrite_trajectory(traj, case)
            except aug.RewriteError as exc:
                errors.append(f"{level.value}/{traj.source_case}: {exc}")
                continue
            items.append((rewritten, case))
        per_level[level] = items
        counts[level.value] = len(items)

    records = aug.export_records(per_level)
    record_path = out / "training_records.jsonl"
    record_path.write_text(
        "".join(aug.training_record_to_line(r) + "\n" for r in records), encoding="utf-8"
    )
    manifest = {
        "seed": args.seed,
        "config_hash": _config_hash({"plan_scale": args.plan_scale, "seed": args.seed}),
        "counts": counts,
        "records": len(records),
        "errors": errors,
    }
    (out / "augment_manifest.json").write_text(canonical_dumps(manifest), encoding="utf-8")
    print(f"exported {len(records)} training record(s) -> {record_path}")
    if errors:
        for err in errors:
            print(f"rewrite error: {err}", file=sys.stderr)
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    results_path = Path(args.out) / "results.json"
    if not results_path.exists():
        print(f"error: no results at {results_path}", file=sys.stderr)
        return 1
    report = json.loads(results_path.read_text(encoding="utf-8"))
    means = {}
    for key, value in report.get("means", {}).items():
        level, stage = key.split("/")
        means[(level, stage)] = value
    print(render_table(means))
    anova = report.get("anova")
    if anova and "f_statistic" in anova:
        print(f"\nANOVA ({report.get('anova_stage', 'cf')}): "
              f"F = {anova['f_statistic']:.4f}, p = {anova['p_value']:.4g}")
    print(f"hallucinations: {report.get('hallucinations', 0)}")
    print(f"noise corrections: {report.get('noise_corrections', 0)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolnoise",
        description="Noise-injected tool environments, staged scoring, and data augmentation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--out", required=True, help="run output directory")
        p.add_argument("--levels", default="all", help="comma-separated noise levels or 'all'")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--scenario", default=None, help="restrict to one scenario id")

    p_gen = sub.add_parser("generate", help="build noise-injected environment files")
    common(p_gen)
    p_gen.add_argument("--catalog", required=True)
    p_gen.set_defaults(func=cmd_generate)

    p_run = sub.add_parser("run", help="obtain model outputs for generated environments")
    common(p_run)
    p_run.add_argument("--backend", choices=["http", "scripted"], default="scripted")
    p_run.add_argument("--endpoint", default="")
    p_run.add_argument("--model", default="")
    p_run.add_argument("--concurrency", type=int, default=4)
    p_run.add_argument("--answers", default=None, help="scripted fixture (case id -> text)")
    p_run.set_defaults(func=cmd_run)

    p_score = sub.add_parser("score", help="score transcripts and emit the results document")
    common(p_score)
    p_score.add_argument("--anova-stage", choices=["ts", "pi", "cf"], default="cf")
    p_score.set_defaults(func=cmd_score)

    p_aug = sub.add_parser("augment", help="rewrite trajectories into noisy environments")
    common(p_aug)
    p_aug.add_argument("--catalog", required=True)
    p_aug.add_argument("--trajectories", required=True)
    p_aug.add_argument("--plan-scale", type=float, default=1.0)
    p_aug.set_defaults(func=cmd_augment)

    p_rep = sub.add_parser("report", help="render a stored results document")
    common(p_rep)
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (CatalogError, nz.NoiseError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

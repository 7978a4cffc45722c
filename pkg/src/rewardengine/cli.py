"""Operator CLI: detect / score / eval / dump / serve.

Exit codes for `detect`: 0 clean, 1 findings, 2 error. Config precedence is
CLI flag > request override > config file > default; the effective values are
logged at startup. Environment overrides: REWARDENGINE_ALPHA,
REWARDENGINE_RULEPACK_DIR, REWARDENGINE_SHIM.
"""

from __future__ import annotations

import json
import logging
import os
import sys
from pathlib import Path

import click

from rewardengine import evalreport
from rewardengine.detectors import DetectorRegistry, UnknownCweError, detect
from rewardengine.frontend.cfg import build_cfgs
from rewardengine.frontend.ssa import to_ssa_module
from rewardengine.frontend.syntax import SyntaxFailure, parse
from rewardengine.harness import ResourceLimits
from rewardengine.maintain import maintainability_verdict
from rewardengine.reward import RewardConfig, hybrid_reward, normalize_batch
from rewardengine.service import RewardService, serve_forever
from rewardengine.tasks import (
    CandidateProgram, CorpusError, load_candidates, load_task_corpus,
    parse_cwe_tag,
)

logger = logging.getLogger(__name__)


def _parse_limits(text: str | None, workers: int) -> ResourceLimits:
    """--limits TIMEOUT_MS[:MEMORY_MB]"""
    if not text:
        return ResourceLimits(workers=workers)
    parts = text.split(":")
    timeout_ms = int(parts[0]) if parts[0] else None
    memory = int(parts[1]) * 1024 * 1024 if len(parts) > 1 and parts[1] else ResourceLimits.max_memory_bytes
    return ResourceLimits(wall_timeout_ms=timeout_ms, max_memory_bytes=memory,
                          workers=workers)


def _registry(rulepack_dir: str | None) -> DetectorRegistry:
    rulepack_dir = rulepack_dir or os.environ.get("REWARDENGINE_RULEPACK_DIR")
    return DetectorRegistry(extension_dir=rulepack_dir)


def _reward_config(alpha: float | None, normalize: bool,
                   config_file: str | None) -> RewardConfig:
    defaults = {"alpha": 0.5, "penalty": -1.0, "normalize": False,
                "epsilon": 1e-8}
    if config_file:
        defaults.update(json.loads(Path(config_file).read_text()))
    env_alpha = os.environ.get("REWARDENGINE_ALPHA")
    if env_alpha is not None:
        defaults["alpha"] = float(env_alpha)
    if alpha is not None:
        defaults["alpha"] = alpha
    if normalize:
        defaults["normalize"] = True
    config = RewardConfig(**defaults)
    logger.info("reward config: alpha=%s penalty=%s normalize=%s",
                config.alpha, config.penalty, config.normalize)
    return config


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Debug logging.")
def main(verbose: bool):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@main.command("detect")
@click.argument("source_path", type=click.Path(path_type=Path))
@click.option("--cwe", "cwes", multiple=True, help="CWE tag, e.g. CWE-89 or 89.")
@click.option("--maintainability", is_flag=True, help="Run maintainability checks instead.")
@click.option("--rulepack-dir", type=click.Path(exists=True), default=None)
def cmd_detect(source_path: Path, cwes, maintainability: bool, rulepack_dir):
    """Run detectors on one source file; print findings as JSON lines."""
    try:
        source = source_path.read_text(encoding="utf-8")
    except OSError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    parsed = parse(source)
    if isinstance(parsed, SyntaxFailure):
        click.echo(f"error: syntax error at {parsed.line}:{parsed.column}: "
                   f"{parsed.message}", err=True)
        sys.exit(2)
    try:
        if maintainability:
            findings = list(maintainability_verdict(parsed).findings)
        else:
            tags = [parse_cwe_tag(int(c) if c.isdigit() else c) for c in cwes]
            if not tags:
                click.echo("error: pass --cwe or --maintainability", err=True)
                sys.exit(2)
            candidate = CandidateProgram("cli", "cli", source)
            findings = detect(candidate, tags, _registry(rulepack_dir), parsed=parsed)
    except (UnknownCweError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    for finding in findings:
        record = finding.to_record()
        record["candidate_id"] = str(source_path)
        record["line"] = finding.line
        record["col"] = finding.col
        click.echo(json.dumps(record))
    sys.exit(1 if findings else 0)


@main.command("score")
@click.argument("task_corpus", type=click.Path(exists=True, path_type=Path))
@click.argument("candidates", type=click.Path(exists=True, path_type=Path))
@click.option("--alpha", type=float, default=None)
@click.option("--normalize", is_flag=True)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--rulepack-dir", type=click.Path(exists=True), default=None)
@click.option("--limits", default=None, help="TIMEOUT_MS[:MEMORY_MB] per test.")
@click.option("--workers", type=int, default=4)
def cmd_score(task_corpus, candidates, alpha, normalize, config_file,
              rulepack_dir, limits, workers):
    """Score every candidate; one reward record per line plus a summary."""
    try:
        tasks = {t.task_id: t for t in load_task_corpus(task_corpus)}
        cands = load_candidates(candidates)
    except CorpusError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    registry = _registry(rulepack_dir)
    config = _reward_config(alpha, normalize, config_file)
    res_limits = _parse_limits(limits, workers)
    breakdowns = []
    for cand in cands:
        task = tasks.get(cand.task_id)
        if task is None:
            click.echo(f"error: candidate {cand.candidate_id!r} references "
                       f"unknown task {cand.task_id!r}", err=True)
            sys.exit(2)
        breakdowns.append(hybrid_reward(cand, task, registry, res_limits, config))
    if config.normalize and breakdowns:
        breakdowns = normalize_batch(breakdowns, config)
    for b in breakdowns:
        click.echo(json.dumps(b.to_record()))
    if breakdowns:
        mean = sum(b.r_hybrid for b in breakdowns) / len(breakdowns)
        penalties = sum(1 for b in breakdowns if not b.runnable)
        click.echo(f"# scored {len(breakdowns)} candidates; mean reward "
                   f"{mean:.4f}; penalties {penalties}", err=True)


@main.command("eval")
@click.argument("task_corpus", type=click.Path(exists=True, path_type=Path))
@click.argument("candidates", type=click.Path(exists=True, path_type=Path))
@click.option("--rulepack-dir", type=click.Path(exists=True), default=None)
@click.option("--limits", default=None)
@click.option("--workers", type=int, default=4)
@click.option("--format", "fmt", type=click.Choice(["table-text", "structured"]),
              default="table-text")
def cmd_eval(task_corpus, candidates, rulepack_dir, limits, workers, fmt):
    """Holistic evaluation: func / qual / joint pass rates."""
    try:
        tasks = load_task_corpus(task_corpus)
        cands = load_candidates(candidates)
        report = evalreport.evaluate_corpus(
            tasks, cands, _registry(rulepack_dir), _parse_limits(limits, workers))
    except (CorpusError, ValueError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    click.echo(evalreport.render_report(report, fmt), nl=False)


@main.command("dump")
@click.argument("source_path", type=click.Path(exists=True, path_type=Path))
@click.option("--what", type=click.Choice(["cfg", "ssa"]), default="cfg")
def cmd_dump(source_path: Path, what: str):
    """Debug dumps: textual CFG or SSA listing (stable golden format)."""
    parsed = parse(source_path.read_text(encoding="utf-8"))
    if isinstance(parsed, SyntaxFailure):
        click.echo(f"error: syntax error at {parsed.line}:{parsed.column}", err=True)
        sys.exit(2)
    if what == "cfg":
        cfgs = build_cfgs(parsed.tree)
        for cfg in cfgs.all_cfgs():
            click.echo(cfg.dump())
    else:
        module = to_ssa_module(parsed.tree)
        for fn in module.all_functions():
            click.echo(fn.dump())


@main.command("serve")
@click.argument("task_corpus", type=click.Path(exists=True, path_type=Path))
@click.option("--host", default="127.0.0.1")
@click.option("--port", type=int, default=8791)
@click.option("--alpha", type=float, default=None)
@click.option("--normalize", is_flag=True)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--rulepack-dir", type=click.Path(exists=True), default=None)
@click.option("--limits", default=None)
@click.option("--workers", type=int, default=4)
def cmd_serve(task_corpus, host, port, alpha, normalize, config_file,
              rulepack_dir, limits, workers):
    """Long-running reward endpoint (POST /score, GET /health)."""
    tasks = load_task_corpus(task_corpus)
    service = RewardService(
        tasks=tasks,
        registry=_registry(rulepack_dir),
        limits=_parse_limits(limits, 1),
        config=_reward_config(alpha, normalize, config_file),
        workers=workers,
    )
    serve_forever(host, port, service)


if __name__ == "__main__":
    main()

"""Command-line interface: induce, detect, eval, dataset tools, feedback
loops, and the review service."""
from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from . import backends as be
from .cascade import CascadeConfig, load_verdicts, process_stream, save_verdicts
from .evaluation import (
    DatasetManifest,
    compute_report,
    duplicate_normals,
    frames_from_manifest,
    load_manifest,
    run_benchmark,
    save_manifest,
    save_report,
)
from .evolution import FeedbackQueue, apply_f2c, apply_uil, collect_f2c, enqueue_uil
from .induction import induce_rulebase
from .rulebase import PoolParams, load_rulebase, save_rulebase
from .service import ApiSession, serve


def _backend_set(config_path: str | None, mock_seed: int | None) -> be.BackendSet:
    if config_path:
        return be.BackendSet.from_configs(be.load_backend_configs(config_path))
    return be.BackendSet.mocks(seed=mock_seed or 0)


@click.group()
def main():
    """Cascaded real-time video anomaly detection."""


@main.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--segment-len", default=8, show_default=True)
@click.option("--stride", default=8, show_default=True)
@click.option("--labels", "labels_path", type=click.Path(exists=True), default=None,
              help="Perturbed label list (defaults to the bundled 339-label file).")
@click.option("--backends", "backends_path", type=click.Path(exists=True), default=None,
              help="TOML backend config; omit to use deterministic mocks.")
def induce(manifest_path, out_path, segment_len, stride, labels_path, backends_path):
    """Induce a scene rulebase from normal frames."""
    manifest = load_manifest(manifest_path)
    normal = DatasetManifest([e for e in manifest.entries if e.label == 0])
    frames = frames_from_manifest(normal)
    params = PoolParams(segment_len=segment_len)
    rulebase = induce_rulebase(frames, _backend_set(backends_path, 0), params,
                               perturbed_labels_path=labels_path, stride=stride)
    save_rulebase(rulebase, out_path)
    click.echo(f"induced {len(rulebase.normal_rules)} rules -> {out_path}")


@main.command()
@click.option("--rulebase", "rulebase_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["both", "coarse", "fine"]), default="both",
              show_default=True)
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--dump-prompts", "dump_dir", type=click.Path(), default=None)
@click.option("--backends", "backends_path", type=click.Path(exists=True), default=None)
def detect(rulebase_path, manifest_path, mode, out_path, dump_dir, backends_path):
    """Run the online cascade over a manifest and write verdicts."""
    mode_name = {"both": "both", "coarse": "coarse_only", "fine": "fine_only"}[mode]
    config = CascadeConfig(
        rulebase=load_rulebase(rulebase_path),
        backend_set=_backend_set(backends_path, 0),
        mode=mode_name,
        dump_dir=Path(dump_dir) if dump_dir else None,
    )
    frames = frames_from_manifest(load_manifest(manifest_path))
    records = process_stream(frames, config)
    save_verdicts(records, out_path)
    abnormal = sum(1 for r in records if r.final_label == "abnormal")
    click.echo(f"{len(records)} frames, {abnormal} abnormal -> {out_path}")


@main.command(name="eval")
@click.option("--rulebase", "rulebase_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["both", "coarse", "fine"]), default="both")
@click.option("--out", "out_path", required=True, type=click.Path())
@click.option("--verdicts", "verdicts_path", type=click.Path(), default=None,
              help="Also write the per-frame verdict records here.")
@click.option("--backends", "backends_path", type=click.Path(exists=True), default=None)
def eval_cmd(rulebase_path, manifest_path, mode, out_path, verdicts_path, backends_path):
    """Benchmark the cascade: AUC, precision/recall, throughput."""
    mode_name = {"both": "both", "coarse": "coarse_only", "fine": "fine_only"}[mode]
    config = CascadeConfig(
        rulebase=load_rulebase(rulebase_path),
        backend_set=_backend_set(backends_path, 0),
        mode=mode_name,
    )
    frames = frames_from_manifest(load_manifest(manifest_path))
    report, records = run_benchmark(frames, config)
    save_report(report, out_path)
    if verdicts_path:
        save_verdicts(records, verdicts_path)
    click.echo(json.dumps(report.__dict__, indent=2))


@main.group()
def dataset():
    """Dataset manifest tooling."""


@dataset.command()
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--target-ratio", required=True, type=float)
@click.option("--out", "out_path", required=True, type=click.Path())
def dup(manifest_path, target_ratio, out_path):
    """Duplicate normal frames down to a target anomaly ratio."""
    manifest = load_manifest(manifest_path)
    result = duplicate_normals(manifest, target_ratio)
    save_manifest(result, out_path)
    click.echo(f"{len(result.entries)} entries at ratio "
               f"{result.anomaly_ratio:.4f} -> {out_path}")


@main.group()
def evolve():
    """Feedback-driven rule evolution."""


@evolve.command()
@click.option("--rulebase", "rulebase_path", required=True, type=click.Path(exists=True))
@click.option("--verdicts", "verdicts_path", required=True, type=click.Path(exists=True))
@click.option("--manifest", "manifest_path", required=True, type=click.Path(exists=True))
@click.option("--queue", "queue_path", required=True, type=click.Path())
@click.option("--backends", "backends_path", type=click.Path(exists=True), default=None)
def f2c(rulebase_path, verdicts_path, manifest_path, queue_path, backends_path):
    """Recycle fine-stage-cleared frames into rule generation."""
    rulebase = load_rulebase(rulebase_path)
    records = load_verdicts(verdicts_path)
    queue = FeedbackQueue(queue_path)
    queue.add_items(collect_f2c(records))
    frames = {f.frame_id: f for f in frames_from_manifest(load_manifest(manifest_path))}
    before = rulebase.version
    rulebase = apply_f2c(rulebase, queue, frames, _backend_set(backends_path, 0))
    save_rulebase(rulebase, rulebase_path)
    click.echo(f"version {before} -> {rulebase.version}, "
               f"{len(rulebase.normal_rules)} normal rules")


@evolve.group()
def uil():
    """User-in-the-loop review queue."""


@uil.command(name="list")
@click.option("--verdicts", "verdicts_path", type=click.Path(exists=True), default=None,
              help="Enqueue abnormal frames from this verdict file first.")
@click.option("--queue", "queue_path", required=True, type=click.Path())
def uil_list(verdicts_path, queue_path):
    queue = FeedbackQueue(queue_path)
    if verdicts_path:
        queue.add_items(enqueue_uil(load_verdicts(verdicts_path)))
    for item in queue.pending("uil_pending"):
        click.echo(f"{item.id}\t{item.frame_id}\t{item.evidence.get('caption')}")


@uil.command()
@click.argument("item_id")
@click.option("--rulebase", "rulebase_path", required=True, type=click.Path(exists=True))
@click.option("--queue", "queue_path", required=True, type=click.Path(exists=True))
@click.option("--rule-text", default=None)
def confirm(item_id, rulebase_path, queue_path, rule_text):
    rulebase = load_rulebase(rulebase_path)
    queue = FeedbackQueue(queue_path)
    rulebase = apply_uil(rulebase, queue, item_id, "confirm", rule_text)
    save_rulebase(rulebase, rulebase_path)
    click.echo(f"confirmed {item_id}; rulebase version {rulebase.version}")


@uil.command()
@click.argument("item_id")
@click.option("--rulebase", "rulebase_path", required=True, type=click.Path(exists=True))
@click.option("--queue", "queue_path", required=True, type=click.Path(exists=True))
def reject(item_id, rulebase_path, queue_path):
    rulebase = load_rulebase(rulebase_path)
    queue = FeedbackQueue(queue_path)
    apply_uil(rulebase, queue, item_id, "reject")
    click.echo(f"rejected {item_id}; routed to F2C")


@main.command(name="serve")
@click.option("--rulebase", "rulebase_path", required=True, type=click.Path(exists=True))
@click.option("--verdicts", "verdicts_path", type=click.Path(exists=True), default=None)
@click.option("--queue", "queue_path", type=click.Path(), default=None)
@click.option("--frames-dir", type=click.Path(exists=True), default=None)
@click.option("--report", "report_path", type=click.Path(exists=True), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8787, show_default=True)
@click.option("--token", default=None, help="Optional static bearer token.")
def serve_cmd(rulebase_path, verdicts_path, queue_path, frames_dir, report_path,
              host, port, token):
    """Start the operator review API."""
    serve(ApiSession(
        rulebase_path=Path(rulebase_path),
        verdicts_path=Path(verdicts_path) if verdicts_path else None,
        queue_path=Path(queue_path) if queue_path else None,
        frames_dir=Path(frames_dir) if frames_dir else None,
        report_path=Path(report_path) if report_path else None,
        auth_token=token,
    ), host=host, port=port)


if __name__ == "__main__":
    sys.exit(main())

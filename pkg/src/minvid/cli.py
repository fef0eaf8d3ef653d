"""Command-line surface tying the pipeline together.

One manifest file is the source of truth for a session: clips, answer
keys, the search tree, records, and model scores.  Frame pixels live in a
``frames/`` directory next to the manifest.  Identical inputs and seeds
produce identical output files.
"""

from __future__ import annotations

import dataclasses
import json
import sys
from pathlib import Path

import click

from . import evaluate as ev
from .core import ConfigKey, canonical_key, make_root
from .imageio import export_loop, import_clip, load_clip, store_frames
from .manifest import (
    ClipEntry,
    Manifest,
    canonical_json_bytes,
    atomic_write,
)
from .oracle import (
    CachedOracle,
    HumanServiceOracle,
    OracleTimeout,
    OracleUnavailable,
    SyntheticOracle,
    WireOracle,
    answer_key_from_text,
)
from .search import (
    BudgetExhausted,
    SearchParams,
    SearchTree,
    minimal_set,
    resume,
    run_search,
)

EXIT_PARTIAL = 4

STATE_ENVVAR = "MINVID_STATE"


def _frames_dir(state_path: Path) -> Path:
    return state_path.parent / "frames"


def _load_manifest(state_path: Path) -> Manifest:
    if not state_path.exists():
        raise click.ClickException(f"manifest not found: {state_path}")
    return Manifest.load(state_path)


def _load_clips(manifest: Manifest, state_path: Path) -> dict:
    frames_dir = _frames_dir(state_path)
    return {entry.clip_id: load_clip(entry, frames_dir) for entry in manifest.clips}


def _parse_oracle(
    spec: str,
    manifest: Manifest,
    state_path: Path,
    admin_token: str,
    timeout: float,
    retries: int,
):
    import httpx

    if spec.startswith("synthetic:"):
        expr = spec[len("synthetic:") :]
        if expr == "always":
            return SyntheticOracle(lambda key, cfg: 1)
        if expr == "never":
            return SyntheticOracle(lambda key, cfg: 0)
        if expr.startswith("side>="):
            floor = int(expr[len("side>=") :])

            def rate(key, cfg):
                return 1 if cfg.rendered_side >= floor and cfg.frame_count >= 2 else 0

            return SyntheticOracle(rate)
        raise click.ClickException(
            f"unknown synthetic oracle {expr!r} (use always, never, or side>=N)"
        )
    if spec.startswith("wire:"):
        url = spec[len("wire:") :]
        clips = _load_clips(manifest, state_path)
        return WireOracle(httpx.Client(base_url=url), clips, timeout=timeout, retries=retries)
    if spec.startswith("human:"):
        url = spec[len("human:") :]
        return HumanServiceOracle(
            httpx.Client(base_url=url), admin_token=admin_token, timeout=timeout
        )
    raise click.ClickException(
        f"unknown oracle spec {spec!r} (use synthetic:..., wire:URL, or human:URL)"
    )


def _audit_appender(state_path: Path):
    """Append-only line-delimited mirror of the oracle-call audit log."""
    audit_path = state_path.with_suffix(state_path.suffix + ".audit.jsonl")
    written = 0
    if audit_path.exists():
        written = sum(1 for line in audit_path.read_bytes().splitlines() if line.strip())

    def append(tree: SearchTree) -> None:
        nonlocal written
        if len(tree.audit) <= written:
            return
        with audit_path.open("ab") as handle:
            for entry in tree.audit[written:]:
                line = json.dumps(
                    {
                        "seq": entry.seq,
                        "key": entry.key,
                        "n_subjects": entry.n_subjects,
                        "n_correct": entry.n_correct,
                    },
                    sort_keys=True,
                )
                handle.write(line.encode("ascii") + b"\n")
        written = len(tree.audit)

    return append


state_option = click.option(
    "--state",
    "state_path",
    envvar=STATE_ENVVAR,
    required=True,
    type=click.Path(path_type=Path),
    help=f"Manifest file (or set {STATE_ENVVAR}).",
)


@click.group()
def main() -> None:
    """Search for minimal recognizable video configurations and evaluate them."""


@main.command()
@click.argument("directory", type=click.Path(exists=True, file_okay=False, path_type=Path))
@click.option("--roi", required=True, help="ROI as x,y,side in source-frame pixels.")
@click.option("--frames", "picks", required=True, help="Comma-separated frame indices (1-5).")
@click.option("--category", required=True, help="Action category label.")
@click.option(
    "--answers",
    "answers_path",
    required=True,
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="Answer-key file (category:/object:/action: lines).",
)
@state_option
def ingest(directory: Path, roi: str, picks: str, category: str, answers_path: Path, state_path: Path):
    """Import numbered PNG frames as a source clip."""
    try:
        x, y, side = (int(v) for v in roi.split(","))
        pick_list = [int(v) for v in picks.split(",")]
    except ValueError as exc:
        raise click.UsageError(f"malformed --roi or --frames: {exc}")
    answer_key = answer_key_from_text(answers_path.read_text())
    if answer_key.category != category:
        raise click.ClickException(
            f"answer key is for category {answer_key.category!r}, not {category!r}"
        )
    try:
        clip = import_clip(directory, (x, y, side), pick_list, category, answer_key.key_id)
    except (ValueError, OSError) as exc:
        raise click.ClickException(str(exc))
    manifest = Manifest.load(state_path) if state_path.exists() else Manifest()
    refs = store_frames(list(clip.frames), _frames_dir(state_path))
    if all(entry.clip_id != clip.clip_id for entry in manifest.clips):
        manifest.clips.append(
            ClipEntry(
                clip_id=clip.clip_id,
                action_category=category,
                answer_key_id=answer_key.key_id,
                frame_side=clip.roi_side,
                frame_refs=tuple(refs),
            )
        )
    if all(k.key_id != answer_key.key_id for k in manifest.answer_keys):
        manifest.answer_keys.append(answer_key)
    manifest.save(state_path)
    click.echo(f"ingested clip {clip.clip_id} ({len(clip.frames)} frames, side {clip.roi_side})")


@main.command()
@state_option
@click.option("--root", "root_clip", required=True, help="Clip id to search from.")
@click.option("--oracle", "oracle_spec", required=True, help="synthetic:EXPR | wire:URL | human:URL")
@click.option("--subjects", default=30, show_default=True, help="Subjects per configuration.")
@click.option(
    "--budget",
    default=500,
    show_default=True,
    help="Max distinct oracle queries; also applied when continuing a search.",
)
@click.option("--min-side", default=4, show_default=True, help="Smallest rendered side explored.")
@click.option("--max-depth", default=None, type=int, help="Depth limit (default unlimited).")
@click.option("--traversal", default="bfs", type=click.Choice(["bfs", "dfs"]), show_default=True)
@click.option("--admin-token", default="change-me", help="Admin token for human:URL oracles.")
@click.option("--oracle-timeout", default=30.0, show_default=True,
              help="Per-request timeout for remote oracles, seconds.")
@click.option("--oracle-retries", default=2, show_default=True,
              help="Extra attempts for remote oracle requests.")
def search(
    state_path: Path,
    root_clip: str,
    oracle_spec: str,
    subjects: int,
    budget: int,
    min_side: int,
    max_depth: int | None,
    traversal: str,
    admin_token: str,
    oracle_timeout: float,
    oracle_retries: int,
):
    """Run (or continue) the reduction search for one clip."""
    manifest = _load_manifest(state_path)
    oracle = CachedOracle(
        _parse_oracle(
            oracle_spec, manifest, state_path, admin_token, oracle_timeout, oracle_retries
        )
    )
    append_audit = _audit_appender(state_path)

    def persist(tree: SearchTree) -> None:
        manifest.tree = tree
        manifest.save(state_path)
        append_audit(tree)

    try:
        if manifest.tree is not None:
            tree = manifest.tree
            root_of_tree = tree.root.config.clip_id
            if root_of_tree != root_clip:
                raise click.ClickException(
                    f"manifest already holds a search for clip {root_of_tree!r}"
                )
            # the budget is the one safe knob to adjust mid-search; geometry
            # and subject-count parameters stay as persisted
            tree.params = dataclasses.replace(tree.params, oracle_budget=budget)
            tree = resume(tree, oracle, persist)
        else:
            entry = manifest.clip_entry(root_clip)
            clip = load_clip(entry, _frames_dir(state_path))
            params = SearchParams(
                n_subjects=subjects,
                min_side=min_side,
                max_depth=max_depth,
                oracle_budget=budget,
                traversal=traversal,
            )
            tree = run_search(make_root(clip), oracle, params, persist)
    except BudgetExhausted as exc:
        pending = len(exc.tree.pending_keys())
        click.echo(f"budget exhausted; {pending} configurations still pending", err=True)
        sys.exit(EXIT_PARTIAL)
    except (OracleUnavailable, OracleTimeout) as exc:
        click.echo(f"oracle unavailable: {exc}; state saved, re-run to resume", err=True)
        sys.exit(EXIT_PARTIAL)

    persist(tree)
    minimal = minimal_set(tree)
    click.echo(
        f"search over {len(tree.nodes)} configurations, "
        f"{len(tree.audit)} oracle queries, {len(minimal)} minimal"
    )
    for config in minimal:
        click.echo(f"  minimal {canonical_key(config).to_str()}")
    if not tree.is_complete():
        click.echo(f"{len(tree.pending_keys())} configurations pending; re-run to continue", err=True)
        sys.exit(EXIT_PARTIAL)


@main.command()
@state_option
@click.option("--port", default=8000, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--admin-token", default="change-me")
@click.option("--save-records/--no-save-records", default=True, show_default=True)
def serve(state_path: Path, port: int, host: str, admin_token: str, save_records: bool):
    """Serve recognition and probe trials to human subjects."""
    import uvicorn

    from .service import create_app
    from .study import StudyStore

    manifest = _load_manifest(state_path)
    clips = _load_clips(manifest, state_path)
    keys = {k.key_id: k for k in manifest.answer_keys}
    store = StudyStore(clips=clips, answer_keys=keys)

    if save_records:

        def persist_record(record) -> None:
            manifest.records.append(record)
            manifest.save(state_path)

        store.on_record.append(persist_record)

    uvicorn.run(create_app(store, admin_token=admin_token), host=host, port=port)


@main.group(name="eval")
def eval_group() -> None:
    """Reports: recognition gaps, AP, hard negatives, human-model comparison."""


def _write_report(out_dir: Path, name: str, doc: dict, table: str | None = None) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    atomic_write(out_dir / f"{name}.json", canonical_json_bytes(doc))
    if table is not None:
        atomic_write(out_dir / f"{name}.txt", table.encode())


def _bundled_triplets(which: str) -> list:
    from importlib.resources import files

    doc = json.loads(files("minvid.data").joinpath("reference_rates.json").read_text())
    section = {"summary": "summary_set", "rowing": "rowing_gap_set"}[which]
    return [ev.triplet_from_doc(t) for t in doc[section]]


@eval_group.command()
@state_option
@click.option("--triplets", "triplets_path", type=click.Path(path_type=Path), default=None,
              help="Triplet rates file instead of the manifest tree.")
@click.option("--fixture", type=click.Choice(["summary", "rowing"]), default=None,
              help="Use a bundled reference-rate fixture.")
@click.option("--source", default="human", type=click.Choice(["human", "model"]))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
def gaps(state_path: Path, triplets_path: Path | None, fixture: str | None,
         source: str, out_dir: Path | None):
    """Group rate statistics and minimal-vs-sub-minimal gaps."""
    if fixture is not None:
        triplets = _bundled_triplets(fixture)
    elif triplets_path is not None:
        doc = json.loads(Path(triplets_path).read_text())
        triplets = [ev.triplet_from_doc(t) for t in doc["triplets"]]
    else:
        manifest = _load_manifest(state_path)
        if manifest.tree is None:
            raise click.ClickException("manifest holds no search tree; pass --triplets or --fixture")
        triplets = ev.triplets_from_tree(manifest.tree)
    try:
        report = ev.gap_report(triplets, source=source)
    except ev.UnpairedKey as exc:
        raise click.ClickException(str(exc))
    table = ev.format_gap_table(report)
    click.echo(table, nl=False)
    _write_report(out_dir or state_path.parent / "reports", "gaps", ev.gap_report_to_doc(report), table)


def _load_scores(state_path: Path, scores_path: Path | None):
    from .manifest import score_entry_from_doc

    if scores_path is not None:
        doc = json.loads(Path(scores_path).read_text())
        entries = [score_entry_from_doc(d) for d in doc["scores"]]
    else:
        entries = _load_manifest(state_path).scores
    return [ev.scored_from_entry(e) for e in entries]


scores_option = click.option(
    "--scores",
    "scores_path",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    default=None,
    help="Score file ({\"scores\": [...]}) instead of the manifest's scores.",
)


@eval_group.command()
@state_option
@scores_option
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
def ap(state_path: Path, scores_path: Path | None, out_dir: Path | None):
    """Average precision over scored examples."""
    examples = _load_scores(state_path, scores_path)
    if not examples:
        raise click.ClickException("no scored examples to evaluate")
    try:
        value = ev.average_precision(examples)
    except ev.NoPositives as exc:
        raise click.ClickException(str(exc))
    click.echo(f"average precision: {value:.6f} over {len(examples)} examples")
    _write_report(out_dir or state_path.parent / "reports", "ap",
                  {"average_precision": value, "n_examples": len(examples)})


@eval_group.command()
@state_option
@scores_option
@click.option("--cutoff", type=float, default=None, help="Fixed score cutoff.")
@click.option("--quantile", type=float, default=None, help="Positive-score quantile cutoff.")
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=None)
def hardneg(state_path: Path, scores_path: Path | None, cutoff: float | None,
            quantile: float | None, out_dir: Path | None):
    """Negatives the model scored above its decision rule."""
    examples = _load_scores(state_path, scores_path)
    try:
        mined = ev.mine_hard_negatives(examples, cutoff=cutoff, positive_quantile=quantile)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    click.echo(f"{len(mined)} hard negatives")
    for example in mined:
        click.echo(f"  {example.model_score:.4f} {example.key}")
    _write_report(
        out_dir or state_path.parent / "reports",
        "hardneg",
        {
            "rule": {"cutoff": cutoff, "positive_quantile": quantile},
            "hard_negatives": [
                {"config_key": e.key, "model_score": e.model_score} for e in mined
            ],
        },
    )


@eval_group.command()
@click.option("--human", "human_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, path_type=Path))
@click.option("--out", "out_dir", type=click.Path(path_type=Path), default=Path("reports"))
def compare(human_path: Path, model_path: Path, out_dir: Path):
    """Compare human and model gap reports triplet by triplet."""
    human = ev.gap_report_from_doc(json.loads(human_path.read_text()))
    model = ev.gap_report_from_doc(json.loads(model_path.read_text()))
    try:
        doc = ev.human_model_comparison(human, model)
    except ev.KeyMismatch as exc:
        raise click.ClickException(str(exc))
    click.echo(
        "mean gap difference (human - model): "
        f"spatial {doc['spatial']['mean_difference']:.3f}, "
        f"temporal {doc['temporal']['mean_difference']:.3f}"
    )
    _write_report(out_dir, "comparison", doc)


@main.command()
@state_option
@click.option("--config", "key_str", required=True, help="Configuration key to export.")
@click.option("--gif", "gif_path", required=True, type=click.Path(path_type=Path))
def export(state_path: Path, key_str: str, gif_path: Path):
    """Export a configuration as an infinitely looping GIF."""
    manifest = _load_manifest(state_path)
    try:
        key = ConfigKey.from_str(key_str)
    except ValueError as exc:
        raise click.ClickException(str(exc))
    config = None
    if manifest.tree is not None and key_str in manifest.tree.nodes:
        config = manifest.tree.nodes[key_str].config
    if config is None:
        raise click.ClickException(f"configuration {key_str} not found in manifest")
    entry = manifest.clip_entry(key.clip_id)
    clip = load_clip(entry, _frames_dir(state_path))
    export_loop(config, clip, gif_path)
    click.echo(f"wrote {gif_path}")


if __name__ == "__main__":
    main()

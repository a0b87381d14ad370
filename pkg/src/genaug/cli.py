"""Command-line entry point.

One binary, subcommand per pipeline stage. Exit codes: 0 success,
1 validation/domain error, 2 usage error. With --json-errors, failures
are emitted as one JSON object on stderr. All outputs are deterministic
given explicit seeds; logs that carry wall-clock data are sidecars, never
primary outputs.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import click

from genaug import __version__
from genaug.errors import GenaugError

_JSON_ERRORS = False


@click.group()
@click.version_option(__version__)
@click.option("--config", "config_path", type=click.Path(), default=None,
              help="JSON config with defaults for subcommand flags.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Global random seed.")
@click.option("--json-errors", is_flag=True, help="Machine-readable errors on stderr.")
@click.pass_context
def cli(ctx: click.Context, config_path: str | None, seed: int, json_errors: bool) -> None:
    """Annotation-preserving generative data augmentation toolkit."""
    global _JSON_ERRORS
    _JSON_ERRORS = json_errors
    cfg = {}
    if config_path:
        cfg = json.loads(Path(config_path).read_text(encoding="utf-8"))
    ctx.obj = {"config": cfg, "seed": seed}


# ---------------------------------------------------------------------------
# ingest / validate / split / coco-export


@cli.command()
@click.option("--images", "images_dir", type=click.Path(exists=True), required=True)
@click.option("--out", "out_manifest", type=click.Path(), required=True)
@click.option("--out-dir", type=click.Path(), required=True,
              help="Directory for the resized 512x512 copies.")
@click.option("--domain", required=True)
@click.option("--prompt-key", default=None, help="Defaults to the domain name.")
@click.option("--split", default="pool", type=click.Choice(["train", "val", "test", "pool"]))
@click.option("--provenance", default="real",
              type=click.Choice(["real", "transferred", "generated"]))
@click.option("--annotations", "annotations_path", type=click.Path(exists=True),
              default=None, help="JSON map: filename -> [annotation, ...].")
@click.pass_context
def ingest(ctx, images_dir, out_manifest, out_dir, domain, prompt_key, split,
           provenance, annotations_path):
    """Resize images to 512x512 and build a manifest."""
    from genaug.ingest import ingest_directory

    manifest = ingest_directory(images_dir, out_dir, domain=domain,
                                prompt_key=prompt_key or domain, split=split,
                                provenance=provenance,
                                annotations_path=annotations_path)
    from genaug.manifest import save_manifest

    save_manifest(manifest, out_manifest)
    click.echo(f"ingested {len(manifest.records)} records -> {out_manifest}")


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--allow-any-size", is_flag=True,
              help="Skip the 512x512 post-ingestion size check.")
def validate(manifest_path, allow_any_size):
    """Validate a manifest against every dataset invariant."""
    from genaug.manifest import load_manifest

    m = load_manifest(manifest_path, require_canonical_size=not allow_any_size)
    click.echo(f"ok: {len(m.records)} records, {len(m.domains)} domains")


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--fraction", type=float, default=0.5, show_default=True)
@click.option("--out-first", type=click.Path(), required=True)
@click.option("--out-second", type=click.Path(), required=True)
@click.option("--first-split", default="train", show_default=True)
@click.option("--second-split", default="val", show_default=True)
@click.pass_context
def split(ctx, manifest_path, fraction, out_first, out_second, first_split, second_split):
    """Deterministically split annotated real records into two manifests."""
    from genaug.manifest import load_manifest, save_manifest, split_manifest, with_split

    m = load_manifest(manifest_path, require_canonical_size=False)
    first, second = split_manifest(m, fraction, ctx.obj["seed"])
    save_manifest(with_split(first, first_split), out_first)
    save_manifest(with_split(second, second_split), out_second)
    click.echo(f"split {len(first.records)} + {len(second.records)} records")


@cli.command("coco-export")
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
def coco_export(manifest_path, out_path):
    """Export a manifest to COCO-style tables."""
    from genaug.coco import export_coco
    from genaug.manifest import load_manifest

    m = load_manifest(manifest_path, require_canonical_size=False)
    export_coco(m, out_path)
    click.echo(f"wrote {out_path}")


# ---------------------------------------------------------------------------
# plot / canny


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--style", "style_path", type=click.Path(exists=True), default=None)
def plot(manifest_path, out_dir, style_path):
    """Render annotation-plot conditioning images for annotated records."""
    from genaug.manifest import load_manifest
    from genaug.raster import load_plot_style, render_annotation_plot, write_png

    m = load_manifest(manifest_path, require_canonical_size=False)
    style = load_plot_style(style_path) if style_path else None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    count = 0
    for rec in m.records:
        if not rec.annotations:
            continue
        img = render_annotation_plot(rec.annotations, rec.width, rec.height, style)
        write_png(img, out / f"{rec.id}.png")
        count += 1
    click.echo(f"rendered {count} annotation plots -> {out_dir}")


@cli.command()
@click.option("--preset", default="dense", show_default=True,
              help="Preset name or index.")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--presets", "presets_path", type=click.Path(exists=True), default=None,
              help="JSON file overriding the default presets.")
def canny(preset, in_path, out_path, presets_path):
    """Extract a Canny edge map at the chosen density preset."""
    from genaug import edge
    from genaug.raster import read_png, write_png

    presets = edge.load_presets(presets_path) if presets_path else None
    chosen = edge.resolve_preset(preset, presets)
    img = read_png(in_path)
    write_png(edge.canny(img, chosen), out_path)
    click.echo(f"{chosen.name}: wrote {out_path}")


# ---------------------------------------------------------------------------
# augment / generate / select


@cli.command()
@click.option("--mode", type=click.Choice(["plans", "stage1"]), default="plans",
              show_default=True)
@click.option("--base", "base_path", type=click.Path(exists=True),
              help="Base manifest (plans mode).")
@click.option("--pool", "pool_path", type=click.Path(exists=True),
              help="Pool manifest (stage1 mode).")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--materialize", "materialize_dir", type=click.Path(), default=None,
              help="Also render the stage-1 edge images into this directory.")
@click.option("--presets", "presets_path", type=click.Path(exists=True), default=None)
@click.pass_context
def augment(ctx, mode, base_path, pool_path, out_path, materialize_dir, presets_path):
    """Build augmentation plans, or enumerate stage-1 conditioning pairs."""
    from genaug import pipeline

    if mode == "plans":
        if not base_path:
            raise click.UsageError("--base is required in plans mode")
        from genaug.manifest import load_manifest

        base = load_manifest(base_path, require_canonical_size=False)
        plans = pipeline.build_plans(base, seed=ctx.obj["seed"])
        payload = [pipeline.plan_to_json(p) for p in plans]
        Path(out_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
        totals = [p.target_total for p in plans]
        click.echo(f"wrote {len(plans)} plans (totals {totals}) -> {out_path}")
    else:
        if not pool_path:
            raise click.UsageError("--pool is required in stage1 mode")
        from genaug import edge
        from genaug.manifest import load_manifest

        pool = load_manifest(pool_path, require_canonical_size=False)
        presets = edge.load_presets(presets_path) if presets_path \
            else edge.default_presets()
        pairs = pipeline.enumerate_stage1_pairs(pool, tuple(p.name for p in presets))
        pipeline.write_stage1_pairs(pairs, out_path)
        if materialize_dir:
            _materialize_stage1(pool, presets, pairs, materialize_dir)
        click.echo(f"enumerated {len(pairs)} conditioning pairs -> {out_path}")


def _materialize_stage1(pool, presets, pairs, out_dir):
    from genaug import edge
    from genaug.raster import hflip, read_png, write_png

    by_name = {p.name: p for p in presets}
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for pair in pairs:
        rec = pool.record_by_id(pair.image_id)
        img = read_png(rec.path)
        if pair.flipped:
            img, _ = hflip(img, (), img.shape[1])
        write_png(edge.canny(img, by_name[pair.preset]), out / f"{pair.pair_id}.png")


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True,
              help="Source manifest with annotated records.")
@click.option("--prompts", "prompts_path", type=click.Path(exists=True), required=True)
@click.option("--out-dir", type=click.Path(), required=True)
@click.option("--out-manifest", type=click.Path(), required=True)
@click.option("--service", "service_url", default=None,
              help="Generation service base URL.")
@click.option("--mock", "mock_mode", type=click.Choice(["echo", "noise"]), default=None,
              help="Run against an in-process mock service instead.")
@click.option("--count", type=int, default=None,
              help="Total images to generate (cycles sources with fresh seeds).")
@click.option("--conditioning", type=click.Choice(["plot", "canny"]), default="plot",
              show_default=True)
@click.option("--domain", "target_domain", default=None,
              help="Domain tag for generated records (defaults to source domain).")
@click.option("--log", "log_path", type=click.Path(), default=None)
@click.pass_context
def generate(ctx, manifest_path, prompts_path, out_dir, out_manifest, service_url,
             mock_mode, count, conditioning, target_domain, log_path):
    """Generate images from conditioning inputs via the generation service."""
    from genaug.generate_cmd import run_generate

    n_ok, n_failed = run_generate(
        manifest_path=manifest_path, prompts_path=prompts_path, out_dir=out_dir,
        out_manifest=out_manifest, service_url=service_url, mock_mode=mock_mode,
        count=count, conditioning=conditioning, target_domain=target_domain,
        log_path=log_path, seed=ctx.obj["seed"])
    click.echo(f"generated {n_ok} records ({n_failed} failed) -> {out_manifest}")


@cli.command()
@click.option("--target", "target_path", type=click.Path(exists=True), required=True,
              help="Manifest holding the target-domain image set.")
@click.option("--domain", required=True)
@click.option("--candidates", "candidates_dir", type=click.Path(exists=True),
              required=True)
@click.option("--provider", "provider_path", type=click.Path(exists=True), default=None,
              help="Provider config JSON (defaults to the built-in descriptor).")
@click.option("--out", "out_path", type=click.Path(), required=True)
def select(target_path, domain, candidates_dir, provider_path, out_path):
    """Gate candidate images against the target-domain set."""
    from genaug import iqa, selection
    from genaug.manifest import load_manifest
    from genaug.raster import read_png

    provider_cfg = {"type": "builtin"}
    if provider_path:
        provider_cfg = json.loads(Path(provider_path).read_text(encoding="utf-8"))
    provider = iqa.provider_from_config(provider_cfg)

    m = load_manifest(target_path, require_canonical_size=False)
    target_imgs = [(rec.id, read_png(rec.path)) for rec in m.filter(domain=domain)]
    target = iqa.build_feature_set(target_imgs, provider)

    cand_paths = sorted(Path(candidates_dir).glob("*.png"))
    cands = iqa.build_feature_set([(p.stem, read_png(p)) for p in cand_paths], provider)

    decisions, summary = selection.gate_batch(target, cands)
    with open(out_path, "w", encoding="utf-8") as fh:
        for d in decisions:
            fh.write(json.dumps(selection.decision_to_json(d), sort_keys=True) + "\n")
    click.echo(f"accepted {summary.accepted}/{summary.total} "
               f"(median pairwise {summary.median_pairwise:.6f}) -> {out_path}")


# ---------------------------------------------------------------------------
# eval / monitor / pca


@cli.command("eval")
@click.option("--gt", "gt_path", type=click.Path(exists=True), required=True)
@click.option("--dets", "dets_path", type=click.Path(exists=True), required=True)
@click.option("--task", type=click.Choice(["bbox", "keypoint"]), default="bbox",
              show_default=True)
@click.option("--coco-results", is_flag=True,
              help="Detections are a COCO results array, not JSON lines.")
@click.option("--out", "out_path", type=click.Path(), required=True)
@click.option("--csv", "csv_path", type=click.Path(), default=None)
@click.option("--thresholds", default=None,
              help="Comma-separated similarity thresholds (default 0.50:0.05:0.95).")
def eval_cmd(gt_path, dets_path, task, coco_results, out_path, csv_path, thresholds):
    """Evaluate detections against a ground-truth manifest."""
    from genaug import evaldet
    from genaug.manifest import load_manifest

    m = load_manifest(gt_path, require_canonical_size=False)
    gts = {rec.id: list(rec.annotations) for rec in m.records}
    dets = (evaldet.load_coco_results(dets_path) if coco_results
            else evaldet.load_detections_jsonl(dets_path))
    thr = evaldet.DEFAULT_THRESHOLDS
    if thresholds:
        thr = tuple(float(t) for t in thresholds.split(","))
    report = evaldet.map_report(dets, gts, task=task, thresholds=thr)
    evaldet.write_report(report, out_path, csv_path)
    click.echo(f"{task}: mAP {report.mean_ap:.4f}, mAP50 {report.map50:.4f} "
               f"-> {out_path}")


@cli.command()
@click.option("--series", "series_path", type=click.Path(exists=True), required=True)
@click.option("--out", "out_path", type=click.Path(), default=None)
def monitor(series_path, out_path):
    """Pick the best checkpoint from a metric series."""
    from genaug import pipeline

    series = pipeline.load_series(series_path)
    best = pipeline.select_best_checkpoint(series)
    payload = {"metric_name": series.metric_name, "polarity": series.polarity,
               "best_step": best}
    if out_path:
        Path(out_path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                                  encoding="utf-8")
    click.echo(json.dumps(payload, sort_keys=True))


@cli.command()
@click.option("--manifest", "manifest_path", type=click.Path(exists=True), required=True)
@click.option("--label-by", type=click.Choice(["domain", "split", "provenance"]),
              default="domain", show_default=True)
@click.option("--provider", "provider_path", type=click.Path(exists=True), default=None)
@click.option("--out", "out_path", type=click.Path(), required=True)
def pca(manifest_path, label_by, provider_path, out_path):
    """Project image features onto two principal components (CSV export)."""
    from genaug import iqa, pipeline
    from genaug.manifest import load_manifest
    from genaug.raster import read_png

    provider_cfg = {"type": "builtin"}
    if provider_path:
        provider_cfg = json.loads(Path(provider_path).read_text(encoding="utf-8"))
    provider = iqa.provider_from_config(provider_cfg)
    m = load_manifest(manifest_path, require_canonical_size=False)
    images = [(rec.id, read_png(rec.path)) for rec in m.records]
    features = iqa.build_feature_set(images, provider)
    result = pipeline.pca_project(features, k=2)
    labels = {rec.id: getattr(rec, label_by) for rec in m.records}
    pipeline.write_pca_csv(result, labels, out_path)
    ratios = ", ".join(f"{r:.4f}" for r in result.explained_variance_ratio)
    click.echo(f"explained variance ratios: {ratios} -> {out_path}")


# ---------------------------------------------------------------------------
# review-serve


@cli.command("review-serve")
@click.option("--queue", "queue_path", type=click.Path(exists=True), required=True)
@click.option("--log", "log_path", type=click.Path(), required=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8601, show_default=True)
@click.option("--static", "static_dir", type=click.Path(), default=None,
              help="Directory with the browser UI assets.")
def review_serve(queue_path, log_path, host, port, static_dir):
    """Serve the human curation API (and optionally the browser UI)."""
    from genaug import review

    queue = review.load_queue(queue_path, log_path)
    click.echo(f"serving {len(queue.items)} items on http://{host}:{port}")
    review.serve(queue, host=host, port=port, static_dir=static_dir)


# ---------------------------------------------------------------------------
# entry point


def _emit_error(exc: Exception) -> None:
    if _JSON_ERRORS:
        payload = {"error": type(exc).__name__, "message": str(exc)}
        print(json.dumps(payload, sort_keys=True), file=sys.stderr)
    else:
        print(f"error: {exc}", file=sys.stderr)


def main(argv: list[str] | None = None) -> int:
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return int(exc.exit_code)
    except click.UsageError as exc:
        exc.show()
        return 2
    except click.ClickException as exc:
        exc.show()
        return 1
    except GenaugError as exc:
        _emit_error(exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())

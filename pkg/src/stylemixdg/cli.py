"""Command-line entry point wiring the offline pipeline together.

Exit codes: 0 success, 1 validation/configuration error, 2 runtime failure.
All randomness flows from the config seed (or ``--seed`` override); no
hidden entropy sources.
"""

import dataclasses
import functools
import json
import logging
import sys
from pathlib import Path

import click
import numpy as np
import yaml

from . import pipeline, sampling, segeval, tcps
from .imops import load_label, load_rgb, save_rgb, to_uint8
from .pipeline import PipelineConfig
from .seeding import derive_seed
from .weights import WeightArchive, WeightArchiveError

log = logging.getLogger("stylemixdg")

EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

CONFIG_SECTIONS = {
    "pipeline": {f.name for f in dataclasses.fields(PipelineConfig)} | {"weights"},
    "sampler": {f.name for f in dataclasses.fields(sampling.SamplerConfig)},
    "pmd": {f.name for f in dataclasses.fields(sampling.PmdConfig)},
    "blur_mirror": {f.name for f in dataclasses.fields(sampling.BlurMirrorConfig)},
    "tcps": {"epsilon", "eval_size"},
}


class ConfigError(Exception):
    pass


def load_config(path) -> dict:
    """Load and schema-check a YAML config file before any work starts."""
    if path is None:
        return {}
    with open(path, encoding="utf-8") as f:
        doc = yaml.safe_load(f) or {}
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping of sections")
    for section, keys in doc.items():
        if section not in CONFIG_SECTIONS:
            raise ConfigError(f"{path}: unknown section {section!r} "
                              f"(known: {sorted(CONFIG_SECTIONS)})")
        if not isinstance(keys, dict):
            raise ConfigError(f"{path}: section {section!r} must be a mapping")
        unknown = set(keys) - CONFIG_SECTIONS[section]
        if unknown:
            raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)} in "
                              f"section {section!r}")
    return doc


def _tcps_config(doc: dict) -> tcps.TcpsConfig:
    return tcps.TcpsConfig(**doc.get("tcps", {}))


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    """Map exception classes onto the documented exit codes."""
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except (ConfigError, ValueError, FileNotFoundError) as exc:
            _fail(EXIT_VALIDATION, str(exc))
        except (WeightArchiveError, RuntimeError, OSError) as exc:
            _fail(EXIT_RUNTIME, str(exc))
    return wrapper


@click.group()
@click.option("-v", "--verbose", count=True, help="Increase log verbosity.")
def main(verbose):
    """Offline style-transfer augmentation toolkit."""
    level = logging.WARNING - 10 * min(verbose, 2)
    logging.basicConfig(level=level,
                        format="%(asctime)s %(levelname)s %(name)s %(message)s")


@main.command()
@click.option("--style-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@_guarded
def score(style_dir, output, config_path):
    """Compute texture-complexity scores for every image in a directory."""
    cfg = _tcps_config(load_config(config_path))
    records = []
    for path in pipeline.list_images(style_dir):
        image = load_rgb(path)
        cs = tcps.complexity(image, cfg)
        records.append(pipeline.StyleRecord(
            id=path.stem, path=str(path),
            width=image.shape[1], height=image.shape[0], score=cs))
        log.info("scored %s: %.6f (%s)", path.stem, cs.score, cs.bin.value)
    tcps.write_scores(output, records)
    click.echo(f"scored {len(records)} images -> {output}")


def _pipeline_config(doc: dict, **overrides) -> PipelineConfig:
    merged = dict(doc.get("pipeline", {}))
    merged.pop("weights", None)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return PipelineConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def _load_scores(scores_file) -> dict:
    if scores_file is None:
        return {}
    return {rec_id: score for rec_id, _, score in tcps.read_scores(scores_file)}


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--style-dir", type=click.Path(exists=True, file_okay=False))
@click.option("--size", "style_pool_size", type=int)
@click.option("--seed", type=int)
@click.option("--tcps-filter", type=click.Choice([b.value for b in tcps.Bin]))
@click.option("--scores-file", type=click.Path(exists=True, dir_okay=False))
@click.option("--output", required=True, type=click.Path(dir_okay=False))
@_guarded
def pool(config_path, style_dir, style_pool_size, seed, tcps_filter, scores_file, output):
    """Admit, filter, and sample the style pool; write the record listing."""
    doc = load_config(config_path)
    cfg = _pipeline_config(doc, style_dir=style_dir, style_pool_size=style_pool_size,
                           seed=seed, tcps_filter=tcps_filter, scores_file=scores_file)
    scores = _load_scores(cfg.scores_file)
    records = pipeline.build_pool(cfg, scores)
    with open(output, "w", encoding="utf-8") as f:
        for rec in records:
            score_txt = (f"\t{rec.score.score:.6f}\t{rec.score.bin.value}"
                         if rec.score else "")
            f.write(f"{rec.id}\t{rec.path}\t{rec.width}\t{rec.height}{score_txt}\n")
    click.echo(f"pool of {len(records)} styles -> {output}")


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--content-dir", type=click.Path(exists=True, file_okay=False))
@click.option("--style-dir", type=click.Path(exists=True, file_okay=False))
@click.option("--label-dir", type=click.Path(exists=True, file_okay=False))
@click.option("--output-dir", type=click.Path(file_okay=False))
@click.option("--weights", "weights_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", type=int)
@click.option("--workers", type=int)
@click.option("--n-variants", type=int)
@click.option("--pool-size", "style_pool_size", type=int)
@_guarded
def stylize(config_path, content_dir, style_dir, label_dir, output_dir,
            weights_path, seed, workers, n_variants, style_pool_size):
    """Build the N-times augmented dataset and its manifest."""
    doc = load_config(config_path)
    weights_path = weights_path or doc.get("pipeline", {}).get("weights")
    if not weights_path:
        raise ConfigError("a weight archive is required (--weights or pipeline.weights)")
    cfg = _pipeline_config(doc, content_dir=content_dir, style_dir=style_dir,
                           label_dir=label_dir, output_dir=output_dir, seed=seed,
                           workers=workers, n_variants=n_variants,
                           style_pool_size=style_pool_size)
    if not cfg.content_dir or not cfg.style_dir or not cfg.output_dir:
        raise ConfigError("content_dir, style_dir and output_dir are required")
    archive = WeightArchive.load(weights_path)
    scores = _load_scores(cfg.scores_file)
    style_pool = pipeline.build_pool(cfg, scores)
    manifest = pipeline.augment_dataset(cfg, style_pool, archive)
    n_var = sum(len(e["variants"]) for e in manifest["entries"])
    click.echo(f"{len(manifest['entries'])} originals + {n_var} stylized variants "
               f"-> {Path(cfg.output_dir) / 'manifest.json'}")


@main.command()
@click.option("--manifest", "manifest_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--epochs", default=1, show_default=True, type=int)
@click.option("--seed", type=int)
@click.option("--p-aug", type=float)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", required=True, type=click.Path(file_okay=False))
@_guarded
def sample(manifest_path, epochs, seed, p_aug, config_path, output_dir):
    """Emit per-epoch ordered item lists for an external training loop."""
    doc = load_config(config_path)
    manifest = pipeline.read_manifest(manifest_path)
    merged = dict(doc.get("sampler", {}))
    if seed is not None:
        merged["seed"] = seed
    if p_aug is not None:
        merged["p_aug"] = p_aug
    merged.setdefault("p_aug", manifest.get("p_aug", 0.8))
    cfg = sampling.SamplerConfig(**merged)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for epoch in range(epochs):
        items = sampling.epoch_items(manifest, cfg, epoch)
        with open(out / f"epoch_{epoch:04d}.tsv", "w", encoding="utf-8") as f:
            for item in items:
                f.write(f"{item.image_path}\t{item.label_path or '-'}\t"
                        f"{item.transform_seed}\n")
    click.echo(f"wrote {epochs} epoch list(s) -> {output_dir}")


@main.command("distort-preview")
@click.option("--image", "image_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--count", default=4, show_default=True, type=int)
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--output-dir", required=True, type=click.Path(file_okay=False))
@_guarded
def distort_preview(image_path, seed, count, config_path, output_dir):
    """Write example photometric-distortion / blur variants of one image."""
    doc = load_config(config_path)
    pmd_cfg = sampling.PmdConfig(**doc.get("pmd", {}))
    bm_cfg = sampling.BlurMirrorConfig(**doc.get("blur_mirror", {}))
    image = load_rgb(image_path)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    for i in range(count):
        distorted, _ = sampling.apply_online_transforms(
            image.astype(np.float32), None, derive_seed(seed, "preview", i),
            pmd=pmd_cfg, bm=bm_cfg)
        save_rgb(out / f"preview_{i:02d}.png", to_uint8(distorted / 255.0))
    click.echo(f"wrote {count} previews -> {output_dir}")


@main.command("eval")
@click.option("--pred-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--gt-dir", required=True, type=click.Path(exists=True, file_okay=False))
@click.option("--label-map", "label_map_spec", required=True,
              help="Builtin name (gtav, cityscapes) or a map file path.")
@click.option("--output", type=click.Path(dir_okay=False))
@_guarded
def eval_cmd(pred_dir, gt_dir, label_map_spec, output):
    """Evaluate harmonized predictions against ground-truth labels."""
    if label_map_spec in segeval.BUILTIN_LABEL_MAPS:
        label_map = segeval.LabelMap.builtin(label_map_spec)
    else:
        label_map = segeval.LabelMap.from_file(label_map_spec)
    gt_files = {p.name: p for p in pipeline.list_images(gt_dir)}
    conf = segeval.ConfusionMatrix()
    matched = 0
    for pred_path in pipeline.list_images(pred_dir):
        gt_path = gt_files.get(pred_path.name)
        if gt_path is None:
            log.warning("no ground truth for %s, skipping", pred_path.name)
            continue
        gt = segeval.remap(load_label(gt_path), label_map)
        pred = load_label(pred_path)
        conf = segeval.accumulate(conf, gt, pred)
        matched += 1
    if matched == 0:
        raise ValueError("no prediction/ground-truth pairs matched by filename")
    doc = segeval.report(conf)
    click.echo(segeval.format_report(doc))
    if output:
        segeval.write_report(output, doc)


@main.command("weights-info")
@click.option("--weights", "weights_path", required=True,
              type=click.Path(exists=True, dir_okay=False))
@_guarded
def weights_info(weights_path):
    """Inventory a weight archive; fails on CRC or format errors."""
    archive = WeightArchive.load(weights_path)
    total = 0
    for name, arr in archive.items():
        click.echo(f"{name:<28} {str(arr.shape):<20} {arr.size}")
        total += arr.size
    click.echo(f"{len(archive)} tensors, {total} parameters, CRC OK")


if __name__ == "__main__":
    main()

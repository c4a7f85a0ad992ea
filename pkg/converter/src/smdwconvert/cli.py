"""Command line entry points for conversion and fixture generation."""

import importlib.resources
import sys
from pathlib import Path

import click
import torch

from stylemixdg.weights import WeightArchive, WeightArchiveError

from . import convert as conv
from . import golden, refnet, testimages


def default_layer_map() -> Path:
    return Path(importlib.resources.files("smdwconvert") / "layer_map.txt")


@click.group()
def main():
    """Convert AdaIN checkpoints to SMDW and emit golden fixtures."""


@main.command("make-checkpoints")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--output-dir", type=click.Path(), required=True)
def make_checkpoints(seed, output_dir):
    """Write seeded stand-in encoder/decoder checkpoints.

    The released pre-trained networks are not downloadable here; these
    random but correctly-shaped checkpoints exercise the exact same
    conversion path.
    """
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    enc, dec = refnet.make_standin_state_dicts(seed)
    torch.save(enc, out / "encoder.pth")
    torch.save(dec, out / "decoder.pth")
    click.echo(f"wrote encoder.pth ({len(enc)} tensors) and "
               f"decoder.pth ({len(dec)} tensors) to {out}")


@main.command("convert")
@click.option("--encoder", "encoder_path", type=click.Path(exists=True), required=True)
@click.option("--decoder", "decoder_path", type=click.Path(exists=True), required=True)
@click.option("--layer-map", "layer_map_path", type=click.Path(exists=True))
@click.option("--output", type=click.Path(), required=True)
@click.option("--report", "report_path", type=click.Path())
def convert_cmd(encoder_path, decoder_path, layer_map_path, output, report_path):
    """Convert checkpoints to an SMDW archive plus a conversion report."""
    layer_map = conv.read_layer_map(layer_map_path or default_layer_map())
    try:
        archive, report = conv.convert(
            {"encoder": encoder_path, "decoder": decoder_path}, layer_map)
    except conv.ConversionError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    archive.save(output)
    if report_path:
        Path(report_path).write_text(report.to_json(), encoding="utf-8")
    click.echo(f"wrote {len(archive)} tensors to {output} "
               f"(archive sha256 {report.archive_digest[:16]})")


@main.command("emit-golden")
@click.option("--archive", "archive_path", type=click.Path(exists=True), required=True)
@click.option("--content", "content_path", type=click.Path(exists=True))
@click.option("--style", "style_path", type=click.Path(exists=True))
@click.option("--output-dir", type=click.Path(), required=True)
@click.option("--alpha", type=float, default=1.0, show_default=True)
def emit_golden_cmd(archive_path, content_path, style_path, output_dir, alpha):
    """Run the reference network and write the fixture bundle.

    Without --content/--style, deterministic built-in 256x256 test
    images are generated into the output directory and used.
    """
    try:
        archive = WeightArchive.load(archive_path)
    except WeightArchiveError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if content_path is None or style_path is None:
        from PIL import Image
        import numpy as np
        content_path = out / "content.png"
        style_path = out / "style.png"
        Image.fromarray((testimages.content_image() * 255.0).round()
                        .astype(np.uint8)).save(content_path)
        Image.fromarray((testimages.style_image() * 255.0).round()
                        .astype(np.uint8)).save(style_path)
    manifest = golden.emit_golden(archive, content_path, style_path, out, alpha=alpha)
    click.echo(f"wrote {len(manifest['files'])} fixture files to {out}")


if __name__ == "__main__":
    main()

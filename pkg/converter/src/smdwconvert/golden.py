"""Golden fixture emission: reference activations and the stylized image.

Runs the torch reference network with converted weights and writes the
artifacts the engine's conformance tests compare against. Fixtures are
committed, so those tests never execute this module.
"""

import hashlib
import json
from pathlib import Path

import numpy as np
import torch
from PIL import Image

from stylemixdg.weights import WeightArchive

from .refnet import (
    DECODER_CONV_INDEX,
    ENCODER_CONV_INDEX,
    adain,
    build_decoder,
    build_encoder,
    to_image,
    to_tensor,
)

FIXTURE_MANIFEST = "manifest.json"


def load_networks(archive: WeightArchive) -> tuple:
    """Instantiate the reference encoder/decoder with archive weights."""
    encoder, decoder = build_encoder(), build_decoder()
    for module, index in ((encoder, ENCODER_CONV_INDEX),
                          (decoder, DECODER_CONV_INDEX)):
        state = {}
        for name, i in index.items():
            state[f"{i}.weight"] = torch.from_numpy(archive[f"{name}.weight"].copy())
            state[f"{i}.bias"] = torch.from_numpy(archive[f"{name}.bias"].copy())
        module.load_state_dict(state)
        module.eval()
    return encoder, decoder


def _load_image(path) -> np.ndarray:
    with Image.open(path) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32)
    return arr / 255.0


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def emit_golden(archive: WeightArchive, content_path, style_path, out_dir,
                alpha: float = 1.0, eps: float = 1e-5) -> dict:
    """Write the fixture bundle and return its manifest.

    Bundle contents: the two input images (copied), relu4_1 activations
    for each, the post-adain features, the decoded image, and a manifest
    with per-file digests. Activations are stored channels-last.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    encoder, decoder = load_networks(archive)

    content = _load_image(content_path)
    style = _load_image(style_path)
    with torch.no_grad():
        feat_c = encoder(to_tensor(content))
        feat_s = encoder(to_tensor(style))
        mixed = adain(feat_c, feat_s, alpha=alpha, eps=eps)
        decoded = to_image(decoder(mixed))

    Image.fromarray((content * 255.0).round().astype(np.uint8)).save(out / "content.png")
    Image.fromarray((style * 255.0).round().astype(np.uint8)).save(out / "style.png")
    Image.fromarray((decoded * 255.0).round().astype(np.uint8)).save(out / "decoded.png")
    hwc = lambda t: np.ascontiguousarray(t[0].permute(1, 2, 0).numpy())
    np.save(out / "content_relu4_1.npy", hwc(feat_c))
    np.save(out / "style_relu4_1.npy", hwc(feat_s))
    np.save(out / "adain_features.npy", hwc(mixed))
    np.save(out / "decoded.npy", decoded)

    files = ["content.png", "style.png", "content_relu4_1.npy",
             "style_relu4_1.npy", "adain_features.npy", "decoded.npy",
             "decoded.png"]
    manifest = {
        "alpha": alpha,
        "epsilon_std": eps,
        "archive_sha256": hashlib.sha256(archive.to_bytes()).hexdigest(),
        "files": {name: _digest(out / name) for name in files},
    }
    with open(out / FIXTURE_MANIFEST, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest

import json

import numpy as np
import pytest
import torch
from PIL import Image

from smdwconvert.cli import default_layer_map
from smdwconvert.convert import convert, read_layer_map
from smdwconvert.golden import emit_golden, load_networks
from smdwconvert.refnet import make_standin_state_dicts, to_tensor
from smdwconvert.testimages import content_image, style_image


@pytest.fixture(scope="module")
def archive(tmp_path_factory):
    root = tmp_path_factory.mktemp("ckpt")
    enc, dec = make_standin_state_dicts(seed=0)
    torch.save(enc, root / "encoder.pth")
    torch.save(dec, root / "decoder.pth")
    arc, _ = convert({"encoder": root / "encoder.pth", "decoder": root / "decoder.pth"},
                     read_layer_map(default_layer_map()))
    return arc


@pytest.fixture(scope="module")
def images(tmp_path_factory):
    root = tmp_path_factory.mktemp("img")
    for name, img in (("content.png", content_image()), ("style.png", style_image())):
        Image.fromarray((img * 255.0).round().astype(np.uint8)).save(root / name)
    return root / "content.png", root / "style.png"


def test_bundle_contents_and_digests(archive, images, tmp_path):
    manifest = emit_golden(archive, *images, tmp_path)
    assert set(manifest["files"]) == {
        "content.png", "style.png", "content_relu4_1.npy", "style_relu4_1.npy",
        "adain_features.npy", "decoded.npy", "decoded.png"}
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk == manifest
    feat = np.load(tmp_path / "content_relu4_1.npy")
    assert feat.shape == (32, 32, 512)  # 256 / stride 8
    decoded = np.load(tmp_path / "decoded.npy")
    assert decoded.shape == (256, 256, 3)
    assert decoded.min() >= 0.0 and decoded.max() <= 1.0


def test_reemission_is_identical(archive, images, tmp_path):
    first = emit_golden(archive, *images, tmp_path / "a")
    second = emit_golden(archive, *images, tmp_path / "b")
    assert first["files"] == second["files"]
    assert first["archive_sha256"] == second["archive_sha256"]


def test_alpha_zero_passes_content_features_through(archive, images, tmp_path):
    manifest = emit_golden(archive, *images, tmp_path, alpha=0.0)
    assert manifest["alpha"] == 0.0
    content_feat = np.load(tmp_path / "content_relu4_1.npy")
    mixed = np.load(tmp_path / "adain_features.npy")
    np.testing.assert_array_equal(mixed, content_feat)


def test_reference_decode_reconstructs_feature_path(archive, images, tmp_path):
    # decoded.npy must equal running the reference nets by hand
    manifest = emit_golden(archive, *images, tmp_path, alpha=0.0)
    del manifest
    encoder, decoder = load_networks(archive)
    with Image.open(images[0]) as im:
        content = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    with torch.no_grad():
        direct = decoder(encoder(to_tensor(content))).clamp(0, 1)[0]
    np.testing.assert_allclose(np.load(tmp_path / "decoded.npy"),
                               direct.permute(1, 2, 0).numpy(), atol=1e-6)

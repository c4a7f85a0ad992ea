import numpy as np
import pytest
import torch

from stylemixdg.network import conv_layer_specs
from stylemixdg.weights import WeightArchive

from smdwconvert.cli import default_layer_map
from smdwconvert.convert import ConversionError, convert, read_layer_map
from smdwconvert.refnet import make_standin_state_dicts


@pytest.fixture(scope="module")
def checkpoints(tmp_path_factory):
    root = tmp_path_factory.mktemp("ckpt")
    enc, dec = make_standin_state_dicts(seed=0)
    torch.save(enc, root / "encoder.pth")
    torch.save(dec, root / "decoder.pth")
    return {"encoder": root / "encoder.pth", "decoder": root / "decoder.pth"}


@pytest.fixture(scope="module")
def layer_map():
    return read_layer_map(default_layer_map())


def test_convert_is_deterministic(checkpoints, layer_map):
    archive_a, report_a = convert(checkpoints, layer_map)
    archive_b, report_b = convert(checkpoints, layer_map)
    assert archive_a.to_bytes() == archive_b.to_bytes()
    assert report_a.archive_digest == report_b.archive_digest


def test_census_covers_every_layer(checkpoints, layer_map):
    archive, report = convert(checkpoints, layer_map)
    expected = conv_layer_specs()
    assert len(report.layers) == len(expected)
    assert sorted(e["name"] for e in report.layers) == sorted(n for n, *_ in expected)
    assert report.tensor_count == len(archive) == 2 * len(expected)
    assert set(report.checkpoint_digests) == {"encoder", "decoder"}


def test_payloads_are_bit_exact(checkpoints, layer_map):
    archive, _ = convert(checkpoints, layer_map)
    enc = torch.load(checkpoints["encoder"], map_location="cpu", weights_only=True)
    np.testing.assert_array_equal(archive["encoder.conv4_1.weight"],
                                  enc["29.weight"].numpy())
    np.testing.assert_array_equal(archive["encoder.conv4_1.bias"],
                                  enc["29.bias"].numpy())


def test_round_trips_through_archive_file(checkpoints, layer_map, tmp_path):
    archive, report = convert(checkpoints, layer_map)
    archive.save(tmp_path / "weights.smdw")
    loaded = WeightArchive.load(tmp_path / "weights.smdw")
    assert loaded.to_bytes() == archive.to_bytes()
    shapes = {e["name"]: tuple(e["weight_shape"]) for e in report.layers}
    for name, shape in shapes.items():
        assert loaded[f"{name}.weight"].shape == shape


def test_dropped_layer_is_fatal_and_named(checkpoints, layer_map, tmp_path):
    enc = torch.load(checkpoints["encoder"], map_location="cpu", weights_only=True)
    del enc["29.weight"], enc["29.bias"]
    torch.save(enc, tmp_path / "encoder.pth")
    broken = dict(checkpoints, encoder=tmp_path / "encoder.pth")
    with pytest.raises(ConversionError, match="encoder.conv4_1"):
        convert(broken, layer_map)


def test_shape_mismatch_is_fatal_and_named(checkpoints, layer_map, tmp_path):
    dec = torch.load(checkpoints["decoder"], map_location="cpu", weights_only=True)
    dec["1.weight"] = dec["1.weight"][:, :256]
    torch.save(dec, tmp_path / "decoder.pth")
    broken = dict(checkpoints, decoder=tmp_path / "decoder.pth")
    with pytest.raises(ConversionError, match="decoder.conv4_1"):
        convert(broken, layer_map)


def test_unmapped_conv_tensor_is_fatal(checkpoints, layer_map, tmp_path):
    enc = torch.load(checkpoints["encoder"], map_location="cpu", weights_only=True)
    enc["31.weight"] = torch.zeros(8, 8, 3, 3)
    torch.save(enc, tmp_path / "encoder.pth")
    extra = dict(checkpoints, encoder=tmp_path / "encoder.pth")
    with pytest.raises(ConversionError, match="unmapped"):
        convert(extra, layer_map)


def test_incomplete_layer_map_is_fatal(checkpoints, layer_map):
    trimmed = [m for m in layer_map if m.archive_name != "decoder.conv1_1"]
    with pytest.raises(ConversionError, match="decoder.conv1_1"):
        convert(checkpoints, trimmed)

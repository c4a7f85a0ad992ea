"""Checkpoint tensors -> SMDW archive, with a full conversion census."""

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from stylemixdg.network import conv_layer_specs, validate_archive
from stylemixdg.weights import WeightArchive


class ConversionError(Exception):
    """Missing layers, shape mismatches, or malformed layer maps."""


@dataclass(frozen=True)
class LayerMapping:
    """One archive layer's source: which checkpoint and which key prefix."""

    archive_name: str
    checkpoint: str
    key_prefix: str


def read_layer_map(path) -> list:
    """Parse `archive_name checkpoint:key_prefix` lines; '#' starts a comment."""
    mappings = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or ":" not in parts[1]:
                raise ConversionError(
                    f"{path}:{lineno}: expected 'archive_name checkpoint:key_prefix'")
            checkpoint, prefix = parts[1].split(":", 1)
            mappings.append(LayerMapping(parts[0], checkpoint, prefix))
    return mappings


@dataclass
class ConversionReport:
    """Provenance and census of one conversion run."""

    checkpoint_digests: dict = field(default_factory=dict)
    layers: list = field(default_factory=list)  # per-layer mapping + shape census
    tensor_count: int = 0
    archive_digest: str = ""

    def to_json(self) -> str:
        return json.dumps({
            "checkpoint_digests": self.checkpoint_digests,
            "layers": self.layers,
            "tensor_count": self.tensor_count,
            "archive_digest": self.archive_digest,
        }, indent=2, sort_keys=True) + "\n"


def _sha256(blob: bytes) -> str:
    return hashlib.sha256(blob).hexdigest()


def _load_checkpoint(path) -> dict:
    state = torch.load(path, map_location="cpu", weights_only=True)
    return {k: v for k, v in state.items()}


def convert(checkpoint_paths: dict, layer_map: list) -> tuple:
    """Build the archive from checkpoints under a layer map.

    ``checkpoint_paths`` maps checkpoint ids (as referenced by the layer
    map) to file paths. Every conv layer of the network description must
    be mapped exactly once; leftover rank-4 checkpoint tensors mean the
    map missed part of the in-scope subgraph. Both are fatal.
    """
    states = {name: _load_checkpoint(path)
              for name, path in checkpoint_paths.items()}
    by_name = {m.archive_name: m for m in layer_map}
    if len(by_name) != len(layer_map):
        dupes = [m.archive_name for m in layer_map
                 if sum(n.archive_name == m.archive_name for n in layer_map) > 1]
        raise ConversionError(f"layer map lists {dupes[0]!r} more than once")

    archive = WeightArchive()
    report = ConversionReport()
    for name, path in checkpoint_paths.items():
        report.checkpoint_digests[name] = _sha256(Path(path).read_bytes())

    consumed = set()
    for name, cin, cout, k in conv_layer_specs():
        mapping = by_name.pop(name, None)
        if mapping is None:
            raise ConversionError(f"layer map has no entry for layer {name!r}")
        if mapping.checkpoint not in states:
            raise ConversionError(
                f"layer {name!r} references unknown checkpoint {mapping.checkpoint!r}")
        state = states[mapping.checkpoint]
        tensors = {}
        for part in ("weight", "bias"):
            key = f"{mapping.key_prefix}.{part}"
            if key not in state:
                raise ConversionError(
                    f"layer {name!r}: checkpoint {mapping.checkpoint!r} has no "
                    f"tensor {key!r}")
            tensors[part] = state[key].numpy()
            consumed.add((mapping.checkpoint, key))
        expected = {"weight": (cout, cin, k, k), "bias": (cout,)}
        for part, shape in expected.items():
            if tensors[part].shape != shape:
                raise ConversionError(
                    f"layer {name!r}: {part} shape {tensors[part].shape} does not "
                    f"match expected {shape}")
        archive.add(f"{name}.weight", tensors["weight"])
        archive.add(f"{name}.bias", tensors["bias"])
        report.layers.append({
            "name": name,
            "source": f"{mapping.checkpoint}:{mapping.key_prefix}",
            "weight_shape": list(expected["weight"]),
            "bias_shape": list(expected["bias"]),
            "weight_sha256": _sha256(np.ascontiguousarray(
                tensors["weight"], dtype="<f4").tobytes()),
            "bias_sha256": _sha256(np.ascontiguousarray(
                tensors["bias"], dtype="<f4").tobytes()),
        })

    if by_name:
        raise ConversionError(
            f"layer map entry {next(iter(by_name))!r} matches no layer "
            f"in the network description")
    leftovers = [f"{ckpt}:{key}" for ckpt, state in states.items()
                 for key, val in state.items()
                 if val.ndim == 4 and (ckpt, key) not in consumed]
    if leftovers:
        raise ConversionError(
            f"{len(leftovers)} unmapped conv tensors remain in the checkpoints "
            f"(first: {leftovers[0]!r})")

    validate_archive(archive)
    report.tensor_count = len(archive)
    report.archive_digest = _sha256(archive.to_bytes())
    return archive, report

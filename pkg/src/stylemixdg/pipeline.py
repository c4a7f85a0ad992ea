"""Offline dataset construction.

Prepares style pools, cuts content images into square patches, runs the
stylization engine N times per patch, and emits a deterministic JSON
manifest describing the augmented dataset. Reruns with the same seed and
config skip work that is already on disk.
"""

import hashlib
import json
import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image

from .adain import AdainEngine, StylizeConfig
from .imops import (
    center_square_crop,
    load_label,
    load_rgb,
    resize_bilinear,
    save_label,
    save_rgb,
    to_uint8,
    to_unit,
)
from .seeding import derive_seed, rng_for
from .tcps import Bin, ComplexityScore
from .weights import WeightArchive

import cv2

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}

MANIFEST_FORMAT = "stylemixdg-manifest"
MANIFEST_VERSION = 1

STYLE_SOURCES = ("artistic", "intra", "external")


@dataclass(frozen=True)
class StyleRecord:
    id: str
    path: str
    width: int
    height: int
    score: ComplexityScore | None = None


@dataclass(frozen=True)
class PipelineConfig:
    content_dir: str = ""
    style_dir: str = ""
    output_dir: str = ""
    label_dir: str | None = None
    style_source: str = "artistic"
    n_variants: int = 3
    style_pool_size: int = 10000
    seed: int = 0
    patch_side: int = 1052
    resize_to: int = 640
    style_min_side: int = 512
    tcps_filter: str | None = None
    scores_file: str | None = None
    p_aug: float = 0.8
    alpha: float = 1.0
    max_failure_fraction: float = 0.0
    workers: int = 1

    def __post_init__(self):
        if self.n_variants < 1:
            raise ValueError("n_variants must be >= 1")
        if self.style_pool_size < self.n_variants:
            raise ValueError("style_pool_size must be >= n_variants")
        if self.style_source not in STYLE_SOURCES:
            raise ValueError(f"style_source must be one of {STYLE_SOURCES}")
        if self.tcps_filter is not None:
            Bin(self.tcps_filter)
        if not 0.0 <= self.p_aug <= 1.0:
            raise ValueError("p_aug must be in [0, 1]")

    def canonical_dict(self) -> dict:
        # Excludes purely operational knobs so reruns with a different
        # worker count keep the same digest.
        d = {
            "content_dir": self.content_dir,
            "style_dir": self.style_dir,
            "label_dir": self.label_dir,
            "style_source": self.style_source,
            "n_variants": self.n_variants,
            "style_pool_size": self.style_pool_size,
            "seed": self.seed,
            "patch_side": self.patch_side,
            "resize_to": self.resize_to,
            "style_min_side": self.style_min_side,
            "tcps_filter": self.tcps_filter,
            "p_aug": self.p_aug,
            "alpha": self.alpha,
        }
        return d

    def digest(self) -> str:
        blob = json.dumps(self.canonical_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def list_images(directory) -> list:
    """Sorted image paths under a directory (non-recursive)."""
    root = Path(directory)
    if not root.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    return sorted(p for p in root.iterdir()
                  if p.suffix.lower() in IMAGE_EXTENSIONS)


def prepare_style(image: np.ndarray, side: int = 512) -> np.ndarray:
    """Largest square-center crop, bilinearly resized to side x side."""
    h, w = image.shape[:2]
    if min(h, w) < side:
        raise ValueError(f"style image {w}x{h} smaller than {side} on a side")
    return resize_bilinear(center_square_crop(image), side, side)


def content_patches(image: np.ndarray, side: int = 1052) -> list:
    """Two full-height square patches with minimal horizontal overlap.

    Patch A sits at x = 0 and patch B at x = W - side, both vertically
    centered. When the image is exactly side x side the two positions
    coincide and a single patch is returned.
    """
    h, w = image.shape[:2]
    if w < side or h < side:
        raise ValueError(f"image {w}x{h} smaller than patch side {side}")
    y0 = (h - side) // 2
    offsets = [(0, y0)]
    if w - side != 0:
        offsets.append((w - side, y0))
    return [(image[y:y + side, x:x + side], (x, y)) for x, y in offsets]


def _probe_size(path) -> tuple:
    with Image.open(path) as im:
        return im.size  # (width, height)


def build_pool(cfg: PipelineConfig, scores: dict | None = None) -> list:
    """Admit style images, optionally filter by complexity bin, sample the pool.

    ``scores`` maps image id (stem) to ComplexityScore and is required when
    ``tcps_filter`` is set.
    """
    candidates = []
    for path in list_images(cfg.style_dir):
        w, h = _probe_size(path)
        if min(w, h) < cfg.style_min_side:
            continue
        score = scores.get(path.stem) if scores else None
        candidates.append(StyleRecord(id=path.stem, path=str(path),
                                      width=w, height=h, score=score))
    if cfg.tcps_filter is not None:
        wanted = Bin(cfg.tcps_filter)
        missing = [r.id for r in candidates if r.score is None]
        if missing:
            raise ValueError(
                f"tcps_filter set but {len(missing)} admitted images have no score "
                f"(first: {missing[0]!r}); run `score` first")
        candidates = [r for r in candidates if r.score.bin == wanted]
    return sample_records(candidates, cfg.style_pool_size, cfg.seed)


def sample_records(records: list, size: int, seed: int) -> list:
    """Uniform seeded sampling without replacement, stable output order."""
    if size > len(records):
        raise ValueError(f"requested pool of {size} from {len(records)} admissible images")
    ordered = sorted(records, key=lambda r: r.id)
    idx = rng_for(seed, "build-pool").choice(len(ordered), size=size, replace=False)
    return [ordered[i] for i in sorted(idx)]


class _LruCache:
    """Tiny thread-safe LRU for encoded feature maps."""

    def __init__(self, maxsize: int):
        self._maxsize = maxsize
        self._lock = threading.Lock()
        self._data: dict = {}

    def get(self, key, compute):
        with self._lock:
            if key in self._data:
                val = self._data.pop(key)
                self._data[key] = val
                return val
        val = compute()
        with self._lock:
            self._data[key] = val
            while len(self._data) > self._maxsize:
                self._data.pop(next(iter(self._data)))
        return val


def variant_styles(seed: int, entry_id: str, pool_size: int, n: int) -> list:
    """Distinct pool indices for one entry, a pure function of (seed, id)."""
    rng = rng_for(seed, "variant-styles", entry_id)
    return [int(i) for i in rng.choice(pool_size, size=n, replace=False)]


def _file_digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


def _fresh(path: Path, digests: dict) -> bool:
    """True when the output already exists with the recorded digest."""
    rel = path.name
    return rel in digests and path.is_file() and _file_digest(path) == digests[rel]


def augment_dataset(cfg: PipelineConfig, pool: list, archive: WeightArchive) -> dict:
    """Run the offline stylization pass and return the manifest document.

    Outputs land in ``cfg.output_dir``: the manifest, a resized copy of
    each content patch (and its label, when labels are provided), and
    ``n_variants`` stylized PNGs per patch. Deterministic for a fixed
    (seed, config): reruns produce byte-identical manifests and skip
    images already on disk.
    """
    if len(pool) < cfg.n_variants:
        raise ValueError("style pool smaller than n_variants")
    out_dir = Path(cfg.output_dir)
    images_dir = out_dir / "images"
    images_dir.mkdir(parents=True, exist_ok=True)
    engine = AdainEngine(archive)
    stylize_cfg = StylizeConfig(alpha=cfg.alpha)
    weights_digest = hashlib.sha256(archive.to_bytes()).hexdigest()[:16]

    prior_digests: dict = {}
    manifest_path = out_dir / "manifest.json"
    if manifest_path.is_file():
        try:
            prior = read_manifest(manifest_path)
            if (prior.get("config_digest") == cfg.digest()
                    and prior.get("weights_digest") == weights_digest):
                prior_digests = prior.get("output_digests", {})
        except (json.JSONDecodeError, KeyError):
            log.warning("ignoring unreadable prior manifest at %s", manifest_path)

    style_feat_cache = _LruCache(maxsize=64)
    content_feat_cache = _LruCache(maxsize=8)

    entries = []
    jobs = []
    for content_path in list_images(cfg.content_dir):
        image = load_rgb(content_path)
        label_path = None
        if cfg.label_dir is not None:
            cand = Path(cfg.label_dir) / (content_path.stem + ".png")
            if cand.is_file():
                label_path = cand
        patches = content_patches(image, cfg.patch_side)
        for patch_idx, (patch, (x, y)) in enumerate(patches):
            entry_id = f"{content_path.stem}_p{patch_idx}"
            original_name = f"{entry_id}.png"
            original_path = images_dir / original_name
            if not _fresh(original_path, prior_digests):
                save_rgb(original_path, resize_bilinear(patch, cfg.resize_to, cfg.resize_to))
            label_name = None
            if label_path is not None:
                label_name = f"{entry_id}_label.png"
                label_out = images_dir / label_name
                if not _fresh(label_out, prior_digests):
                    lab = load_label(label_path)[y:y + cfg.patch_side, x:x + cfg.patch_side]
                    lab = cv2.resize(lab.astype(np.uint8), (cfg.resize_to, cfg.resize_to),
                                     interpolation=cv2.INTER_NEAREST)
                    save_label(label_out, lab)
            style_idx = variant_styles(cfg.seed, entry_id, len(pool), cfg.n_variants)
            variants = []
            for v, pool_i in enumerate(style_idx):
                style_rec = pool[pool_i]
                variant_name = f"{entry_id}_v{v}_{style_rec.id}.png"
                variant_seed = derive_seed(cfg.seed, entry_id, v)
                variants.append({"path": f"images/{variant_name}",
                                 "style_id": style_rec.id,
                                 "seed": variant_seed})
                jobs.append((entry_id, patch, style_rec, images_dir / variant_name))
            entries.append({
                "id": entry_id,
                "source_image": str(content_path),
                "source_offset": [x, y],
                "original": f"images/{original_name}",
                "label": f"images/{label_name}" if label_name else None,
                "variants": variants,
            })

    failures = []

    def run_job(job):
        entry_id, patch, style_rec, out_path = job
        if _fresh(out_path, prior_digests):
            return
        try:
            content = to_unit(patch)
            content_feat = content_feat_cache.get(
                entry_id, lambda: engine.encode_nhwc(content))
            style_feat = style_feat_cache.get(
                style_rec.id,
                lambda: engine.encode_nhwc(to_unit(prepare_style(
                    load_rgb(style_rec.path), side=cfg.style_min_side))))
            stylized = engine.stylize_nhwc(content, None, stylize_cfg,
                                           style_features=style_feat)
            del content_feat  # kept warm in the cache for sibling variants
            out = resize_bilinear(to_uint8(stylized), cfg.resize_to, cfg.resize_to)
            save_rgb(out_path, out)
        except Exception as exc:  # pragma: no cover - exercised via failure test
            log.error("stylization failed for %s with style %s: %s",
                      entry_id, style_rec.id, exc)
            failures.append((entry_id, style_rec.id, str(exc)))

    if cfg.workers <= 1:
        for job in jobs:
            run_job(job)
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool_exec:
            list(pool_exec.map(run_job, jobs))

    if jobs and len(failures) / len(jobs) > cfg.max_failure_fraction:
        raise RuntimeError(
            f"{len(failures)}/{len(jobs)} stylization jobs failed "
            f"(limit {cfg.max_failure_fraction:.2%}); first: {failures[0]}")

    failed_keys = {(e, s) for e, s, _ in failures}
    for entry in entries:
        entry["variants"] = [v for v in entry["variants"]
                             if (entry["id"], v["style_id"]) not in failed_keys]

    digests = {}
    for entry in entries:
        names = [entry["original"]] + [v["path"] for v in entry["variants"]]
        if entry["label"]:
            names.append(entry["label"])
        for rel in names:
            digests[Path(rel).name] = _file_digest(out_dir / rel)

    manifest = {
        "format": MANIFEST_FORMAT,
        "version": MANIFEST_VERSION,
        "seed": cfg.seed,
        "config_digest": cfg.digest(),
        "weights_digest": weights_digest,
        "config": cfg.canonical_dict(),
        "n_variants": cfg.n_variants,
        "p_aug": cfg.p_aug,
        "entries": sorted(entries, key=lambda e: e["id"]),
        "output_digests": digests,
    }
    write_manifest(manifest_path, manifest)
    return manifest


def write_manifest(path, manifest: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, sort_keys=True, indent=2)
        f.write("\n")


def read_manifest(path) -> dict:
    with open(path, encoding="utf-8") as f:
        doc = json.load(f)
    if doc.get("format") != MANIFEST_FORMAT:
        raise ValueError(f"{path} is not a stylemixdg manifest")
    return doc

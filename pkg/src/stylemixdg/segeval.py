"""19-class label harmonization and IoU / mIoU evaluation."""

import json
from dataclasses import dataclass, field

import numpy as np

NUM_CLASSES = 19
IGNORE = 255

CLASS_NAMES = (
    "road", "sidewalk", "building", "wall", "fence", "pole",
    "traffic light", "traffic sign", "vegetation", "terrain", "sky",
    "person", "rider", "car", "truck", "bus", "train", "motorcycle",
    "bicycle",
)

# Community-standard 19-class harmonization for datasets labeled with the
# 34-id Cityscapes scheme (GTAV ships the same ids); not transcribed from
# any single source table. BDD100K and Mapillary Vistas need map files.
_CITYSCAPES_ID_TO_TRAIN = {
    7: 0, 8: 1, 11: 2, 12: 3, 13: 4, 17: 5, 19: 6, 20: 7, 21: 8, 22: 9,
    23: 10, 24: 11, 25: 12, 26: 13, 27: 14, 28: 15, 31: 16, 32: 17, 33: 18,
}

BUILTIN_LABEL_MAPS = {
    "cityscapes": _CITYSCAPES_ID_TO_TRAIN,
    "gtav": _CITYSCAPES_ID_TO_TRAIN,
}


@dataclass(frozen=True)
class LabelMap:
    """Total mapping from native label ids to [0, 18] or IGNORE."""

    dataset: str
    mapping: dict

    def __post_init__(self):
        for native, harmonized in self.mapping.items():
            if harmonized != IGNORE and not 0 <= harmonized < NUM_CLASSES:
                raise ValueError(
                    f"harmonized id {harmonized} for native {native} outside "
                    f"[0, {NUM_CLASSES - 1}] + IGNORE")

    @classmethod
    def builtin(cls, dataset: str) -> "LabelMap":
        try:
            return cls(dataset, dict(BUILTIN_LABEL_MAPS[dataset]))
        except KeyError:
            raise ValueError(f"no builtin label map for {dataset!r}") from None

    @classmethod
    def from_file(cls, path) -> "LabelMap":
        """Parse a map file: one `native_id harmonized_id` pair per line."""
        mapping = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                parts = line.replace(":", " ").split()
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected 'native harmonized'")
                mapping[int(parts[0])] = int(parts[1])
        return cls(str(path), mapping)

    def lookup_table(self, max_id: int = 256) -> np.ndarray:
        table = np.full(max_id, IGNORE, dtype=np.int64)
        for native, harmonized in self.mapping.items():
            if 0 <= native < max_id:
                table[native] = harmonized
        return table


def remap(label_image: np.ndarray, label_map: LabelMap) -> np.ndarray:
    """Elementwise harmonization; ids absent from the map become IGNORE."""
    labels = label_image.astype(np.int64)
    top = max(256, int(labels.max()) + 1 if labels.size else 256)
    return label_map.lookup_table(top)[labels]


@dataclass
class ConfusionMatrix:
    """19x19 counts, rows = ground truth, columns = prediction."""

    counts: np.ndarray = field(
        default_factory=lambda: np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64))

    def merge(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    @property
    def total(self) -> int:
        return int(self.counts.sum())


def accumulate(conf: ConfusionMatrix, gt: np.ndarray, pred: np.ndarray) -> ConfusionMatrix:
    """Add one (ground truth, prediction) pair of harmonized label images."""
    if gt.shape != pred.shape:
        raise ValueError(f"gt shape {gt.shape} != pred shape {pred.shape}")
    valid = gt != IGNORE
    g = gt[valid].astype(np.int64)
    p = pred[valid].astype(np.int64)
    if p.size and (p.min() < 0 or p.max() >= NUM_CLASSES):
        bad = p[(p < 0) | (p >= NUM_CLASSES)][0]
        raise ValueError(f"prediction id {bad} outside [0, {NUM_CLASSES - 1}]")
    binned = np.bincount(g * NUM_CLASSES + p, minlength=NUM_CLASSES * NUM_CLASSES)
    return ConfusionMatrix(conf.counts + binned.reshape(NUM_CLASSES, NUM_CLASSES))


def miou(conf: ConfusionMatrix):
    """Per-class IoU (None for zero-union classes) and their mean.

    IoU_c = TP / (TP + FP + FN); classes absent from both ground truth
    and prediction are excluded from the mean.
    """
    if conf.total == 0:
        raise ValueError("confusion matrix is empty: no evaluated pixels")
    tp = np.diag(conf.counts).astype(np.float64)
    fp = conf.counts.sum(axis=0) - tp
    fn = conf.counts.sum(axis=1) - tp
    union = tp + fp + fn
    per_class = [float(tp[c] / union[c]) if union[c] > 0 else None
                 for c in range(NUM_CLASSES)]
    present = [v for v in per_class if v is not None]
    return per_class, sum(present) / len(present)


def report(conf: ConfusionMatrix) -> dict:
    """Machine-readable evaluation report."""
    per_class, mean = miou(conf)
    return {
        "per_class_iou": {CLASS_NAMES[c]: per_class[c] for c in range(NUM_CLASSES)},
        "miou": mean,
        "evaluated_pixels": conf.total,
    }


def format_report(doc: dict) -> str:
    """Human-readable IoU table."""
    lines = [f"{'class':<15}{'IoU':>8}"]
    for name, iou in doc["per_class_iou"].items():
        lines.append(f"{name:<15}{'--' if iou is None else f'{iou:7.4f}':>8}")
    lines.append(f"{'mIoU':<15}{doc['miou']:>8.4f}")
    lines.append(f"pixels evaluated: {doc['evaluated_pixels']}")
    return "\n".join(lines)


def write_report(path, doc: dict) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(doc, f, sort_keys=True, indent=2)
        f.write("\n")

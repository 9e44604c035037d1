"""File formats: model documents, image sources, perturbation grammar, and
the JSON results/oracle documents.

The model document is JSON with an ordered layer list; each layer carries a
dense row-major weight matrix, a bias vector, and an activation tag ("relu"
or "linear").  Images load either from a comma-separated text grid or from a
big-endian IDX file plus index.  Results documents round-trip losslessly.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from . import polytope as pt
from .attention import ValueRange
from .errors import (
    ConfigError,
    ImageFormatError,
    InputError,
    ModelFormatError,
    UnsupportedLayerError,
)
from .network import AffineLayer, Network
from .perturb import Brightness, ImageMeta, Patch, PerturbationSpec, Translation
from .verify import GridOracleResult, RegionVerdict

RESULTS_VERSION = "attnverify-results/1"
ORACLE_VERSION = "attnverify-oracle/1"
IDX_IMAGE_MAGIC = 0x00000803

_ACTIVATIONS = {"relu": True, "linear": False}


def load_model(path: str) -> Network:
    """Parse a model document into a Network, validating dimension chaining."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(doc, dict) or "layers" not in doc:
        raise ModelFormatError(f"{path}: missing 'layers' list")
    layers = []
    for k, entry in enumerate(doc["layers"]):
        act = entry.get("activation", "linear")
        if act not in _ACTIVATIONS:
            raise UnsupportedLayerError(
                f"{path}: layer {k} has unsupported activation {act!r}; "
                "only 'relu' and 'linear' layers are handled"
            )
        try:
            w = np.array(entry["weights"], dtype=float)
            b = np.array(entry["bias"], dtype=float)
        except (KeyError, ValueError) as exc:
            raise ModelFormatError(f"{path}: layer {k} is malformed ({exc})") from exc
        if w.ndim != 2:
            raise ModelFormatError(f"{path}: layer {k} weights must be a matrix")
        layers.append(AffineLayer(weights=w, bias=b, has_relu=_ACTIVATIONS[act]))
    try:
        return Network(layers=tuple(layers))
    except InputError as exc:
        raise ModelFormatError(f"{path}: {exc}") from exc


def save_model(net: Network, path: str) -> None:
    doc = {
        "layers": [
            {
                "weights": layer.weights.tolist(),
                "bias": layer.bias.tolist(),
                "activation": "relu" if layer.has_relu else "linear",
            }
            for layer in net.layers
        ]
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)


def load_idx_images(path: str) -> np.ndarray:
    """Decode a big-endian IDX image file into a (count, h, w) uint8 array."""
    with open(path, "rb") as fh:
        header = fh.read(16)
        if len(header) < 16:
            raise ImageFormatError(f"{path}: truncated IDX header")
        magic, count, rows, cols = struct.unpack(">iiii", header)
        if magic != IDX_IMAGE_MAGIC:
            raise ImageFormatError(
                f"{path}: bad IDX magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        data = fh.read(count * rows * cols)
    if len(data) != count * rows * cols:
        raise ImageFormatError(f"{path}: truncated IDX pixel data")
    return np.frombuffer(data, dtype=np.uint8).reshape(count, rows, cols)


def load_image(source: str) -> tuple[np.ndarray, ImageMeta]:
    """Load a pixel vector in [0, 1] plus its shape.

    `source` is either a text-grid path (comma-separated rows of reals) or
    "idx:<path>:<index>" for one image of an IDX dataset file.
    """
    if source.startswith("idx:"):
        try:
            _, path, index_s = source.split(":", 2)
            index = int(index_s)
        except ValueError as exc:
            raise ImageFormatError(
                f"{source!r}: expected idx:<path>:<index>"
            ) from exc
        images = load_idx_images(path)
        if not 0 <= index < images.shape[0]:
            raise ImageFormatError(
                f"{path}: index {index} out of range 0..{images.shape[0] - 1}"
            )
        img = images[index].astype(float) / 255.0
        h, w = img.shape
        return img.ravel(), ImageMeta(width=w, height=h)
    rows = []
    with open(source, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(v) for v in line.split(",")])
            except ValueError as exc:
                raise ImageFormatError(f"{source}: bad pixel value ({exc})") from exc
    if not rows:
        raise ImageFormatError(f"{source}: empty image file")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise ImageFormatError(f"{source}: ragged rows {sorted(widths)}")
    grid = np.array(rows, dtype=float)
    if np.any(grid < 0.0) or np.any(grid > 1.0):
        raise ImageFormatError(f"{source}: pixels must lie in [0, 1]")
    h, w = grid.shape
    return grid.ravel(), ImageMeta(width=w, height=h)


def parse_perturbation(text: str, meta: ImageMeta) -> PerturbationSpec:
    """Parse the perturbation grammar into a spec bound to the image shape.

    Atoms join with '+' in application order:
      brightness:<lo>..<hi>
      patch:px=<u>,py=<u>,pw=<u>,ph=<u>:<lo>..<hi>
      translate:tx=<i>:<lo>..<hi>
    """
    text = text.strip()
    if not text:
        raise ConfigError("empty perturbation string")
    atoms, box = [], []
    for part in text.split("+"):
        fields = part.strip().split(":")
        kind = fields[0].strip().lower()
        if kind == "brightness":
            if len(fields) != 2:
                raise ConfigError(f"bad brightness atom {part!r}")
            atoms.append(Brightness())
            box.append(_parse_range(fields[1]))
        elif kind == "patch":
            if len(fields) != 3:
                raise ConfigError(f"bad patch atom {part!r}")
            kv = _parse_kv(fields[1], ("px", "py", "pw", "ph"))
            atoms.append(Patch(**kv))
            box.append(_parse_range(fields[2]))
        elif kind == "translate":
            if len(fields) != 3:
                raise ConfigError(f"bad translate atom {part!r}")
            kv = _parse_kv(fields[1], ("tx",))
            atoms.append(Translation(**kv))
            box.append(_parse_range(fields[2]))
        else:
            raise ConfigError(f"unknown perturbation kind {kind!r}")
    try:
        return PerturbationSpec(
            atoms=tuple(atoms), theta_box=np.array(box), image_meta=meta
        )
    except InputError as exc:
        raise ConfigError(str(exc)) from exc


def _parse_range(text: str) -> tuple[float, float]:
    try:
        lo_s, hi_s = text.split("..")
        return float(lo_s), float(hi_s)
    except ValueError as exc:
        raise ConfigError(f"bad parameter range {text!r}, expected <lo>..<hi>") from exc


def _parse_kv(text: str, keys: tuple[str, ...]) -> dict:
    out = {}
    for item in text.split(","):
        try:
            k, v = item.split("=")
            out[k.strip()] = int(v)
        except ValueError as exc:
            raise ConfigError(f"bad constant {item!r}") from exc
    if set(out) != set(keys):
        raise ConfigError(f"expected constants {keys}, got {tuple(out)}")
    return out


def format_perturbation(spec: PerturbationSpec) -> str:
    parts = []
    for atom, (lo, hi) in zip(spec.atoms, spec.theta_box):
        rng = f"{lo:g}..{hi:g}"
        if isinstance(atom, Brightness):
            parts.append(f"brightness:{rng}")
        elif isinstance(atom, Patch):
            parts.append(
                f"patch:px={atom.px},py={atom.py},pw={atom.pw},ph={atom.ph}:{rng}"
            )
        else:
            parts.append(f"translate:tx={atom.tx}:{rng}")
    return "+".join(parts)


@dataclass
class ResultsDocument:
    """Serializable record of one traversal run."""

    problem: dict
    original_label: int
    regions: list[dict]
    stats: dict
    version: str = RESULTS_VERSION

    def to_json(self) -> str:
        doc = {
            "version": self.version,
            "problem": self.problem,
            "original_label": self.original_label,
            "regions": self.regions,
            "stats": self.stats,
        }
        return json.dumps(doc, sort_keys=True, indent=1)

    @staticmethod
    def from_json(text: str) -> "ResultsDocument":
        doc = json.loads(text)
        if doc.get("version") != RESULTS_VERSION:
            raise ConfigError(f"unknown results version {doc.get('version')!r}")
        return ResultsDocument(
            problem=doc["problem"],
            original_label=int(doc["original_label"]),
            regions=doc["regions"],
            stats=doc["stats"],
        )

    def region_verdicts(self) -> list[RegionVerdict]:
        """Rebuild verdict objects (for reconciliation and rendering)."""
        out = []
        for rec in self.regions:
            region = pt.HPolytope(
                A=np.array(rec["halfspaces"]["A"], dtype=float),
                b=np.array(rec["halfspaces"]["b"], dtype=float),
                row_labels=tuple(("row", i) for i in range(len(rec["halfspaces"]["b"]))),
            )
            out.append(
                RegionVerdict(
                    region=region,
                    cls_verdict=rec["cls_verdict"],
                    attn_verdict=rec["attn_verdict"],
                    ai_range=ValueRange(*rec["ai_range"]),
                    margin_min=rec["margin_min"],
                    witness=np.array(rec["witness"], dtype=float),
                    cls_range=tuple(rec["cls_range"]),
                    pattern_key=tuple(rec.get("pattern", ())),
                )
            )
        return out


def results_from_traversal(result, problem: dict, original_label: int) -> ResultsDocument:
    regions = []
    for v in result.verdicts:
        regions.append(
            {
                "halfspaces": {
                    "A": v.region.A.tolist(),
                    "b": v.region.b.tolist(),
                },
                "cls_verdict": v.cls_verdict,
                "attn_verdict": v.attn_verdict,
                "ai_range": [v.ai_range.lo, v.ai_range.up],
                "margin_min": v.margin_min,
                "cls_range": list(v.cls_range),
                "witness": v.witness.tolist(),
                "pattern": list(v.pattern_key),
            }
        )
    return ResultsDocument(
        problem=problem,
        original_label=original_label,
        regions=regions,
        stats=result.stats,
    )


def oracle_to_json(oracle: GridOracleResult, problem: dict) -> str:
    doc = {
        "version": ORACLE_VERSION,
        "problem": problem,
        "resolution": oracle.resolution,
        "theta_box": oracle.theta_box.tolist(),
        "original_label": oracle.original_label,
        "labels": oracle.labels.tolist(),
        "ai_values": oracle.ai_values.tolist(),
    }
    return json.dumps(doc, sort_keys=True, indent=1)


def oracle_from_json(text: str) -> GridOracleResult:
    doc = json.loads(text)
    if doc.get("version") != ORACLE_VERSION:
        raise ConfigError(f"unknown oracle version {doc.get('version')!r}")
    return GridOracleResult(
        resolution=int(doc["resolution"]),
        theta_box=np.array(doc["theta_box"], dtype=float),
        labels=np.array(doc["labels"], dtype=int),
        ai_values=np.array(doc["ai_values"], dtype=float),
        original_label=int(doc["original_label"]),
    )

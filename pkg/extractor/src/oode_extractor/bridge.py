"""Image folder -> OODE embeddings, via a pretrained torchvision backbone.

The encoder is a ResNet with its classification/projection layers replaced by
identity, so rows are post-pooling backbone features. Row order is a pure
function of the sorted file listing. Undecodable images are skipped and
logged; the final report carries written/skipped counts.

The OODE byte format (magic "OODE", version u32 LE, n u64 LE, d u64 LE, then
n*d float32 LE row-major) is the handoff to the detection pipeline; this
package writes it directly and never imports the pipeline.
"""

from __future__ import annotations

import argparse
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torchvision.models import resnet18, resnet34, resnet50

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".gif", ".webp"}

# ImageNet statistics; standard preprocessing for torchvision backbones.
CHANNEL_MEAN = np.array([0.485, 0.456, 0.406], dtype=np.float32)
CHANNEL_STD = np.array([0.229, 0.224, 0.225], dtype=np.float32)

ENCODERS = {
    "resnet18": (resnet18, 512),
    "resnet34": (resnet34, 512),
    "resnet50": (resnet50, 2048),
}

# Checkpoint key prefixes that wrap the backbone, and head keys to drop.
WRAPPER_PREFIXES = ("module.", "backbone.", "encoder.", "model.")
HEAD_PREFIXES = ("fc.", "head.", "projector.", "projection_head.", "mlp.")


class CheckpointMissingError(Exception):
    """Checkpoint file absent or not loadable into the chosen encoder."""


class DecodeError(Exception):
    """No image in the folder could be decoded."""


@dataclass(frozen=True)
class ExtractionJob:
    input_dir: Path
    checkpoint: Path
    output: Path
    encoder: str = "resnet18"
    batch_size: int = 64
    image_size: int = 224
    device: str = "cpu"
    deterministic: bool = True

    def __post_init__(self):
        if self.encoder not in ENCODERS:
            raise ValueError(f"encoder must be one of {sorted(ENCODERS)}, got {self.encoder!r}")
        if self.batch_size < 1 or self.image_size < 8:
            raise ValueError("batch_size must be >= 1 and image_size >= 8")


@dataclass
class ExtractionReport:
    output: Path
    rows_written: int
    feature_dim: int
    skipped: list[str] = field(default_factory=list)


def load_encoder(name: str, checkpoint: Path, device: str) -> torch.nn.Module:
    """Build the backbone and load checkpoint weights, dropping any head."""
    checkpoint = Path(checkpoint)
    if not checkpoint.is_file():
        raise CheckpointMissingError(f"checkpoint not found: {checkpoint}")
    builder, _ = ENCODERS[name]
    model = builder(weights=None)

    raw = torch.load(checkpoint, map_location="cpu", weights_only=True)
    if isinstance(raw, dict) and "state_dict" in raw:
        raw = raw["state_dict"]
    cleaned = {}
    for key, value in raw.items():
        for prefix in WRAPPER_PREFIXES:
            if key.startswith(prefix):
                key = key[len(prefix):]
                break
        if key.startswith(HEAD_PREFIXES):
            continue
        cleaned[key] = value

    model.fc = torch.nn.Identity()
    try:
        result = model.load_state_dict(cleaned, strict=False)
    except RuntimeError as exc:  # tensor shape mismatches
        raise CheckpointMissingError(f"checkpoint incompatible with {name}: {exc}") from exc
    missing = [k for k in result.missing_keys if not k.startswith("fc.")]
    if missing:
        raise CheckpointMissingError(
            f"checkpoint lacks {len(missing)} backbone tensors for {name}, "
            f"first: {missing[:3]}"
        )
    model.eval()
    return model.to(device)


def list_images(folder: Path) -> list[Path]:
    """Sorted listing; row order downstream follows this exactly."""
    folder = Path(folder)
    if not folder.is_dir():
        raise FileNotFoundError(f"input folder not found: {folder}")
    return sorted(
        (p for p in folder.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES),
        key=lambda p: p.name,
    )


def decode_image(path: Path, size: int) -> np.ndarray:
    with Image.open(path) as img:
        rgb = img.convert("RGB").resize((size, size), Image.BILINEAR)
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    arr = (arr - CHANNEL_MEAN) / CHANNEL_STD
    return arr.transpose(2, 0, 1)  # CHW


def write_oode(matrix: np.ndarray, path: Path) -> None:
    matrix = np.ascontiguousarray(matrix, dtype=np.float32)
    if not np.isfinite(matrix).all():
        raise ValueError("refusing to write non-finite embeddings")
    n, d = matrix.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4sIQQ", b"OODE", 1, n, d))
        fh.write(matrix.astype("<f4").tobytes())


def extract(job: ExtractionJob) -> ExtractionReport:
    """Embed every decodable image; one row per image in sorted-name order."""
    if job.deterministic:
        torch.manual_seed(0)
        torch.set_num_threads(1)
        if job.device.startswith("cuda"):
            torch.backends.cudnn.deterministic = True
            torch.backends.cudnn.benchmark = False

    model = load_encoder(job.encoder, job.checkpoint, job.device)
    paths = list_images(job.input_dir)
    if not paths:
        raise DecodeError(f"no image files in {job.input_dir}")

    batches: list[np.ndarray] = []
    pending: list[np.ndarray] = []
    skipped: list[str] = []

    def flush():
        if not pending:
            return
        stack = torch.from_numpy(np.stack(pending)).to(job.device)
        with torch.no_grad():
            features = model(stack)
        batches.append(features.cpu().numpy().astype(np.float32))
        pending.clear()

    for path in paths:
        try:
            pending.append(decode_image(path, job.image_size))
        except Exception as exc:  # skip-and-log policy
            skipped.append(path.name)
            print(f"skip {path.name}: {exc}", file=sys.stderr)
            continue
        if len(pending) == job.batch_size:
            flush()
    flush()

    if not batches:
        raise DecodeError(f"none of the {len(paths)} files could be decoded")
    matrix = np.vstack(batches)
    write_oode(matrix, job.output)
    return ExtractionReport(
        output=Path(job.output),
        rows_written=matrix.shape[0],
        feature_dim=matrix.shape[1],
        skipped=skipped,
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="oode-extract",
        description="Embed an image folder with a pretrained encoder and write OODE",
    )
    parser.add_argument("--input", required=True, help="image folder")
    parser.add_argument("--checkpoint", required=True,
                        help="path to a torchvision-compatible state dict (.pt)")
    parser.add_argument("--encoder", default="resnet18", choices=sorted(ENCODERS))
    parser.add_argument("--batch-size", type=int, default=64)
    parser.add_argument("--image-size", type=int, default=224)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--no-deterministic", action="store_true",
                        help="skip the single-thread/seed pinning")
    parser.add_argument("--out", required=True, help="OODE output path")
    args = parser.parse_args(argv)

    job = ExtractionJob(
        input_dir=Path(args.input),
        checkpoint=Path(args.checkpoint),
        output=Path(args.out),
        encoder=args.encoder,
        batch_size=args.batch_size,
        image_size=args.image_size,
        device=args.device,
        deterministic=not args.no_deterministic,
    )
    try:
        report = extract(job)
    except (CheckpointMissingError, DecodeError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {report.rows_written} rows (d={report.feature_dim}) to "
        f"{report.output}; skipped {len(report.skipped)} undecodable file(s)"
    )
    return 0


if __name__ == "__main__":
    sys.exit(main())

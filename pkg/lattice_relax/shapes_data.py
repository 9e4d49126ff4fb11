#!/usr/bin/env python3
"""
Artificial shapes dataset.

Each instance is one irregular polygon (3 to 13 sides) or a circle, drawn
white on a black grayscale canvas, with a pixel mask labelling background 0
and the shape pixels with the class index (1..12).

Usage:
    shapes-gen --n 1200 --size 64x64 --seed 7 --out data/shapes
"""

import argparse
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
from PIL import Image as PILImage
from PIL import ImageDraw
from scipy import ndimage

from lattice_relax.seeding import CORRUPTION, derive_seed, stream
from lattice_relax.types import Image, InvalidInputError

logger = logging.getLogger(__name__)

CIRCLE = math.inf
SHAPE_CLASSES = (3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, CIRCLE)
NUM_LABELS = len(SHAPE_CLASSES) + 1  # background plus one label per shape class
SHAPE_INTENSITY = 255.0
MIN_CANVAS = 16

# Irregularity of the sampled polygons
CENTER_REGION = (0.25, 0.75)  # Middle half of the canvas, per axis
RADIUS_RANGE = (0.15, 0.35)  # Fraction of min(H, W)
RADIAL_JITTER = (0.85, 1.0)  # Per-vertex fraction of the radius; floor > cos(0.75 * 2pi / 8) keeps k <= 8 convex
ANGULAR_JITTER = 0.25  # Times pi / k


def class_index(shape_class: float) -> int:
    """Mask label of a shape class (1-based; 0 is background)."""
    try:
        return SHAPE_CLASSES.index(shape_class) + 1
    except ValueError:
        raise InvalidInputError(f"Unknown shape class {shape_class}") from None


def class_name(shape_class: float) -> str:
    return "circle" if shape_class == CIRCLE else str(int(shape_class))


def parse_class_name(name: str) -> float:
    return CIRCLE if name == "circle" else int(name)


@dataclass(frozen=True)
class ShapeInstance:
    image: Image
    mask: np.ndarray
    shape_class: float
    seed: Optional[int] = None

    @property
    def label(self) -> int:
        return class_index(self.shape_class)


@dataclass(frozen=True)
class NoiseSpec:
    epsilon: float

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidInputError(f"Noise standard deviation must be >= 0, got {self.epsilon}")


def _sample_frame(H: int, W: int, rng: np.random.Generator) -> Tuple[float, float, float]:
    cx = rng.uniform(CENTER_REGION[0] * W, CENTER_REGION[1] * W)
    cy = rng.uniform(CENTER_REGION[0] * H, CENTER_REGION[1] * H)
    radius = rng.uniform(*RADIUS_RANGE) * min(H, W)
    return cx, cy, radius


def polygon_vertices(sides: int, cx: float, cy: float, radius: float, rng: np.random.Generator) -> np.ndarray:
    """
    Vertices (x, y) of an irregular polygon with `sides` corners.

    Angles stay in order around the center, so the polygon is simple and
    star-shaped about (cx, cy).
    """
    j = np.arange(sides)
    jitter = rng.uniform(-ANGULAR_JITTER, ANGULAR_JITTER, size=sides) * math.pi / sides
    angles = 2 * math.pi * j / sides + jitter
    radii = rng.uniform(*RADIAL_JITTER, size=sides) * radius
    return np.stack([cx + radii * np.cos(angles), cy + radii * np.sin(angles)], axis=1)


def _largest_region(shape: np.ndarray) -> np.ndarray:
    labels, count = ndimage.label(shape)
    if count <= 1:
        return shape
    sizes = ndimage.sum_labels(shape, labels, index=np.arange(1, count + 1))
    return labels == (int(np.argmax(sizes)) + 1)


def generate_polygon(cls: float, H: int, W: int, rng: np.random.Generator) -> ShapeInstance:
    """
    Draw one shape of class `cls` on an H x W canvas.

    Polygons are filled by Pillow's scanline rasterizer; the circle class is
    the exact disc over pixel centers.

    Args:
        cls (float): Number of sides (3..13) or CIRCLE
        H (int): Canvas height, >= 16
        W (int): Canvas width, >= 16
        rng (np.random.Generator): Source of randomness

    Returns:
        ShapeInstance: Image, mask and class
    """
    if H < MIN_CANVAS or W < MIN_CANVAS:
        raise InvalidInputError(f"Canvas must be at least {MIN_CANVAS}x{MIN_CANVAS}, got {H}x{W}")
    label = class_index(cls)
    cx, cy, radius = _sample_frame(H, W, rng)
    if cls == CIRCLE:
        rows, cols = np.mgrid[0:H, 0:W]
        shape = (cols - cx) ** 2 + (rows - cy) ** 2 <= radius ** 2
    else:
        vertices = polygon_vertices(int(cls), cx, cy, radius, rng)
        canvas = PILImage.new("L", (W, H), 0)
        ImageDraw.Draw(canvas).polygon([tuple(v) for v in vertices], fill=255)
        shape = np.asarray(canvas) > 0
    shape = _largest_region(shape)
    image = np.where(shape, SHAPE_INTENSITY, 0.0)
    mask = np.where(shape, label, 0).astype(np.int64)
    return ShapeInstance(image=Image(image), mask=mask, shape_class=cls)


def generate_instance(seed: int, H: int, W: int) -> ShapeInstance:
    """Draw a class uniformly, then the shape, all from one seeded stream."""
    rng = stream(seed)
    cls = SHAPE_CLASSES[int(rng.integers(len(SHAPE_CLASSES)))]
    instance = generate_polygon(cls, H, W, rng)
    return ShapeInstance(image=instance.image, mask=instance.mask, shape_class=cls, seed=seed)


def generate_dataset(N: int, H: int, W: int, seed: int) -> List[ShapeInstance]:
    """
    Generate N instances; instance i uses its own seed derived from (seed, i).

    Returns:
        List[ShapeInstance]: Deterministic given (N, H, W, seed)
    """
    if N < 0:
        raise InvalidInputError(f"Dataset size must be >= 0, got {N}")
    return [generate_instance(derive_seed(seed, index), H, W) for index in range(N)]


def corrupt(image: Image, spec: NoiseSpec, rng: np.random.Generator) -> Image:
    """Add i.i.d. Gaussian noise with standard deviation spec.epsilon; no clamping."""
    return Image(image.data + rng.normal(0.0, spec.epsilon, size=image.data.shape))


def save_dataset(instances: List[ShapeInstance], out_dir: Union[str, Path]) -> None:
    """
    Persist instances as images/NNNN.pgm, images_f32/NNNN.bin, masks/NNNN.pgm
    and manifest.csv (index, class, seed).
    """
    out = Path(out_dir)
    for sub in ("images", "images_f32", "masks"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    records = []
    try:
        for index, instance in enumerate(instances):
            gray = instance.image.data[:, :, 0]
            stored = np.clip(np.rint(gray), 0, 255).astype(np.uint8)
            PILImage.fromarray(stored).save(out / "images" / f"{index:04d}.pgm")
            gray.astype("<f4").tofile(out / "images_f32" / f"{index:04d}.bin")
            PILImage.fromarray(instance.mask.astype(np.uint8)).save(out / "masks" / f"{index:04d}.pgm")
            records.append({"index": index, "class": class_name(instance.shape_class), "seed": instance.seed})
        pd.DataFrame(records, columns=["index", "class", "seed"]).to_csv(
            out / "manifest.csv", index=False, lineterminator="\n"
        )
        logger.info(f"Saved {len(instances)} instances to {out}")
    except Exception as e:
        logger.error(f"Failed to save dataset to {out}: {e}")
        raise


def load_dataset(in_dir: Union[str, Path]) -> List[ShapeInstance]:
    """Read back a directory written by save_dataset (float images)."""
    root = Path(in_dir)
    manifest = pd.read_csv(root / "manifest.csv", dtype={"class": str, "seed": str}, keep_default_na=False)
    instances = []
    for index, name, seed in manifest[["index", "class", "seed"]].itertuples(index=False, name=None):
        mask = np.asarray(PILImage.open(root / "masks" / f"{index:04d}.pgm"), dtype=np.int64)
        height, width = mask.shape
        data = np.fromfile(root / "images_f32" / f"{index:04d}.bin", dtype="<f4").reshape(height, width)
        instances.append(
            ShapeInstance(Image(data.astype(np.float64)), mask, parse_class_name(name), int(seed) if seed else None)
        )
    return instances


def parse_size(text: str) -> Tuple[int, int]:
    """Parse 'HxW' into (H, W)."""
    try:
        height, width = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"Size must look like 64x64, got {text!r}") from None
    return height, width


def main(argv: Optional[List[str]] = None) -> None:
    """Command line entry point for shapes-gen."""
    parser = argparse.ArgumentParser(description="Generate the artificial shapes dataset")
    parser.add_argument("--n", type=int, required=True, help="Number of instances")
    parser.add_argument("--size", type=parse_size, default=(64, 64), help="Canvas size HxW (default: 64x64)")
    parser.add_argument("--seed", type=int, default=0, help="Dataset seed (u64)")
    parser.add_argument("--out", required=True, help="Output directory")
    parser.add_argument("--noise", type=float, default=0.0,
                        help="Gaussian noise standard deviation applied to the stored images (default: 0)")
    args = parser.parse_args(argv)

    logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(levelname)s - %(message)s')
    try:
        height, width = args.size
        instances = generate_dataset(args.n, height, width, args.seed)
        if args.noise > 0:
            spec = NoiseSpec(args.noise)
            instances = [
                ShapeInstance(corrupt(inst.image, spec, stream(inst.seed, CORRUPTION)),
                              inst.mask, inst.shape_class, inst.seed)
                for inst in instances
            ]
            logging.info(f"Corrupted inputs with noise epsilon={args.noise}")
        save_dataset(instances, args.out)
    except Exception as e:
        logging.error(f"Application failed: {e}")
        raise


if __name__ == "__main__":
    main()

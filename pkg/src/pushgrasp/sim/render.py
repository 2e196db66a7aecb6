"""Overhead orthographic depth rendering and synthetic sensor effects.

The camera looks straight down from camera_height over the table. A pixel
reads the range to the tallest geometry whose footprint covers the pixel
center; empty pixels read the full camera height. Standing cylinders cover
a disk and rise to their height; fallen ones cover a height-by-diameter
rectangle along their lying axis and rise to one diameter.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .scene import Scene

DEPTH_ROWS = 38
DEPTH_COLS = 64


class RenderError(ValueError):
    pass


@dataclass
class DepthImage:
    values: np.ndarray  # (rows, cols), meters of range from the camera
    camera_height: float

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def validate(self) -> None:
        if self.values.shape != (DEPTH_ROWS, DEPTH_COLS):
            raise RenderError(f"expected {DEPTH_ROWS}x{DEPTH_COLS}, got {self.values.shape}")
        if not ((self.values > 0) & (self.values <= self.camera_height)).all():
            raise RenderError("depth values must lie in (0, camera_height]")

    def copy(self) -> "DepthImage":
        return DepthImage(self.values.copy(), self.camera_height)


@dataclass
class PointCloud:
    points: np.ndarray  # (n, 3) table-frame coordinates, z up from the table

    def __len__(self) -> int:
        return len(self.points)


def pixel_grid(scene: Scene) -> tuple[np.ndarray, np.ndarray]:
    """Pixel-center coordinates; row 0 is the far (max-y) edge."""
    table = scene.table
    dx = table.width / DEPTH_COLS
    dy = table.depth / DEPTH_ROWS
    xs = table.x_range[0] + (np.arange(DEPTH_COLS) + 0.5) * dx
    ys = table.y_range[1] - (np.arange(DEPTH_ROWS) + 0.5) * dy
    return np.meshgrid(xs, ys)


def _top_heights(scene: Scene) -> np.ndarray:
    gx, gy = pixel_grid(scene)
    top = np.zeros((DEPTH_ROWS, DEPTH_COLS))
    for obj in scene.objects:
        cx, cy = obj.center
        if obj.standing:
            mask = (gx - cx) ** 2 + (gy - cy) ** 2 <= obj.radius ** 2
            height = obj.height
        else:
            ux, uy = obj.axis
            along = (gx - cx) * ux + (gy - cy) * uy
            perp = -(gx - cx) * uy + (gy - cy) * ux
            mask = (np.abs(along) <= obj.height / 2) & (np.abs(perp) <= obj.radius)
            height = 2 * obj.radius
        np.maximum(top, np.where(mask, height, 0.0), out=top)
    return top


def render_depth(scene: Scene) -> DepthImage:
    img = DepthImage(scene.table.camera_height - _top_heights(scene),
                     scene.table.camera_height)
    img.validate()
    return img


def render_pointcloud(scene: Scene) -> PointCloud:
    top = _top_heights(scene)
    gx, gy = pixel_grid(scene)
    mask = top > 0
    points = np.column_stack([gx[mask], gy[mask], top[mask]])
    return PointCloud(points)


def add_sensor_noise(img: DepthImage, seed: int, noise_std: float,
                     dropout_prob: float) -> tuple[np.ndarray, np.ndarray]:
    """Additive Gaussian range noise plus a dropout-hole mask."""
    rng = np.random.default_rng(seed)
    noisy = img.values + rng.normal(0.0, noise_std, img.values.shape)
    noisy = np.clip(noisy, 1e-6, img.camera_height)
    holes = rng.uniform(size=img.values.shape) < dropout_prob
    return noisy, holes


def fill_holes(values: np.ndarray, holes: np.ndarray,
               background: float) -> np.ndarray:
    """Replace hole pixels by their nearest valid pixel's value."""
    if not holes.any():
        return values.copy()
    if holes.all():
        return np.full_like(values, background)
    _, (ri, ci) = ndimage.distance_transform_edt(holes, return_indices=True)
    return values[ri, ci]


def median3x3(values: np.ndarray) -> np.ndarray:
    return ndimage.median_filter(values, size=3, mode="nearest")


def postprocess_depth(img: DepthImage, noise_seed: int,
                      noise_std: float = 0.004,
                      dropout_prob: float = 0.02) -> DepthImage:
    """Simulated sensing followed by cleanup; identity when both knobs are 0."""
    if noise_std == 0.0 and dropout_prob == 0.0:
        return img.copy()
    noisy, holes = add_sensor_noise(img, noise_seed, noise_std, dropout_prob)
    filled = fill_holes(noisy, holes, img.camera_height)
    cleaned = np.clip(median3x3(filled), 1e-6, img.camera_height)
    out = DepthImage(cleaned, img.camera_height)
    out.validate()
    return out


def depth_to_pgm(img: DepthImage) -> bytes:
    """16-bit binary PGM; full camera range maps to 65535."""
    scaled = np.rint(img.values / img.camera_height * 65535.0).astype(">u2")
    header = f"P5\n{img.cols} {img.rows}\n65535\n".encode("ascii")
    return header + scaled.tobytes()


def pgm_to_array(data: bytes) -> np.ndarray:
    """Parse the 16-bit PGM produced by depth_to_pgm back to raw counts."""
    stream = io.BytesIO(data)
    magic = stream.readline().strip()
    if magic != b"P5":
        raise RenderError("not a binary PGM")
    dims = stream.readline().split()
    maxval = int(stream.readline())
    if maxval != 65535:
        raise RenderError("expected 16-bit PGM")
    cols, rows = int(dims[0]), int(dims[1])
    raw = np.frombuffer(stream.read(), dtype=">u2")
    return raw.reshape(rows, cols).astype(np.uint16)

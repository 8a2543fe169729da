"""Image datasets, super-pixel features and BadNets-style square triggers.

Pixel rows are flattened row-major with channels last: pixel ``(r, c, k)``
of an ``H x W x ch`` image sits at column ``(r * W + c) * ch + k``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..data import Dataset, load_csv
from ..errors import DataError
from ..seeding import rng, round_half_up

POOL = 2
# a super-pixel is poisoned when at least this share of its area is trigger
POISON_AREA = 0.25


@dataclass(frozen=True, eq=False)
class ImageDataset:
    images: np.ndarray
    labels: np.ndarray
    height: int
    width: int
    channels: int = 1
    n_classes: int = 2

    def __post_init__(self):
        imgs = np.asarray(self.images, dtype=np.float64)
        if imgs.ndim != 2 or imgs.shape[1] != self.height * self.width * self.channels:
            raise DataError(f"image rows must have {self.height}*{self.width}*{self.channels} "
                            f"values, got shape {imgs.shape}")
        if imgs.size and (imgs.min() < 0 or imgs.max() > 1):
            raise DataError("pixel values must lie in [0, 1]")
        if len(self.labels) != imgs.shape[0]:
            raise DataError("one label per image required")
        object.__setattr__(self, "images", imgs)
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64))

    @property
    def m(self) -> int:
        return self.images.shape[0]

    def cube(self) -> np.ndarray:
        return self.images.reshape(self.m, self.height, self.width, self.channels)


@dataclass(frozen=True)
class TriggerSpec:
    """A square stamped into the lower-right corner, ``offset`` pixels in
    from the bottom and right edges."""

    pattern: np.ndarray = field(default_factory=lambda: np.ones((3, 3)))
    offset: tuple[int, int] = (0, 0)
    poison_fraction: float = 0.15
    source_class: int = 0
    target_class: int = 1

    def __post_init__(self):
        p = np.atleast_2d(np.asarray(self.pattern, dtype=np.float64))
        object.__setattr__(self, "pattern", p)
        if self.source_class == self.target_class:
            raise DataError("source and target classes must differ")
        if not 0 <= self.poison_fraction <= 1:
            raise DataError("poison_fraction must lie in [0, 1]")
        if p.min() < 0 or p.max() > 1:
            raise DataError("trigger pixels must lie in [0, 1]")

    def footprint(self, height: int, width: int) -> np.ndarray:
        h, w = self.pattern.shape
        r0 = height - self.offset[0] - h
        c0 = width - self.offset[1] - w
        if r0 < 0 or c0 < 0 or self.offset[0] < 0 or self.offset[1] < 0:
            raise DataError(f"{h}x{w} trigger at offset {self.offset} does not fit a "
                            f"{height}x{width} image")
        fp = np.zeros((height, width), dtype=bool)
        fp[r0:r0 + h, c0:c0 + w] = True
        return fp


def superpixel_shape(height: int, width: int) -> tuple[int, int]:
    return height // POOL, width // POOL


def superpixelize(img: ImageDataset) -> Dataset:
    """Channel mean, then 2x2 average pooling, flattened row-major."""
    H, W = img.height, img.width
    if H % POOL or W % POOL:
        raise DataError(f"image size {H}x{W} is not divisible into 2x2 blocks")
    if img.channels not in (1, 3):
        raise DataError("images must have 1 or 3 channels")
    gray = img.cube().mean(axis=3)
    pooled = gray.reshape(img.m, H // POOL, POOL, W // POOL, POOL).mean(axis=(2, 4))
    h2, w2 = superpixel_shape(H, W)
    names = tuple(f"sp_{r}_{c}" for r in range(h2) for c in range(w2))
    return Dataset(pooled.reshape(img.m, h2 * w2), img.labels, names, img.n_classes)


def trigger_cell_mask(spec: TriggerSpec, height: int, width: int) -> np.ndarray:
    """Flat super-pixel mask of cells with at least 25% trigger area."""
    fp = spec.footprint(height, width).astype(np.float64)
    share = fp.reshape(height // POOL, POOL, width // POOL, POOL).mean(axis=(1, 3))
    return (share >= POISON_AREA).ravel()


def inject_trigger(img: ImageDataset, spec: TriggerSpec, seed: int):
    """Stamp the trigger into a random share of source-class images and
    relabel them to the target class.

    Returns ``(poisoned_images, cell_mask, point_mask)``; ``cell_mask`` is
    ``m x (H/2 * W/2)`` in super-pixel coordinates.
    """
    H, W = img.height, img.width
    fp = spec.footprint(H, W)
    for c in (spec.source_class, spec.target_class):
        if not 0 <= c < img.n_classes:
            raise DataError(f"class {c} outside [0, {img.n_classes})")
    source = np.flatnonzero(img.labels == spec.source_class)
    k = round_half_up(spec.poison_fraction * len(source))
    chosen = np.sort(rng(seed).choice(source, size=k, replace=False)) if k else np.zeros(0, np.int64)

    cube = img.cube().copy()
    h, w = spec.pattern.shape
    r0, c0 = np.argwhere(fp)[0]
    cube[np.ix_(chosen, np.arange(r0, r0 + h), np.arange(c0, c0 + w))] = spec.pattern[None, :, :, None]
    labels = img.labels.copy()
    labels[chosen] = spec.target_class

    point_mask = np.zeros(img.m, dtype=bool)
    point_mask[chosen] = True
    h2, w2 = superpixel_shape(H, W)
    cell_mask = np.zeros((img.m, h2 * w2), dtype=bool)
    cell_mask[chosen] = trigger_cell_mask(spec, H, W)
    out = ImageDataset(cube.reshape(img.m, -1), labels, H, W, img.channels, img.n_classes)
    return out, cell_mask, point_mask


def _smooth_field(g: np.random.Generator, height: int, width: int, passes: int = 3) -> np.ndarray:
    f = g.standard_normal((height, width))
    for _ in range(passes):
        f = (f + np.roll(f, 1, 0) + np.roll(f, -1, 0) + np.roll(f, 1, 1) + np.roll(f, -1, 1)) / 5
    return f / np.abs(f).max()


def synth_images(m: int = 1000, height: int = 16, width: int = 16, seed: int = 0,
                 contrast: float = 0.15, noise: float = 0.08) -> ImageDataset:
    """Two balanced classes of grayscale Gaussian textures.

    Each class has a smooth template around mid-gray; images add pixel
    noise and are clipped to [0, 0.9] so a white trigger stays distinct.
    """
    if m < 2:
        raise DataError("need at least two images")
    g = rng(seed)
    templates = [0.45 + contrast * _smooth_field(g, height, width) for _ in range(2)]
    labels = g.permutation(np.repeat([0, 1], [m // 2, m - m // 2]))
    base = np.stack([templates[c] for c in labels])
    imgs = np.clip(base + noise * g.standard_normal((m, height, width)), 0.0, 0.9)
    return ImageDataset(imgs.reshape(m, -1), labels, height, width, 1, 2)


def load_image_csv(path, height: int, width: int, channels: int = 1, label_column=-1,
                   has_header: bool = True) -> ImageDataset:
    ds = load_csv(path, label_column, has_header)
    return ImageDataset(ds.features, ds.labels, height, width, channels, ds.n_classes)

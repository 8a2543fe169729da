from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cellval.errors import DataError
from cellval.experiments.images import (ImageDataset, TriggerSpec, inject_trigger,
                                        load_image_csv, superpixelize, synth_images,
                                        trigger_cell_mask)


def test_constant_image():
    img = ImageDataset(np.full((2, 4 * 4 * 3), 0.3), [0, 1], 4, 4, 3)
    assert np.allclose(superpixelize(img).features, 0.3)


def test_cifar_shape():
    img = ImageDataset(np.zeros((1, 32 * 32 * 3)), [0], 32, 32, 3)
    assert superpixelize(img).d == 256


def test_hand_pooling():
    pix = np.array([[0.0, 0.2, 0.4, 0.4],
                    [0.2, 0.2, 0.4, 0.8],
                    [1.0, 1.0, 0.0, 0.1],
                    [1.0, 0.6, 0.1, 0.2]])
    ds = superpixelize(ImageDataset(pix.reshape(1, -1), [0], 4, 4, 1))
    assert np.allclose(ds.features[0], [0.15, 0.5, 0.9, 0.1], atol=1e-15)
    assert ds.feature_names == ("sp_0_0", "sp_0_1", "sp_1_0", "sp_1_1")


def test_channel_last_layout():
    # red=1 everywhere, other channels 0: gray is 1/3
    cube = np.zeros((1, 2, 2, 3))
    cube[..., 0] = 1.0
    ds = superpixelize(ImageDataset(cube.reshape(1, -1), [0], 2, 2, 3))
    assert ds.features[0, 0] == pytest.approx(1 / 3)


@given(arrays(np.float64, (3, 6 * 4), elements=st.floats(0, 1)))
def test_global_mean_preserved(imgs):
    ds = superpixelize(ImageDataset(imgs, [0, 1, 0], 6, 4, 1))
    assert ds.features.mean() == pytest.approx(imgs.mean(), abs=1e-12)


def test_odd_size_rejected():
    with pytest.raises(DataError):
        superpixelize(ImageDataset(np.zeros((1, 9)), [0], 3, 3, 1))


def overlap_oracle(h, w, th, tw, off=(0, 0)):
    """Share of each 2x2 grid covered by a th x tw corner square, by counting pixels."""
    r0, c0 = h - off[0] - th, w - off[1] - tw
    share = np.zeros((h // 2, w // 2))
    for r in range(h):
        for c in range(w):
            if r0 <= r < r0 + th and c0 <= c < c0 + tw:
                share[r // 2, c // 2] += 0.25
    return share


def test_trigger_cells_match_overlap_oracle():
    share = overlap_oracle(16, 16, 3, 3)
    assert sorted(share[share > 0].tolist()) == [0.25, 0.5, 0.5, 1.0]
    mask = trigger_cell_mask(TriggerSpec(), 16, 16).reshape(8, 8)
    assert np.array_equal(mask, share >= 0.25)
    assert np.argwhere(mask).tolist() == [[6, 6], [6, 7], [7, 6], [7, 7]]


@given(st.integers(1, 5), st.integers(1, 5), st.integers(0, 3), st.integers(0, 3))
def test_trigger_mask_property(th, tw, o0, o1):
    spec = TriggerSpec(pattern=np.ones((th, tw)), offset=(o0, o1))
    mask = trigger_cell_mask(spec, 12, 12).reshape(6, 6)
    assert np.array_equal(mask, overlap_oracle(12, 12, th, tw, (o0, o1)) >= 0.25)


def test_injection():
    imgs = synth_images(200, 16, 16, seed=1)
    out, cell_mask, point_mask = inject_trigger(imgs, TriggerSpec(), 5)
    source = np.flatnonzero(imgs.labels == 0)
    assert point_mask.sum() == int(np.floor(0.15 * len(source) + 0.5))
    assert np.all(out.labels[point_mask] == 1) and np.all(imgs.labels[point_mask] == 0)
    cube = out.cube()
    assert np.all(cube[point_mask, 13:, 13:, :] == 1.0)
    assert np.array_equal(out.images[~point_mask], imgs.images[~point_mask])
    assert np.array_equal(cell_mask.any(axis=1), point_mask)
    assert cell_mask.sum(axis=1).max() == 4


def test_zero_poison():
    imgs = synth_images(20, 8, 8, seed=0)
    out, cell_mask, point_mask = inject_trigger(imgs, TriggerSpec(poison_fraction=0.0), 0)
    assert not cell_mask.any() and not point_mask.any()
    assert np.array_equal(out.images, imgs.images)


def test_spec_validation():
    with pytest.raises(DataError):
        TriggerSpec(source_class=1, target_class=1)
    with pytest.raises(DataError):
        TriggerSpec(pattern=np.ones((5, 5))).footprint(4, 4)
    with pytest.raises(DataError):
        ImageDataset(np.full((1, 4), 1.5), [0], 2, 2, 1)


def test_synthetic_images_in_range():
    imgs = synth_images(50, 16, 16, seed=3)
    assert imgs.images.min() >= 0 and imgs.images.max() <= 0.9
    assert np.bincount(imgs.labels).tolist() == [25, 25]


def test_image_csv(tmp_path):
    p = tmp_path / "imgs.csv"
    p.write_text("p0,p1,p2,p3,label\n0,0.5,1,0.25,0\n1,1,1,1,1\n")
    imgs = load_image_csv(p, 2, 2)
    assert imgs.m == 2 and superpixelize(imgs).features[:, 0].tolist() == [0.4375, 1.0]

"""Shared fixture builders for the test suite."""

import struct

import numpy as np

from colangevin.model import Batch, MLPSpec, init_params, layout_unconstrained
from colangevin.numerics import make_rng
from colangevin.params import dense_weight


def kink_free_fixture(widths, loss, seed, batch=8, margin=1e-4):
    """Random (spec, params, batch) whose hidden pre-activations stay off the
    ReLU kink by at least ``margin``, so central differences are clean."""
    spec = MLPSpec(tuple(widths), loss=loss)
    rng = make_rng(seed)
    for _ in range(50):
        params = init_params(spec, layout_unconstrained(spec.n_layers), rng)
        inputs = rng.standard_normal((batch, widths[0]))
        n_classes = widths[-1] if loss == "softmax_cross_entropy" else 2
        targets = rng.integers(0, n_classes, size=batch)
        a = inputs
        ok = True
        for i in range(spec.n_layers):
            w, b = dense_weight(params.entries[2 * i]), params.entries[2 * i + 1]
            z = a @ w.T + b
            if i < spec.n_layers - 1:
                if np.min(np.abs(z)) < margin:
                    ok = False
                    break
                a = np.maximum(z, 0.0)
        if ok:
            return spec, params, Batch(inputs, targets)
    raise RuntimeError("no kink-free fixture found")


def write_idx_images(path, arrays):
    n, h, w = arrays.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">HBB", 0, 0x08, 3))
        fh.write(struct.pack(">III", n, h, w))
        fh.write(arrays.astype(">u1").tobytes())


def write_idx_labels(path, labels):
    with open(path, "wb") as fh:
        fh.write(struct.pack(">HBB", 0, 0x08, 1))
        fh.write(struct.pack(">I", len(labels)))
        fh.write(np.asarray(labels).astype(">u1").tobytes())


def synthetic_image_set(n, side, n_classes, seed):
    """Classifiable uint8 images: class c brightens its own quadrant patch."""
    rng = make_rng(seed)
    labels = rng.integers(0, n_classes, size=n)
    imgs = rng.integers(0, 60, size=(n, side, side))
    half = side // 2
    corners = [(0, 0), (0, half), (half, 0), (half, half)]
    for i, lab in enumerate(labels):
        r, c = corners[int(lab) % len(corners)]
        imgs[i, r : r + half, c : c + half] += 150
    return np.clip(imgs, 0, 255).astype(np.uint8), labels.astype(np.int64)

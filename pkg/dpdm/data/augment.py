"""Image augmentations for augmentation multiplicity and classifier training."""

from typing import Optional, Tuple

import numpy as np


def shift_image(image: np.ndarray, dy: int, dx: int) -> np.ndarray:
    """Translate an (H, W, C) image by whole pixels, filling uncovered pixels with zeros."""
    height, width = image.shape[:2]
    out = np.zeros_like(image)
    if abs(dy) >= height or abs(dx) >= width:
        return out
    src_y = slice(max(-dy, 0), height - max(dy, 0))
    src_x = slice(max(-dx, 0), width - max(dx, 0))
    dst_y = slice(max(dy, 0), height - max(-dy, 0))
    dst_x = slice(max(dx, 0), width - max(-dx, 0))
    out[dst_y, dst_x] = image[src_y, src_x]
    return out


def augment(
    image: np.ndarray,
    policy,
    rng: np.random.Generator,
    *,
    flip: Optional[bool] = None,
    shift: Optional[Tuple[int, int]] = None,
) -> np.ndarray:
    """
    Random horizontal flip (p=0.5) then a shift-crop of up to `policy.max_shift`
    pixels per axis with zero padding.

    `flip` and `shift` force the corresponding draw; forced draws consume no
    randomness. Shape and the [-1, 1] pixel range are preserved.
    """
    out = image
    if policy.flip:
        do_flip = bool(rng.random() < 0.5) if flip is None else flip
        if do_flip:
            out = out[:, ::-1]
    elif flip:
        out = out[:, ::-1]

    if policy.max_shift > 0 or shift is not None:
        if shift is None:
            dy, dx = (int(v) for v in rng.integers(-policy.max_shift, policy.max_shift + 1, size=2))
        else:
            dy, dx = shift
        out = shift_image(out, dy, dx)
    return np.ascontiguousarray(out)


def augment_batch(images: np.ndarray, policy, rng: np.random.Generator) -> np.ndarray:
    """Independent `augment` draws for each image of an (n, H, W, C) stack."""
    return np.stack([augment(img, policy, rng) for img in images]) if len(images) else images

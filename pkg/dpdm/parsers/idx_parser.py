"""Parser and writer for IDX image/label files."""

import gzip
import struct
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np

from ..data.models import LabeledImageSet
from ..utils.errors import ParseError

IDX_LABEL_MAGIC = 0x00000801
IDX_IMAGE_MAGIC = 0x00000803
# Non-standard 4-d variant (n, rows, cols, channels) for colour toy exports
IDX_COLOR_IMAGE_MAGIC = 0x00000804

PathLike = Union[str, Path]


class IdxParser:
    """Reads and writes unsigned-byte IDX files (optionally gzip-compressed)."""

    def _read_bytes(self, path: PathLike) -> bytes:
        path = Path(path)
        try:
            if path.suffix == ".gz":
                with gzip.open(path, "rb") as f:
                    return f.read()
            return path.read_bytes()
        except FileNotFoundError:
            raise ParseError(f"IDX file not found: {path}")
        except OSError as e:
            raise ParseError(f"Failed to read IDX file {path}: {e}")

    def parse_array(self, data: bytes, expected_magic: Tuple[int, ...], what: str) -> np.ndarray:
        """
        Decode one IDX payload.

        Layout: big-endian u32 magic, one big-endian u32 per dimension, then
        unsigned bytes in row-major order.
        """
        if len(data) < 4:
            raise ParseError(f"{what}: file too short for an IDX header")
        (magic,) = struct.unpack(">I", data[:4])
        if magic not in expected_magic:
            raise ParseError(f"{what}: wrong magic 0x{magic:08x}, expected " + " or ".join(f"0x{m:08x}" for m in expected_magic))
        ndim = magic & 0xFF
        header_end = 4 + 4 * ndim
        if len(data) < header_end:
            raise ParseError(f"{what}: truncated header")
        dims = struct.unpack(f">{ndim}I", data[4:header_end])
        expected = int(np.prod(dims, dtype=np.int64))
        payload = data[header_end:]
        if len(payload) < expected:
            raise ParseError(f"{what}: truncated payload, expected {expected} bytes, found {len(payload)}")
        return np.frombuffer(payload[:expected], dtype=np.uint8).reshape(dims)

    def load(
        self,
        images_path: PathLike,
        labels_path: PathLike,
        num_classes: Optional[int] = None,
        domain: str = "finetune",
        split: str = "train",
    ) -> LabeledImageSet:
        """Load images and labels, normalising pixels to [-1, 1] via x/127.5 − 1."""
        raw_images = self.parse_array(
            self._read_bytes(images_path), (IDX_IMAGE_MAGIC, IDX_COLOR_IMAGE_MAGIC), "images"
        )
        raw_labels = self.parse_array(self._read_bytes(labels_path), (IDX_LABEL_MAGIC,), "labels")
        if raw_images.shape[0] != raw_labels.shape[0]:
            raise ParseError(f"image/label count mismatch: {raw_images.shape[0]} images, {raw_labels.shape[0]} labels")
        if raw_images.ndim == 3:
            raw_images = raw_images[..., None]
        images = raw_images.astype(np.float32) / 127.5 - 1.0
        labels = raw_labels.astype(np.int64)
        if num_classes is None:
            num_classes = int(labels.max()) + 1 if labels.size else 0
        return LabeledImageSet(images=images, labels=labels, num_classes=num_classes, domain=domain, split=split)

    def encode_images(self, images: np.ndarray) -> bytes:
        pixels = np.clip(np.rint((np.asarray(images, dtype=np.float64) + 1.0) * 127.5), 0, 255).astype(np.uint8)
        if pixels.ndim == 4 and pixels.shape[3] == 1:
            pixels = pixels[..., 0]
        magic = IDX_IMAGE_MAGIC if pixels.ndim == 3 else IDX_COLOR_IMAGE_MAGIC
        header = struct.pack(">I", magic) + struct.pack(f">{pixels.ndim}I", *pixels.shape)
        return header + pixels.tobytes(order="C")

    def encode_labels(self, labels: np.ndarray) -> bytes:
        values = np.asarray(labels, dtype=np.int64)
        if values.size and (values.min() < 0 or values.max() > 255):
            raise ParseError("IDX labels must fit in an unsigned byte")
        return struct.pack(">II", IDX_LABEL_MAGIC, values.shape[0]) + values.astype(np.uint8).tobytes()

    def write(self, images_path: PathLike, labels_path: PathLike, dataset: LabeledImageSet) -> None:
        """Export a set; an empty set still yields valid headers."""
        images = dataset.images
        if len(dataset) == 0:
            images = np.zeros((0,) + tuple(images.shape[1:] or (1, 1, 1)), dtype=np.float32)
        Path(images_path).write_bytes(self.encode_images(images))
        Path(labels_path).write_bytes(self.encode_labels(dataset.labels))


def load_idx(images_path: PathLike, labels_path: PathLike, **kwargs) -> LabeledImageSet:
    return IdxParser().load(images_path, labels_path, **kwargs)


def write_idx(images_path: PathLike, labels_path: PathLike, dataset: LabeledImageSet) -> None:
    IdxParser().write(images_path, labels_path, dataset)

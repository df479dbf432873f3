"""Tests for the IDX, checkpoint and config codecs."""

import gzip
import struct

import numpy as np
import pytest

from dpdm.data import LabeledImageSet
from dpdm.parsers import Checkpoint, CheckpointParser, ConfigParser, IdxParser, load_idx, write_idx
from dpdm.utils.errors import CheckpointError, ParseError


def idx_images(pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    return struct.pack(">I", 0x803) + struct.pack(">3I", *pixels.shape) + pixels.tobytes()


def idx_labels(labels):
    return struct.pack(">II", 0x801, len(labels)) + bytes(labels)


class TestIdxParser:
    @pytest.fixture
    def files(self, tmp_path):
        images = tmp_path / "images.idx"
        labels = tmp_path / "labels.idx"
        images.write_bytes(idx_images([[[0, 255], [51, 0]], [[255, 255], [0, 0]], [[0, 0], [0, 0]]]))
        labels.write_bytes(idx_labels([2, 0, 1]))
        return images, labels

    def test_load_normalises_pixels(self, files):
        dataset = load_idx(*files)
        assert dataset.image_shape == (2, 2, 1)
        assert dataset.labels.tolist() == [2, 0, 1]
        assert dataset.num_classes == 3
        assert dataset.images[0].ravel().tolist() == pytest.approx([-1.0, 1.0, -0.6, -1.0])

    def test_gzip_files(self, tmp_path, files):
        images, labels = files
        gz = tmp_path / "images.idx.gz"
        with gzip.open(gz, "wb") as f:
            f.write(images.read_bytes())
        assert np.array_equal(load_idx(gz, labels).images, load_idx(images, labels).images)

    def test_wrong_magic(self, tmp_path, files):
        images, _ = files
        with pytest.raises(ParseError, match="wrong magic"):
            load_idx(images, images)

    def test_truncated_payload(self, tmp_path, files):
        images, labels = files
        images.write_bytes(images.read_bytes()[:-1])
        with pytest.raises(ParseError, match="truncated"):
            load_idx(images, labels)

    def test_count_mismatch(self, files):
        images, labels = files
        labels.write_bytes(idx_labels([0, 1]))
        with pytest.raises(ParseError, match="mismatch"):
            load_idx(images, labels)

    def test_missing_file(self, tmp_path, files):
        with pytest.raises(ParseError, match="not found"):
            load_idx(tmp_path / "absent.idx", files[1])

    def test_write_then_load(self, tmp_path):
        pixels = np.array([0, 64, 128, 255], dtype=np.float32).reshape(1, 2, 2, 1) / 127.5 - 1.0
        dataset = LabeledImageSet(images=np.repeat(pixels, 3, axis=0), labels=[0, 1, 1], num_classes=2)
        write_idx(tmp_path / "x.idx", tmp_path / "y.idx", dataset)

        loaded = load_idx(tmp_path / "x.idx", tmp_path / "y.idx", num_classes=2, split="test")
        assert loaded.split == "test"
        assert np.allclose(loaded.images, dataset.images, atol=1e-6)

    def test_colour_images_use_four_dimensions(self, tmp_path):
        dataset = LabeledImageSet(images=np.zeros((2, 3, 3, 3)), labels=[0, 0], num_classes=1)
        write_idx(tmp_path / "x.idx", tmp_path / "y.idx", dataset)
        assert struct.unpack(">I", (tmp_path / "x.idx").read_bytes()[:4])[0] == 0x804
        assert load_idx(tmp_path / "x.idx", tmp_path / "y.idx").image_shape == (3, 3, 3)

    def test_labels_must_fit_a_byte(self):
        with pytest.raises(ParseError):
            IdxParser().encode_labels(np.array([256]))


class TestCheckpointParser:
    @pytest.fixture
    def checkpoint(self, params64, tiny_arch):
        return Checkpoint(
            params=params64,
            arch=tiny_arch,
            ema=params64.scaled(0.5),
            meta={"epsilon": "inf", "steps": "3"},
        )

    def test_write_and_read_preserve_everything(self, tmp_path, checkpoint):
        parser = CheckpointParser()
        loaded = parser.read(parser.write(tmp_path / "run" / "model.ckpt", checkpoint))

        assert loaded.arch == checkpoint.arch
        assert loaded.meta == checkpoint.meta
        assert loaded.params.dtype == np.float64
        assert loaded.params.allclose(checkpoint.params, rtol=0, atol=0)
        assert loaded.ema.allclose(checkpoint.ema, rtol=0, atol=0)
        assert loaded.sampling_params is loaded.ema

    def test_float32_parameters(self, tiny_model, tiny_arch):
        params = tiny_model.init_params(np.random.default_rng(0))
        parser = CheckpointParser()
        loaded = parser.decode(parser.encode(Checkpoint(params=params, arch=tiny_arch)))
        assert loaded.params.dtype == np.float32
        assert loaded.ema is None
        assert loaded.sampling_params is loaded.params

    def test_bad_magic(self, checkpoint):
        data = CheckpointParser().encode(checkpoint)
        with pytest.raises(CheckpointError, match="magic"):
            CheckpointParser().decode(b"NOPE" + data[4:])

    @pytest.mark.parametrize("keep", [10, -3])
    def test_truncation(self, checkpoint, keep):
        data = CheckpointParser().encode(checkpoint)
        with pytest.raises(CheckpointError):
            CheckpointParser().decode(data[:keep])

    def test_unknown_dtype_code(self):
        data = bytearray(CheckpointParser().encode_entries({"x": np.zeros(2)}))
        # magic + version + count, then u16 name length and the one-byte name
        data[12 + 2 + 1] = 9
        with pytest.raises(CheckpointError, match="dtype code"):
            CheckpointParser().decode_entries(bytes(data))

    def test_rejects_integer_arrays(self):
        with pytest.raises(CheckpointError):
            CheckpointParser().encode_entries({"x": np.zeros(2, dtype=np.int32)})

    def test_missing_architecture(self):
        data = CheckpointParser().encode_entries({"params/w": np.zeros(1)})
        with pytest.raises(CheckpointError, match="architecture"):
            CheckpointParser().decode(data)

    def test_missing_parameters(self, tiny_arch):
        data = CheckpointParser().encode_entries({"__arch__": tiny_arch.to_text().encode("utf-8")})
        with pytest.raises(CheckpointError, match="no parameters"):
            CheckpointParser().decode(data)

    def test_unreadable_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            CheckpointParser().read(tmp_path / "absent.ckpt")


class TestConfigParser:
    def test_comments_blanks_and_key_normalisation(self):
        text = "# run settings\nclip_norm = 1.5  # per example\n\nBatch-Size = 8\ntag =\n"
        assert ConfigParser().parse_text(text) == {"clip_norm": "1.5", "batch_size": "8", "tag": ""}

    def test_error_names_the_line(self):
        with pytest.raises(ParseError, match="run.cfg:2"):
            ConfigParser().parse_text("steps = 3\nnonsense\n", source="run.cfg")

    def test_both_override_forms(self):
        overrides = ConfigParser().parse_overrides(["--noise-multiplier", "1.2", "--steps=10"])
        assert overrides == {"noise_multiplier": "1.2", "steps": "10"}

    @pytest.mark.parametrize("args", [["--steps"], ["steps", "3"], ["--", "3"]])
    def test_malformed_overrides(self, args):
        with pytest.raises(ParseError):
            ConfigParser().parse_overrides(args)

    def test_parse_file(self, tmp_path):
        path = tmp_path / "run.cfg"
        path.write_text("seed = 4\n", encoding="utf-8")
        assert ConfigParser().parse_file(path) == {"seed": "4"}
        with pytest.raises(ParseError):
            ConfigParser().parse_file(tmp_path / "absent.cfg")

    def test_render_is_sorted(self):
        assert ConfigParser.render({"b": "2", "a": "1"}) == "a = 1\nb = 2\n"

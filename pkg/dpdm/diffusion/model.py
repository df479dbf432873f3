"""Class-conditional noise-prediction networks ε_θ(x_t, t, y)."""

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np

from ..config import DEFAULT_EMBEDDING_DIM, DEFAULT_MODEL_CHANNELS, DEFAULT_MODEL_KIND
from ..numerics import ParameterSet, Tensor, ops, uniform_fan_in
from ..utils.errors import CheckpointError, ValidationError

MODEL_KINDS = ("conv", "mlp")


@dataclass(frozen=True)
class ArchitectureDescriptor:
    """Everything needed to rebuild a denoiser's parameter structure."""

    image_shape: Tuple[int, int, int]
    kind: str = DEFAULT_MODEL_KIND
    channels: Tuple[int, ...] = DEFAULT_MODEL_CHANNELS
    embedding_dim: int = DEFAULT_EMBEDDING_DIM
    num_classes: int = 0
    kernel_size: int = 3

    def __post_init__(self):
        if self.kind not in MODEL_KINDS:
            raise ValidationError(f"unknown model kind '{self.kind}'")
        if len(self.image_shape) != 3 or min(self.image_shape) < 1:
            raise ValidationError(f"image_shape must be (H, W, C), got {self.image_shape}")
        if not self.channels or min(self.channels) < 1:
            raise ValidationError("channels must be a non-empty list of positive widths")
        if self.embedding_dim < 2 or self.embedding_dim % 2:
            raise ValidationError("embedding_dim must be an even number >= 2")
        if self.num_classes < 0 or self.kernel_size % 2 == 0:
            raise ValidationError("num_classes must be >= 0 and kernel_size odd")

    def to_text(self) -> str:
        """UTF-8 key-value block stored as the checkpoint's `__arch__` entry."""
        lines = [
            f"kind = {self.kind}",
            f"image_shape = {','.join(str(d) for d in self.image_shape)}",
            f"channels = {','.join(str(c) for c in self.channels)}",
            f"embedding_dim = {self.embedding_dim}",
            f"num_classes = {self.num_classes}",
            f"kernel_size = {self.kernel_size}",
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "ArchitectureDescriptor":
        values: Dict[str, str] = {}
        for line in text.splitlines():
            if "=" in line:
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
        try:
            return cls(
                kind=values["kind"],
                image_shape=tuple(int(v) for v in values["image_shape"].split(",")),  # type: ignore[arg-type]
                channels=tuple(int(v) for v in values["channels"].split(",")),
                embedding_dim=int(values["embedding_dim"]),
                num_classes=int(values["num_classes"]),
                kernel_size=int(values["kernel_size"]),
            )
        except (KeyError, ValueError) as e:
            raise CheckpointError(f"malformed architecture block: {e}")


@dataclass
class DenoiserModel:
    """
    Predicts the noise in x_t.

    Timestep and class embeddings are summed and added to every hidden
    block (additive conditioning). The output has the input image's shape.
    """

    arch: ArchitectureDescriptor
    _shapes: Dict[str, Tuple[int, ...]] = field(init=False, repr=False)

    def __post_init__(self):
        self._shapes = self._parameter_shapes()

    @property
    def image_shape(self) -> Tuple[int, int, int]:
        return self.arch.image_shape

    @property
    def input_shape(self) -> Tuple[int, int, int]:
        return self.arch.image_shape

    def _parameter_shapes(self) -> Dict[str, Tuple[int, ...]]:
        a = self.arch
        e = a.embedding_dim
        k = a.kernel_size
        height, width, c = a.image_shape
        shapes: Dict[str, Tuple[int, ...]] = {
            "time.dense1.weight": (e, e),
            "time.dense1.bias": (e,),
            "time.dense2.weight": (e, e),
            "time.dense2.bias": (e,),
        }
        if a.num_classes:
            shapes["class.embedding"] = (a.num_classes, e)
        first = a.channels[0]
        if a.kind == "conv":
            shapes["input.weight"] = (k, k, c, first)
        else:
            shapes["input.weight"] = (height * width * c, first)
        shapes["input.bias"] = (first,)
        prev = first
        for i, ch in enumerate(a.channels):
            shapes[f"block{i}.cond.weight"] = (e, prev)
            shapes[f"block{i}.cond.bias"] = (prev,)
            shapes[f"block{i}.layer.weight"] = (k, k, prev, ch) if a.kind == "conv" else (prev, ch)
            shapes[f"block{i}.layer.bias"] = (ch,)
            prev = ch
        if a.kind == "conv":
            shapes["output.weight"] = (k, k, prev, c)
        else:
            shapes["output.weight"] = (prev, height * width * c)
        shapes["output.bias"] = (c,) if a.kind == "conv" else (height * width * c,)
        return shapes

    def init_params(self, rng: np.random.Generator, dtype=np.float32) -> ParameterSet:
        """Uniform fan-in weights, zero biases; class embeddings use fan-in 1."""
        arrays = {}
        for name, shape in self._shapes.items():
            if name.endswith(".bias"):
                arrays[name] = np.zeros(shape, dtype=dtype)
            elif name == "class.embedding":
                arrays[name] = uniform_fan_in(rng, shape, 1, dtype)
            else:
                fan_in = int(np.prod(shape[:-1]))
                arrays[name] = uniform_fan_in(rng, shape, fan_in, dtype)
        return ParameterSet(arrays)

    def check_params(self, params: ParameterSet) -> None:
        if params.shapes != self._shapes:
            raise CheckpointError("parameters do not match the model architecture")

    def _layer(self, p: Mapping[str, Tensor], name: str, h: Tensor) -> Tensor:
        if self.arch.kind == "conv":
            return ops.conv2d(h, p[f"{name}.weight"], p[f"{name}.bias"])
        return ops.dense(h, p[f"{name}.weight"], p[f"{name}.bias"])

    def embed(self, p: Mapping[str, Tensor], t: np.ndarray, labels: Optional[np.ndarray]) -> Tensor:
        dtype = p["time.dense1.weight"].dtype
        emb = ops.timestep_embedding(np.asarray(t).reshape(-1), self.arch.embedding_dim, dtype=dtype)
        emb = ops.silu(ops.dense(emb, p["time.dense1.weight"], p["time.dense1.bias"]))
        emb = ops.dense(emb, p["time.dense2.weight"], p["time.dense2.bias"])
        if self.arch.num_classes:
            if labels is None:
                raise ValidationError("class-conditional model needs labels")
            emb = ops.add(emb, ops.embedding(p["class.embedding"], labels))
        return emb

    def apply(
        self,
        p: Mapping[str, Tensor],
        x: Tensor,
        t: np.ndarray,
        labels: Optional[np.ndarray] = None,
    ) -> Tensor:
        """ε_θ for a batch x of shape (n, H, W, C) with one timestep (and label) per row."""
        n = x.shape[0]
        t = np.broadcast_to(np.asarray(t, dtype=np.int64).reshape(-1), (n,))
        if labels is not None:
            labels = np.broadcast_to(np.asarray(labels, dtype=np.int64).reshape(-1), (n,))
        emb = ops.silu(self.embed(p, t, labels))

        h = x if self.arch.kind == "conv" else ops.flatten(x)
        h = self._layer(p, "input", h)
        for i in range(len(self.arch.channels)):
            cond = ops.dense(emb, p[f"block{i}.cond.weight"], p[f"block{i}.cond.bias"])
            h = ops.silu(ops.add_conditioning(h, cond))
            h = self._layer(p, f"block{i}.layer", h)
        out = self._layer(p, "output", ops.silu(h))
        return ops.reshape(out, x.shape)

    def bind(self, t: np.ndarray, labels: Optional[np.ndarray] = None):
        """A single-input model function for `numerics.forward`."""

        def model_fn(p: Mapping[str, Tensor], x: Tensor) -> Tensor:
            return self.apply(p, x, t, labels)

        model_fn.input_shape = self.input_shape  # type: ignore[attr-defined]
        return model_fn

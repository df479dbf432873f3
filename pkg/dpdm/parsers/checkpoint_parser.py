"""The DPDM checkpoint file format.

Layout (little-endian): magic `DPDM`, u32 version (=1), u32 entry count; per
entry: u16 name length, UTF-8 name, u8 dtype code, u8 rank, rank × u32 dims,
row-major payload.
"""

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Union

import numpy as np

from ..diffusion.model import ArchitectureDescriptor
from ..numerics import ParameterSet
from ..utils.errors import CheckpointError

MAGIC = b"DPDM"
VERSION = 1

DTYPE_FLOAT32 = 0
DTYPE_FLOAT64 = 1
DTYPE_BYTES = 2
_NUMPY_DTYPES = {DTYPE_FLOAT32: np.dtype("<f4"), DTYPE_FLOAT64: np.dtype("<f8"), DTYPE_BYTES: np.dtype("u1")}

ARCH_ENTRY = "__arch__"
META_ENTRY = "__meta__"
PARAMS_PREFIX = "params/"
EMA_PREFIX = "ema/"

Entry = Union[np.ndarray, bytes]


@dataclass
class Checkpoint:
    """Raw parameters, optional EMA shadow, architecture and free-form metadata."""

    params: ParameterSet
    arch: ArchitectureDescriptor
    ema: Optional[ParameterSet] = None
    meta: Dict[str, str] = field(default_factory=dict)

    @property
    def sampling_params(self) -> ParameterSet:
        """EMA weights when present; they are what gets sampled from."""
        return self.ema if self.ema is not None else self.params


class CheckpointParser:
    """Encode and decode DPDM checkpoint files."""

    def encode_entries(self, entries: Dict[str, Entry]) -> bytes:
        chunks = [MAGIC, struct.pack("<II", VERSION, len(entries))]
        for name in sorted(entries):
            value = entries[name]
            encoded_name = name.encode("utf-8")
            if isinstance(value, bytes):
                code, array = DTYPE_BYTES, np.frombuffer(value, dtype=np.uint8)
            else:
                array = np.asarray(value)
                if array.dtype == np.float64:
                    code = DTYPE_FLOAT64
                elif array.dtype == np.float32:
                    code = DTYPE_FLOAT32
                else:
                    raise CheckpointError(f"unsupported dtype {array.dtype} for entry '{name}'")
            chunks.append(struct.pack("<H", len(encoded_name)))
            chunks.append(encoded_name)
            chunks.append(struct.pack("<BB", code, array.ndim))
            chunks.append(struct.pack(f"<{array.ndim}I", *array.shape))
            chunks.append(np.ascontiguousarray(array, dtype=_NUMPY_DTYPES[code]).tobytes())
        return b"".join(chunks)

    def decode_entries(self, data: bytes) -> Dict[str, Entry]:
        if data[:4] != MAGIC:
            raise CheckpointError("not a DPDM checkpoint (bad magic)")
        try:
            version, count = struct.unpack_from("<II", data, 4)
            if version != VERSION:
                raise CheckpointError(f"unsupported checkpoint version {version}")
            offset = 12
            entries: Dict[str, Entry] = {}
            for _ in range(count):
                (name_len,) = struct.unpack_from("<H", data, offset)
                offset += 2
                name = data[offset : offset + name_len].decode("utf-8")
                offset += name_len
                code, rank = struct.unpack_from("<BB", data, offset)
                offset += 2
                dims = struct.unpack_from(f"<{rank}I", data, offset)
                offset += 4 * rank
                if code not in _NUMPY_DTYPES:
                    raise CheckpointError(f"unknown dtype code {code} for entry '{name}'")
                dtype = _NUMPY_DTYPES[code]
                nbytes = int(np.prod(dims, dtype=np.int64)) * dtype.itemsize
                if offset + nbytes > len(data):
                    raise CheckpointError(f"truncated payload for entry '{name}'")
                raw = data[offset : offset + nbytes]
                offset += nbytes
                if code == DTYPE_BYTES:
                    entries[name] = bytes(raw)
                else:
                    entries[name] = np.frombuffer(raw, dtype=dtype).reshape(dims).astype(dtype.newbyteorder("="))
            return entries
        except (struct.error, UnicodeDecodeError) as e:
            raise CheckpointError(f"truncated or corrupt checkpoint: {e}")

    def encode(self, checkpoint: Checkpoint) -> bytes:
        entries: Dict[str, Entry] = {ARCH_ENTRY: checkpoint.arch.to_text().encode("utf-8")}
        if checkpoint.meta:
            meta = "".join(f"{k} = {v}\n" for k, v in sorted(checkpoint.meta.items()))
            entries[META_ENTRY] = meta.encode("utf-8")
        for name, arr in checkpoint.params.items():
            entries[PARAMS_PREFIX + name] = arr
        if checkpoint.ema is not None:
            for name, arr in checkpoint.ema.items():
                entries[EMA_PREFIX + name] = arr
        return self.encode_entries(entries)

    def decode(self, data: bytes) -> Checkpoint:
        entries = self.decode_entries(data)
        arch_entry = entries.get(ARCH_ENTRY)
        if not isinstance(arch_entry, bytes):
            raise CheckpointError("checkpoint has no architecture block")
        arch = ArchitectureDescriptor.from_text(arch_entry.decode("utf-8"))

        meta: Dict[str, str] = {}
        meta_entry = entries.get(META_ENTRY)
        if isinstance(meta_entry, bytes):
            for line in meta_entry.decode("utf-8").splitlines():
                key, sep, value = line.partition("=")
                if sep:
                    meta[key.strip()] = value.strip()

        params = {k[len(PARAMS_PREFIX) :]: v for k, v in entries.items() if k.startswith(PARAMS_PREFIX)}
        ema = {k[len(EMA_PREFIX) :]: v for k, v in entries.items() if k.startswith(EMA_PREFIX)}
        if not params:
            raise CheckpointError("checkpoint holds no parameters")
        return Checkpoint(
            params=ParameterSet(params),
            arch=arch,
            ema=ParameterSet(ema) if ema else None,
            meta=meta,
        )

    def write(self, path: Union[str, Path], checkpoint: Checkpoint) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(self.encode(checkpoint))
        return path

    def read(self, path: Union[str, Path]) -> Checkpoint:
        try:
            data = Path(path).read_bytes()
        except OSError as e:
            raise CheckpointError(f"cannot read checkpoint {path}: {e}")
        return self.decode(data)

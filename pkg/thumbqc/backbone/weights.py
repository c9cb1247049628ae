"""
Weight Container

Versioned binary container for named parameter tensors (backbone, heads and
aggregators all use it).

Layout (all integers little-endian):

    [4 bytes: magic b"TQCW"]
    [2 bytes: format version] [2 bytes: reserved, 0]
    [8 bytes: header length]
    [header: UTF-8 JSON {"version", "seed", "metadata",
              "tensors": [{"name", "dtype", "shape", "offset", "nbytes"}]}]
    [payload: raw tensor bytes, f32 for floating tensors, i64 for counters]

Offsets are relative to the start of the payload. Loading validates the whole
layout before any tensor is materialised, so truncated or foreign files fail
with WeightFormatError instead of a crash.
"""

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple, Union

import numpy as np
import torch
import torch.nn as nn

from thumbqc.backbone.config import BackboneConfig
from thumbqc.core.errors import WeightFormatError, WeightSchemaError

logger = logging.getLogger(__name__)

MAGIC = b"TQCW"
FORMAT_VERSION = 1
_PREAMBLE = struct.Struct("<4sHHQ")
DTYPES: Dict[str, np.dtype] = {"f32": np.dtype("<f4"), "i64": np.dtype("<i8")}

Shape = Tuple[int, ...]


@dataclass
class WeightStore:
    """Named parameter arrays plus format version and seed provenance."""
    tensors: Dict[str, np.ndarray]
    version: int = FORMAT_VERSION
    seed: Optional[int] = None
    metadata: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_module(
        cls,
        module: nn.Module,
        seed: Optional[int] = None,
        metadata: Optional[Dict[str, Any]] = None,
    ) -> "WeightStore":
        tensors: Dict[str, np.ndarray] = {}
        for name, value in module.state_dict().items():
            array = value.detach().cpu().numpy()
            dtype = DTYPES["f32"] if np.issubdtype(array.dtype, np.floating) else DTYPES["i64"]
            tensors[name] = np.ascontiguousarray(array.astype(dtype))
        return cls(tensors=tensors, seed=seed, metadata=dict(metadata or {}))

    def shapes(self) -> Dict[str, Shape]:
        return {name: tuple(int(d) for d in a.shape) for name, a in self.tensors.items()}

    def to_state_dict(self) -> Dict[str, torch.Tensor]:
        return {name: torch.from_numpy(a.copy()) for name, a in self.tensors.items()}

    def validate_schema(self, schema: Mapping[str, Shape]) -> None:
        """Raise WeightSchemaError naming the first tensor that is missing, extra or mis-shaped."""
        shapes = self.shapes()
        for name, expected in schema.items():
            if name not in shapes:
                raise WeightSchemaError(f"tensor {name!r} is missing", tensor=name)
            if shapes[name] != tuple(expected):
                raise WeightSchemaError(
                    f"tensor {name!r} has shape {list(shapes[name])}, expected {list(expected)}",
                    tensor=name,
                    found=list(shapes[name]),
                    expected=list(expected),
                )
        for name in shapes:
            if name not in schema:
                raise WeightSchemaError(f"unexpected tensor {name!r}", tensor=name)

    def load_into(self, module: nn.Module) -> None:
        schema = {name: tuple(v.shape) for name, v in module.state_dict().items()}
        self.validate_schema(schema)
        module.load_state_dict(self.to_state_dict(), strict=True)


def save_weights(ws: WeightStore) -> bytes:
    entries: List[Dict[str, Any]] = []
    chunks: List[bytes] = []
    offset = 0
    for name, array in ws.tensors.items():
        dtype_name = "f32" if np.issubdtype(array.dtype, np.floating) else "i64"
        raw = np.ascontiguousarray(array, dtype=DTYPES[dtype_name]).tobytes()
        entries.append({
            "name": name,
            "dtype": dtype_name,
            "shape": [int(d) for d in array.shape],
            "offset": offset,
            "nbytes": len(raw),
        })
        chunks.append(raw)
        offset += len(raw)
    header = json.dumps(
        {"version": ws.version, "seed": ws.seed, "metadata": ws.metadata, "tensors": entries},
        sort_keys=True,
    ).encode("utf-8")
    logger.debug("Serialized %d tensors, %.2f MB", len(entries), offset / (1024 * 1024))
    return _PREAMBLE.pack(MAGIC, ws.version, 0, len(header)) + header + b"".join(chunks)


def _non_negative_int(value: Any, field: str, name: Any) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise WeightFormatError(f"tensor {name!r} has invalid {field} {value!r}", tensor=str(name))
    return value


def load_weights(data: bytes) -> WeightStore:
    if len(data) < _PREAMBLE.size:
        raise WeightFormatError("weight container is truncated (no preamble)")
    magic, version, _, header_len = _PREAMBLE.unpack_from(data, 0)
    if magic != MAGIC:
        raise WeightFormatError(f"not a weight container (magic {magic!r})")
    if version != FORMAT_VERSION:
        raise WeightFormatError(
            f"unsupported container version {version}, expected {FORMAT_VERSION}",
            action="Re-export the weights with this version of thumbqc",
            version=version,
        )
    start = _PREAMBLE.size
    if len(data) < start + header_len:
        raise WeightFormatError("weight container is truncated (header)")
    try:
        header = json.loads(data[start:start + header_len].decode("utf-8"))
        entries = header["tensors"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise WeightFormatError(f"corrupt weight container header: {e}")
    if not isinstance(entries, list):
        raise WeightFormatError("corrupt weight container header: tensors is not a list")
    payload = memoryview(data)[start + header_len:]

    tensors: Dict[str, np.ndarray] = {}
    for entry in entries:
        try:
            name, dtype = entry["name"], DTYPES[entry["dtype"]]
            raw_shape, raw_offset, raw_nbytes = list(entry["shape"]), entry["offset"], entry["nbytes"]
            if not isinstance(name, str):
                raise TypeError(f"tensor name {name!r} is not a string")
        except (KeyError, TypeError, ValueError) as e:
            raise WeightFormatError(f"corrupt tensor entry {entry!r}: {e}")
        shape = tuple(_non_negative_int(d, "shape", name) for d in raw_shape)
        offset = _non_negative_int(raw_offset, "offset", name)
        nbytes = _non_negative_int(raw_nbytes, "byte count", name)
        if nbytes != int(np.prod(shape, dtype=np.int64)) * dtype.itemsize:
            raise WeightFormatError(f"tensor {name!r} byte count does not match its shape", tensor=name)
        if offset + nbytes > len(payload):
            raise WeightFormatError(f"weight container is truncated (tensor {name!r})", tensor=name)
        tensors[name] = np.frombuffer(payload[offset:offset + nbytes], dtype=dtype).reshape(shape).copy()
    return WeightStore(
        tensors=tensors,
        version=version,
        seed=header.get("seed"),
        metadata=header.get("metadata") or {},
    )


def save_weights_file(ws: WeightStore, path: Union[str, Path]) -> None:
    Path(path).write_bytes(save_weights(ws))


def load_weights_file(path: Union[str, Path]) -> WeightStore:
    path = Path(path)
    if not path.is_file():
        raise WeightFormatError(f"weight file {path} does not exist")
    return load_weights(path.read_bytes())


def backbone_schema(cfg: BackboneConfig) -> Dict[str, Shape]:
    """Expected state-dict shapes for ``cfg``, computed on the meta device."""
    from thumbqc.backbone.vit import VisionTransformer

    with torch.device("meta"):
        model = VisionTransformer(cfg)
    return {name: tuple(t.shape) for name, t in model.state_dict().items()}


def parameter_names(cfg: BackboneConfig) -> List[str]:
    from thumbqc.backbone.vit import VisionTransformer

    with torch.device("meta"):
        model = VisionTransformer(cfg)
    return [name for name, _ in model.named_parameters()]

"""Model container format.

Byte layout (all integers little-endian):

    offset  size  field
    0       5     magic b"PSNN1"
    5       4     u32 length L of the JSON block
    9       L     UTF-8 JSON: model config plus optional extra metadata
    9+L     ...   tensors as float32 little-endian, C order, in the fixed
                  order w1, u1, b1, w2, u2, b2, dense_w, dense_b, head_w,
                  head_b (gate packing i|f|g|o along the 4H axis)
    end-4   4     u32 CRC32 of every preceding byte

Weights are stored as float32; loading re-embeds them in float64 exactly, so
save(load(data)) == data and load(save(p)) == p whenever p holds
float32-representable values (always true for loaded or saved models).
"""

from __future__ import annotations

import json
import struct
import zlib
from typing import Optional, Tuple

import numpy as np

from ..errors import BadMagic, ChecksumMismatch, SchemaMismatch
from .model import ModelConfig, ModelParams, expected_shapes

MAGIC = b"PSNN1"


def save_model(params: ModelParams, extra: Optional[dict] = None) -> bytes:
    """Serialize params (and optional extra metadata, e.g. pipeline settings)."""
    cfg = params.config
    doc = {
        "input_dim": cfg.input_dim,
        "lstm1_units": cfg.lstm1_units,
        "lstm2_units": cfg.lstm2_units,
        "dense_units": cfg.dense_units,
        "head": cfg.head,
        "dropout_rate": cfg.dropout_rate,
    }
    if extra:
        doc["extra"] = extra
    blob = json.dumps(doc, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", len(blob)), blob]
    for tensor in params.tensors():
        parts.append(np.asarray(tensor, dtype="<f4").tobytes(order="C"))
    payload = b"".join(parts)
    return payload + struct.pack("<I", zlib.crc32(payload))


def load_model(data: bytes) -> Tuple[ModelParams, Optional[dict]]:
    """Inverse of save_model; returns (params, extra-metadata-or-None)."""
    if data[:5] != MAGIC:
        raise BadMagic("not a model container")
    if len(data) < 13:
        raise ChecksumMismatch("container truncated")
    payload, trailer = data[:-4], data[-4:]
    if struct.unpack("<I", trailer)[0] != zlib.crc32(payload):
        raise ChecksumMismatch("CRC32 trailer does not match container contents")
    (json_len,) = struct.unpack_from("<I", data, 5)
    try:
        doc = json.loads(data[9:9 + json_len].decode("utf-8"))
        config = ModelConfig(
            input_dim=int(doc["input_dim"]),
            lstm1_units=int(doc["lstm1_units"]),
            lstm2_units=int(doc["lstm2_units"]),
            dense_units=int(doc["dense_units"]),
            head=doc["head"],
            dropout_rate=float(doc["dropout_rate"]),
        )
    except (KeyError, ValueError, json.JSONDecodeError) as exc:
        raise SchemaMismatch(f"bad model config block: {exc}") from None
    offset = 9 + json_len
    tensors = []
    for shape in expected_shapes(config):
        n = int(np.prod(shape))
        arr = np.frombuffer(payload, dtype="<f4", count=n, offset=offset)
        tensors.append(arr.reshape(shape).astype(np.float64))
        offset += n * 4
    if offset != len(payload):
        raise ChecksumMismatch(
            f"container holds {len(payload) - offset} unexpected trailing bytes")
    return ModelParams.from_tensors(config, tensors), doc.get("extra")


def quantize_params(params: ModelParams) -> ModelParams:
    """Round every tensor to its float32 representation (still float64 dtype).

    After this, save/load round-trips the parameters bit-for-bit.
    """
    return ModelParams.from_tensors(
        params.config,
        [t.astype(np.float32).astype(np.float64) for t in params.tensors()])

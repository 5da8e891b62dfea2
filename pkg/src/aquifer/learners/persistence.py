"""
Model files: a magic line, a JSON metadata line, then the raw little-endian
parameter arrays back to back. The metadata lists each array's name, dtype,
shape and byte offset, and a SHA256 of the payload.
"""
import hashlib
import json
from pathlib import Path

import numpy as np

from ..errors import FormatError
from .model import KINDS, TrainedModel

MAGIC = b"AQUIFER-MODEL\n"
FORMAT_VERSION = 1


def _to_json_value(value):
    if isinstance(value, tuple):
        return [_to_json_value(v) for v in value]
    if isinstance(value, dict):
        return {k: _to_json_value(v) for k, v in value.items()}
    return value


def save_model(model: TrainedModel, path: str | Path) -> None:
    entries = []
    chunks = []
    offset = 0
    for name in sorted(model.arrays):
        array = model.arrays[name]
        dtype = array.dtype.newbyteorder("<")
        raw = np.ascontiguousarray(array, dtype=dtype).tobytes()
        entries.append({"name": name, "dtype": dtype.str, "shape": list(array.shape), "offset": offset})
        chunks.append(raw)
        offset += len(raw)
    payload = b"".join(chunks)
    header = {
        "format_version": FORMAT_VERSION,
        "kind": model.kind,
        "config": _to_json_value(model.config),
        "feature_dim": model.feature_dim,
        "default_threshold": model.default_threshold,
        "seed": model.seed,
        "feature_spec": _to_json_value(model.feature_spec),
        "arrays": entries,
        "payload_bytes": len(payload),
        "payload_sha256": hashlib.sha256(payload).hexdigest(),
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8") + b"\n")
        fh.write(payload)


def load_model(path: str | Path) -> TrainedModel:
    raw = Path(path).read_bytes()
    if not raw.startswith(MAGIC):
        raise FormatError(f"'{path}' is not an aquifer model file.")
    rest = raw[len(MAGIC):]
    newline = rest.find(b"\n")
    if newline < 0:
        raise FormatError(f"'{path}': truncated model header.")
    try:
        header = json.loads(rest[:newline].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FormatError(f"'{path}': model header is not valid JSON ({e}).")
    if header.get("format_version") != FORMAT_VERSION:
        raise FormatError(f"'{path}': unsupported model format version {header.get('format_version')!r}.")
    if header.get("kind") not in KINDS:
        raise FormatError(f"'{path}': unknown model kind {header.get('kind')!r}.")
    payload = rest[newline + 1:]
    if len(payload) != header.get("payload_bytes") or hashlib.sha256(payload).hexdigest() != header.get("payload_sha256"):
        raise FormatError(f"'{path}': model payload is corrupted.")

    arrays = {}
    for entry in header["arrays"]:
        dtype = np.dtype(entry["dtype"])
        count = int(np.prod(entry["shape"], dtype=np.int64))
        array = np.frombuffer(payload, dtype=dtype, count=count, offset=entry["offset"]).reshape(entry["shape"])
        arrays[entry["name"]] = array.astype(dtype.newbyteorder("="))
    return TrainedModel(
        kind=header["kind"],
        config=header["config"],
        feature_dim=header["feature_dim"],
        default_threshold=header["default_threshold"],
        arrays=arrays,
        seed=header["seed"],
        feature_spec=header["feature_spec"],
    )

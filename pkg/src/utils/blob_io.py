"""Binary blob I/O.

A blob is a flat little-endian float64 payload (`<name>.bin`) with a JSON
sidecar (`<name>.bin.json`) listing every named field with its shape and byte
offset. FiLM parameters, covariance weights, classifier caches and linear
heads are all stored this way.
"""

import json
from pathlib import Path
from typing import Any

import numpy as np
import torch

from src.core.errors import ParseError

BLOB_DTYPE = "<f8"


def sidecar_path(path: str | Path) -> Path:
    """Return the JSON sidecar path belonging to a blob."""
    path = Path(path)
    return path.with_name(path.name + ".json")


def _as_array(value: Any) -> np.ndarray:
    if isinstance(value, torch.Tensor):
        value = value.detach().cpu().numpy()
    return np.ascontiguousarray(value, dtype=BLOB_DTYPE)


def write_blob(
    path: str | Path,
    fields: dict[str, Any],
    meta: dict[str, Any] | None = None,
) -> Path:
    """Write named arrays to a blob and its sidecar.

    Args:
        path: Blob path (conventionally ending in `.bin`).
        fields: Ordered mapping of field name to array or tensor.
        meta: Extra JSON-serializable description stored in the sidecar.

    Returns:
        The blob path.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)

    entries = []
    chunks = []
    offset = 0
    for name, value in fields.items():
        array = _as_array(value)
        entries.append(
            {"name": name, "shape": list(array.shape), "offset": offset, "length": int(array.size)}
        )
        chunks.append(array.tobytes())
        offset += array.nbytes

    with open(path, "wb") as f:
        f.write(b"".join(chunks))

    sidecar = {"dtype": BLOB_DTYPE, "nbytes": offset, "meta": meta or {}, "fields": entries}
    with open(sidecar_path(path), "w", encoding="utf-8") as f:
        f.write(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
    return path


def read_blob(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, Any]]:
    """Read a blob written by `write_blob`.

    Returns:
        Tuple of (fields, meta).

    Raises:
        FileNotFoundError: If the blob or its sidecar is missing.
        ParseError: If the payload disagrees with the sidecar.
    """
    path = Path(path)
    side = sidecar_path(path)
    for p in (path, side):
        if not p.exists():
            raise FileNotFoundError(f"Blob file not found: {p}")

    with open(side, "r", encoding="utf-8") as f:
        try:
            sidecar = json.load(f)
        except json.JSONDecodeError as e:
            raise ParseError(f"Invalid sidecar JSON: {e.msg}", row=e.lineno, column=e.colno) from e

    payload = path.read_bytes()
    if len(payload) != sidecar.get("nbytes"):
        raise ParseError(
            f"Blob holds {len(payload)} bytes but sidecar declares {sidecar.get('nbytes')}", row=0
        )

    fields = {}
    for entry in sidecar["fields"]:
        array = np.frombuffer(
            payload, dtype=BLOB_DTYPE, count=entry["length"], offset=entry["offset"]
        )
        fields[entry["name"]] = array.reshape(entry["shape"]).astype(np.float64)
    return fields, sidecar.get("meta", {})

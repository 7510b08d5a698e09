"""On-disk formats: SRAM snapshots, reliability sidecars and helper-data JSON.

Bit strings are hex-encoded with bit 0 in the most significant bit of the
first nibble; the final nibble is zero-padded.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .codec import parse_code
from .helper_data import HelperData

__all__ = [
    "bits_to_hex",
    "hex_to_bits",
    "write_snapshots",
    "read_snapshots",
    "write_reliabilities",
    "read_reliabilities",
    "helper_to_dict",
    "helper_from_dict",
    "save_helper",
    "load_helper",
]

SNAPSHOT_MAGIC = "pufsnap"
SNAPSHOT_VERSION = "v1"
HELPER_VERSION = 1


def bits_to_hex(bits) -> str:
    b = np.asarray(bits, dtype=np.uint8).ravel()
    pad = (-b.size) % 4
    if pad:
        b = np.concatenate([b, np.zeros(pad, np.uint8)])
    nibbles = b.reshape(-1, 4) @ np.array([8, 4, 2, 1])
    return "".join(f"{v:x}" for v in nibbles)


def hex_to_bits(text: str, length: int) -> np.ndarray:
    text = text.strip()
    if len(text) * 4 < length:
        raise ValueError(f"hex string holds {len(text) * 4} bits, expected {length}")
    try:
        vals = np.array([int(c, 16) for c in text], dtype=np.uint8)
    except ValueError:
        raise ValueError("invalid hex digit") from None
    bits = ((vals[:, None] >> np.array([3, 2, 1, 0])) & 1).astype(np.uint8).ravel()
    if np.any(bits[length:]):
        raise ValueError("nonzero padding bits")
    return bits[:length]


def write_snapshots(path, readouts) -> None:
    r = np.atleast_2d(np.asarray(readouts, dtype=np.uint8))
    lines = [f"{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} {r.shape[1]}"]
    lines += [bits_to_hex(row) for row in r]
    Path(path).write_text("\n".join(lines) + "\n")


def read_snapshots(path) -> np.ndarray:
    """Readouts as a ``(m, t)`` uint8 array."""
    lines = [ln.strip() for ln in Path(path).read_text().splitlines() if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty snapshot file")
    head = lines[0].split()
    if len(head) != 3 or head[0] != SNAPSHOT_MAGIC or head[1] != SNAPSHOT_VERSION:
        raise ValueError(f"{path}: expected header '{SNAPSHOT_MAGIC} {SNAPSHOT_VERSION} <t>'")
    t = int(head[2])
    if len(lines) < 2:
        raise ValueError(f"{path}: no readouts")
    return np.array([hex_to_bits(ln, t) for ln in lines[1:]], dtype=np.uint8)


def write_reliabilities(path, indices, p_e) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "p_e"])
        for i, p in zip(indices, p_e):
            w.writerow([int(i), repr(float(p))])


def read_reliabilities(path, size: int | None = None) -> np.ndarray:
    """Dense per-cell array; cells absent from the file are NaN."""
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["index", "p_e"]:
            raise ValueError(f"{path}: expected columns index,p_e")
        for row in reader:
            rows.append((int(row["index"]), float(row["p_e"])))
    top = max((i for i, _ in rows), default=-1) + 1
    out = np.full(max(top, size or 0), np.nan)
    for i, p in rows:
        out[i] = p
    return out


def helper_to_dict(helper: HelperData) -> dict:
    return {
        "version": HELPER_VERSION,
        "code": helper.code.text,
        "p_t": helper.p_t,
        "mask": [int(i) for i in helper.mask],
        "offset": bits_to_hex(helper.offset),
        "digest": helper.digest.hex(),
        "list_size": helper.list_size,
        "readouts": helper.readouts,
        "decoder": helper.decoder,
    }


def helper_from_dict(obj: dict) -> HelperData:
    if obj.get("version") != HELPER_VERSION:
        raise ValueError(f"unsupported helper-data version {obj.get('version')!r}")
    spec = parse_code(obj["code"])
    mask = np.asarray(obj["mask"], dtype=np.int64)
    n_bits = mask.size
    if n_bits % spec.n:
        raise ValueError("mask length is not a multiple of n")
    info_length = n_bits // spec.n - spec.mu
    return HelperData(
        code=spec,
        mask=mask,
        offset=hex_to_bits(obj["offset"], n_bits),
        digest=bytes.fromhex(obj["digest"]),
        p_t=obj.get("p_t"),
        readouts=int(obj.get("readouts", 1)),
        decoder=obj.get("decoder", "viterbi"),
        list_size=int(obj.get("list_size", 1)),
        info_length=info_length,
    )


def save_helper(path, helper: HelperData) -> None:
    Path(path).write_text(json.dumps(helper_to_dict(helper), indent=2) + "\n")


def load_helper(path) -> HelperData:
    return helper_from_dict(json.loads(Path(path).read_text()))

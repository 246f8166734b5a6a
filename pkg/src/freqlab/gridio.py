"""Flat binary serialization for complex grid fields.

Layout: row-major (x index outermost) little-endian float64 pairs
(re, im) per node, i.e. numpy dtype '<c16' of shape (nx, ny), written to
<stem>.bin with a JSON sidecar <stem>.json:

    {"origin": [re, im], "h": spacing, "nx": nx, "ny": ny}

Real-valued grids are stored with zero imaginary parts.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .fields import ComplexGridField


def save_grid(field: ComplexGridField, stem) -> tuple[Path, Path]:
    stem = Path(stem)
    bin_path = stem.with_suffix(".bin")
    json_path = stem.with_suffix(".json")
    values = np.ascontiguousarray(field.values, dtype="<c16")
    bin_path.write_bytes(values.tobytes(order="C"))
    header = {
        "origin": [field.origin.real, field.origin.imag],
        "h": field.h,
        "nx": field.nx,
        "ny": field.ny,
    }
    json_path.write_text(json.dumps(header, sort_keys=True))
    return bin_path, json_path


def load_grid(stem) -> ComplexGridField:
    stem = Path(stem)
    header = json.loads(stem.with_suffix(".json").read_text())
    raw = np.frombuffer(stem.with_suffix(".bin").read_bytes(), dtype="<c16")
    values = raw.reshape(header["nx"], header["ny"]).copy()
    return ComplexGridField(
        origin=complex(header["origin"][0], header["origin"][1]),
        h=float(header["h"]),
        values=values,
    )

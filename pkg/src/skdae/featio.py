"""Binary feature-file format and CSV export.

Layout (little endian):

    magic   4 bytes  b"DCDF"
    version u32      currently 1
    T       u32      frame count
    D       u32      feature dimension
    frames  T*D f32  row-major normalized features
    min     D f32    per-dimension minimum before scaling
    max     D f32    per-dimension maximum before scaling

Files always hold normalized features together with the extrema needed
to invert the scaling.
"""

from __future__ import annotations

import struct

import numpy as np

from .errors import ContractError, FeatureFileError
from .features import FeatureMatrix

MAGIC = b"DCDF"
VERSION = 1
_HEADER = struct.Struct("<4sIII")


def save_features(fm: FeatureMatrix, path) -> None:
    """Write a normalized feature matrix."""
    if not fm.normalized or fm.norm_min is None or fm.norm_max is None:
        raise ContractError("feature files hold normalized features; normalize first")
    parts = [
        _HEADER.pack(MAGIC, VERSION, fm.n_frames, fm.n_dims),
        fm.frames.astype("<f4").tobytes(),
        fm.norm_min.astype("<f4").tobytes(),
        fm.norm_max.astype("<f4").tobytes(),
    ]
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_features(path) -> FeatureMatrix:
    """Read a feature file written by :func:`save_features`."""
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise FeatureFileError(f"cannot read feature file {path}: {exc}") from exc
    if len(blob) < _HEADER.size:
        raise FeatureFileError(f"{path}: truncated header")
    magic, version, t, d = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise FeatureFileError(f"{path}: bad magic {magic!r}")
    if version != VERSION:
        raise FeatureFileError(
            f"{path}: unsupported version {version} (expected {VERSION})"
        )
    expected = _HEADER.size + 4 * (t * d + 2 * d)
    if len(blob) != expected:
        raise FeatureFileError(
            f"{path}: wrong payload size ({len(blob)} bytes, expected {expected})"
        )
    body = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    frames = body[: t * d].reshape(t, d)
    norm_min = body[t * d : t * d + d]
    norm_max = body[t * d + d :]
    return FeatureMatrix(
        frames.astype(np.float64),
        norm_min=norm_min.astype(np.float64),
        norm_max=norm_max.astype(np.float64),
        normalized=True,
    )


def features_to_csv(fm: FeatureMatrix, path) -> None:
    """Plain-text export: header row ``dim_0..dim_{D-1}`` then one line
    per frame."""
    header = ",".join(f"dim_{j}" for j in range(fm.n_dims))
    np.savetxt(path, fm.frames, delimiter=",", header=header, comments="", fmt="%.9g")

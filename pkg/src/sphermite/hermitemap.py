"""Padded cubemap container and the SHM1 binary format.

Each face stores ``(N + 2g)^2`` texels, where N is the interior resolution
and g the gutter width.  Stored index ``i`` in ``[g, g+N)`` is an interior
texel with center ``u = (i - g + 0.5) / N``; the surrounding gutter ring(s)
hold direct field evaluations just outside the face so any 2x2 (g>=1) or
4x4 (g>=2) footprint stays inside storage.

Texels carry either 1 channel (value-only baselines) or 4 channels:
``(r, r_u*h, r_v*h, r_uv*h^2)`` with ``h = 1/N``.  Files hold float32;
sampling arithmetic is done in float64.
"""

from __future__ import annotations

import struct
from typing import NamedTuple

import numpy as np

from .cubemap import FACE_NAMES

MAGIC = b"SHM1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIfB3x")

# Snap tolerance for cell addressing, in texel units. Queries that land
# within this distance of a texel center resolve to sloc/tloc exactly 0.
_SNAP = 1e-9


class MapFormatError(ValueError):
    """Raised when SHM1 bytes are malformed."""


class HermiteCubemap:
    """Six padded faces of baked texels.

    ``faces`` has shape (6, S, S, channels) with S = N + 2*gutter, float32,
    indexed ``[face, j, i, c]`` with j the v row.  Maps are immutable by
    convention after a bake; sampling never mutates them.
    """

    def __init__(self, n: int, gutter: int, channels: int, scale: float = 1.0,
                 signed_abs: bool = False, faces: np.ndarray | None = None):
        if n < 1:
            raise MapFormatError("invalid resolution")
        if gutter < 1:
            raise MapFormatError("gutter must be >= 1")
        if channels not in (1, 4):
            raise MapFormatError(f"invalid channel count {channels}")
        self.n = int(n)
        self.gutter = int(gutter)
        self.channels = int(channels)
        self.scale = float(np.float32(scale))
        self.signed_abs = bool(signed_abs)
        s = self.stored_size
        if faces is None:
            faces = np.zeros((6, s, s, channels), dtype=np.float32)
        faces = np.asarray(faces, dtype=np.float32)
        if faces.shape != (6, s, s, channels):
            raise MapFormatError(
                f"face array shape {faces.shape} does not match header "
                f"(expected {(6, s, s, channels)})"
            )
        self.faces = faces

    @property
    def stored_size(self) -> int:
        return self.n + 2 * self.gutter

    @property
    def h(self) -> float:
        """Texel spacing in chart units."""
        return 1.0 / self.n

    def texel_centers(self, margin: int = 0):
        """(u, v) grids of texel centers, optionally with extra margin rows.

        Returns meshgrid arrays U, V of shape (S + 2*margin,) x 2, indexed
        [j, i]; stored texel (j, i) corresponds to index (j+margin, i+margin).
        """
        idx = np.arange(-margin, self.stored_size + margin, dtype=np.float64)
        c = (idx - self.gutter + 0.5) / self.n
        return np.meshgrid(c, c, indexing="xy")

    def interior(self, face: int) -> np.ndarray:
        g = self.gutter
        return self.faces[face, g:g + self.n, g:g + self.n, :]

    def __eq__(self, other):
        return (
            isinstance(other, HermiteCubemap)
            and self.n == other.n
            and self.gutter == other.gutter
            and self.channels == other.channels
            and np.float32(self.scale) == np.float32(other.scale)
            and self.signed_abs == other.signed_abs
            and np.array_equal(self.faces, other.faces)
        )

    # -- addressing ---------------------------------------------------------

    def cell_coords(self, u, v):
        """Continuous texel coordinates (x, y) for chart (u, v)."""
        u = np.asarray(u, dtype=np.float64)
        v = np.asarray(v, dtype=np.float64)
        x = u * self.n + (self.gutter - 0.5)
        y = v * self.n + (self.gutter - 0.5)
        return x, y

    # -- serialization ------------------------------------------------------

    def serialize(self) -> bytes:
        header = _HEADER.pack(
            MAGIC, VERSION, self.n, self.gutter, self.channels,
            np.float32(self.scale), int(self.signed_abs),
        )
        return header + self.faces.astype("<f4").tobytes()

    @classmethod
    def deserialize(cls, data: bytes) -> "HermiteCubemap":
        if len(data) < _HEADER.size:
            raise MapFormatError("unexpected end of data")
        magic, version, n, gutter, channels, scale, signed = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise MapFormatError(f"bad magic {magic!r}")
        if version != VERSION:
            raise MapFormatError(f"unsupported version {version}")
        if n == 0:
            raise MapFormatError("invalid resolution")
        if gutter == 0:
            raise MapFormatError("invalid gutter")
        if channels not in (1, 4):
            raise MapFormatError(f"invalid channel count {channels}")
        s = n + 2 * gutter
        expected = _HEADER.size + 6 * s * s * channels * 4
        if len(data) < expected:
            raise MapFormatError("unexpected end of data")
        if len(data) > expected:
            raise MapFormatError("trailing data after face payload")
        raw = np.frombuffer(data, dtype="<f4", offset=_HEADER.size)
        faces = raw.reshape(6, s, s, channels)
        return cls(n, gutter, channels, scale, bool(signed), faces)

    def save(self, path) -> None:
        with open(path, "wb") as f:
            f.write(self.serialize())

    @classmethod
    def load(cls, path) -> "HermiteCubemap":
        with open(path, "rb") as f:
            return cls.deserialize(f.read())


class CellQuery(NamedTuple):
    """A 2x2 cell: base stored indices and local coordinates in [0, 1]^2."""

    face: np.ndarray
    i0: np.ndarray
    j0: np.ndarray
    sloc: np.ndarray
    tloc: np.ndarray


def _split_cell(x, size):
    """floor/frac split of continuous texel coords, snapped at texel centers."""
    near = np.rint(x)
    x = np.where(np.abs(x - near) < _SNAP, near, x)
    i0 = np.floor(x)
    i0 = np.clip(i0, 0, size - 2)  # u=1 lands exactly on the last corner
    return i0.astype(np.int64), x - i0


def locate_cell(cmap: HermiteCubemap, face, u, v) -> CellQuery:
    """Resolve chart coordinates to the 2x2 stored-texel cell they fall in.

    Requires u, v in [0, 1]; the gutter guarantees the cell exists.  Raises
    ValueError for out-of-range queries (sampling helpers that intentionally
    overhang the range use the unchecked path).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if np.any((u < -1e-12) | (u > 1 + 1e-12) | (v < -1e-12) | (v > 1 + 1e-12)):
        raise ValueError("u, v must lie in [0, 1]")
    x, y = cmap.cell_coords(u, v)
    size = cmap.stored_size
    i0, sloc = _split_cell(x, size)
    j0, tloc = _split_cell(y, size)
    face = np.broadcast_to(np.asarray(face), u.shape) if u.shape else np.asarray(face)
    return CellQuery(face, i0, j0, sloc, tloc)


def bake_error_location(face: int, j: int, i: int) -> str:
    return f"face {FACE_NAMES[face]}, texel (i={i}, j={j})"

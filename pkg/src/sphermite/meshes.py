"""Triangle-soup loading for STL (ASCII and binary) and OBJ files."""

from __future__ import annotations

import os

import numpy as np


def load_mesh(path) -> np.ndarray:
    """Load a triangle soup, shape (n, 3, 3), by file extension."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".stl":
        return load_stl(path)
    if ext == ".obj":
        return load_obj(path)
    raise ValueError(f"unsupported mesh format: {ext!r} (expected .stl or .obj)")


def load_stl(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 84:
        return _parse_ascii_stl(data)
    # Binary STL: 80-byte header, u32 count, 50-byte records. The 'solid'
    # prefix alone is not reliable, so check the size arithmetic too.
    count = int(np.frombuffer(data[80:84], dtype="<u4")[0])
    if len(data) == 84 + 50 * count:
        rec = np.frombuffer(
            data[84:], dtype=np.dtype([("n", "<f4", 3), ("v", "<f4", (3, 3)), ("attr", "<u2")])
        )
        return rec["v"].astype(np.float64)
    return _parse_ascii_stl(data)


def _parse_ascii_stl(data: bytes) -> np.ndarray:
    text = data.decode("utf-8", errors="replace")
    verts = []
    for line in text.splitlines():
        parts = line.split()
        if len(parts) == 4 and parts[0].lower() == "vertex":
            verts.append([float(parts[1]), float(parts[2]), float(parts[3])])
    if not verts or len(verts) % 3 != 0:
        raise ValueError("malformed STL: vertex count not a multiple of 3")
    return np.asarray(verts, dtype=np.float64).reshape(-1, 3, 3)


def load_obj(path) -> np.ndarray:
    vertices = []
    faces = []
    with open(path, "r", encoding="utf-8", errors="replace") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(parts[1]), float(parts[2]), float(parts[3])])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) for p in parts[1:]]
                idx = [i - 1 if i > 0 else len(vertices) + i for i in idx]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append((idx[0], idx[k], idx[k + 1]))
    if not faces:
        raise ValueError("OBJ file contains no faces")
    v = np.asarray(vertices, dtype=np.float64)
    return v[np.asarray(faces, dtype=np.int64)]

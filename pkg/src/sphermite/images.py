"""Image file output: binary PPM (gamma-encoded 8-bit) and raw float dumps.

The raw dump format is little-endian: three u32 (width, height, channels)
followed by planar float32 data, one full plane per channel.  It carries
linear RGB or normal buffers losslessly for metric computation.
"""

from __future__ import annotations

import numpy as np

GAMMA = 2.2


def encode_srgb8(linear_rgb: np.ndarray) -> np.ndarray:
    """Fixed gamma-2.2 encode of linear RGB to uint8."""
    clipped = np.clip(np.asarray(linear_rgb, dtype=np.float64), 0.0, 1.0)
    return (np.power(clipped, 1.0 / GAMMA) * 255.0 + 0.5).astype(np.uint8)


def write_ppm(path, linear_rgb: np.ndarray) -> None:
    img = encode_srgb8(linear_rgb)
    h, w = img.shape[:2]
    with open(path, "wb") as f:
        f.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        f.write(img.tobytes())


def read_ppm(path) -> np.ndarray:
    """8-bit P6 reader (round-trip checks); returns the raw uint8 array."""
    with open(path, "rb") as f:
        data = f.read()
    fields = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos:pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P6":
        raise ValueError("not a binary PPM file")
    w, h, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError("only 8-bit PPM supported")
    pos += 1
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=pos)
    return pixels.reshape(h, w, 3)


def write_float_raw(path, planes: np.ndarray) -> None:
    """Write an (h, w) or (h, w, c) float array as a planar f32 dump."""
    arr = np.asarray(planes, dtype=np.float32)
    if arr.ndim == 2:
        arr = arr[..., None]
    h, w, c = arr.shape
    header = np.array([w, h, c], dtype="<u4")
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(np.ascontiguousarray(np.moveaxis(arr, -1, 0)).astype("<f4").tobytes())


def read_float_raw(path) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if len(data) < 12:
        raise ValueError("truncated float dump")
    w, h, c = np.frombuffer(data, dtype="<u4", count=3)
    expected = 12 + 4 * w * h * c
    if len(data) != expected:
        raise ValueError("float dump size mismatch")
    planes = np.frombuffer(data, dtype="<f4", offset=12).reshape(c, h, w)
    return np.moveaxis(planes, 0, -1)


def side_by_side(images, pad: int = 4, pad_value: float = 1.0) -> np.ndarray:
    """Horizontal strip of equally sized (h, w, 3) images with separators."""
    imgs = [np.asarray(im, dtype=np.float32) for im in images]
    h = imgs[0].shape[0]
    sep = np.full((h, pad, 3), pad_value, dtype=np.float32)
    parts = []
    for k, im in enumerate(imgs):
        if k:
            parts.append(sep)
        parts.append(im)
    return np.concatenate(parts, axis=1)

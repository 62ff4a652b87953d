"""Quantitative evaluation: PSNR, normal angular error, per-query cost.

PSNR conventions used throughout the benchmark suites:

* value PSNR - peak is the ground-truth value range over the sampled
  direction set (so numbers are comparable only within one run, which the
  reports state).
* image PSNR - peak is 1.0 over linear RGB, background pixels painted with
  the scene background color, all pixels counted unless a mask mode says
  otherwise.

Identical signals report infinite PSNR through an explicit sentinel.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from . import cubemap, sampler
from .fields import SphericalField
from .hermitemap import HermiteCubemap
from .render import RenderImage

PSNR_INF = float("inf")


class PsnrReport(NamedTuple):
    psnr_db: float
    mse: float
    peak: float
    n_samples: int

    def formatted(self) -> str:
        return "inf" if math.isinf(self.psnr_db) else f"{self.psnr_db:.2f}"


class NormalErrorReport(NamedTuple):
    mean_deg: float
    p95_deg: float
    max_deg: float
    n_pixels: int


def uniform_directions(n: int, seed_or_rng) -> np.ndarray:
    """n uniform unit directions via the inverse-CDF (z, phi) method.

    Seeded with numpy's default 64-bit generator (PCG64) for reproducibility.
    """
    rng = np.random.default_rng(seed_or_rng) if not isinstance(
        seed_or_rng, np.random.Generator) else seed_or_rng
    z = 1.0 - 2.0 * rng.random(n)
    phi = 2.0 * math.pi * rng.random(n) - math.pi
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


def _psnr(mse: float, peak: float, n: int) -> PsnrReport:
    if mse <= 0.0:
        return PsnrReport(PSNR_INF, 0.0, peak, n)
    if peak <= 0.0:
        return PsnrReport(PSNR_INF if mse == 0 else -PSNR_INF, mse, peak, n)
    return PsnrReport(10.0 * math.log10(peak * peak / mse), mse, peak, n)


def psnr_values(field: SphericalField, cmap: HermiteCubemap | None, method: str,
                n: int = 100_000, seed: int = 0,
                counter: sampler.FetchCounter | None = None) -> PsnrReport:
    """Value-reconstruction PSNR against the field over random directions.

    ``method``: any sampler value method, or "ground_truth" (sanity sentinel).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    dirs = uniform_directions(n, seed)
    truth = np.asarray(field.eval(dirs), dtype=np.float64)
    peak = float(np.max(truth) - np.min(truth))
    if method == "ground_truth":
        approx = truth
    else:
        fp = cubemap.direction_to_face_uv(dirs)
        approx = sampler.sample_value(cmap, fp.face, fp.u, fp.v, method, counter)
    mse = float(np.mean((approx - truth) ** 2))
    return _psnr(mse, peak, n)


def psnr_images(a: RenderImage, b: RenderImage, mask_mode: str = "full") -> PsnrReport:
    """Image PSNR over linear RGB with peak 1.0.

    ``mask_mode``: "full" counts every pixel (backgrounds already carry the
    background color), "union" restricts to pixels hit in either image,
    "intersect" to pixels hit in both.
    """
    if a.rgb.shape != b.rgb.shape:
        raise ValueError(f"image dimensions differ: {a.rgb.shape} vs {b.rgb.shape}")
    if mask_mode == "full":
        sel = np.ones(a.mask.shape, dtype=bool)
    elif mask_mode == "union":
        sel = a.mask | b.mask
    elif mask_mode == "intersect":
        sel = a.mask & b.mask
    else:
        raise ValueError(f"unknown mask mode {mask_mode!r}")
    da = a.rgb[sel].astype(np.float64)
    db = b.rgb[sel].astype(np.float64)
    if da.size == 0:
        raise ValueError("mask selects no pixels")
    mse = float(np.mean((da - db) ** 2))
    return _psnr(mse, 1.0, int(np.sum(sel)))


def normal_error(a: RenderImage, b: RenderImage) -> NormalErrorReport:
    """Angular error statistics over pixels hit in both images."""
    if a.normals is None or b.normals is None:
        raise ValueError("both images need normal buffers")
    sel = a.mask & b.mask
    if not np.any(sel):
        raise ValueError("hit masks do not intersect")
    na = a.normals[sel].astype(np.float64)
    nb = b.normals[sel].astype(np.float64)
    dots = np.clip(np.sum(na * nb, axis=-1), -1.0, 1.0)
    ang = np.degrees(np.arccos(dots))
    return NormalErrorReport(
        mean_deg=float(np.mean(ang)),
        p95_deg=float(np.percentile(ang, 95)),
        max_deg=float(np.max(ang)),
        n_pixels=int(ang.size),
    )


# ---------------------------------------------------------------------------
# Per-query cost accounting
# ---------------------------------------------------------------------------

COST_METHODS = (
    "bilinear_hw",
    "bilinear_fd",
    "bicubic16",
    "fast_bicubic",
    "fast_bicubic_fd",
    "hermite",
)

# The "samples" convention used by the normal-quality tables: point-fetch
# reads for the value footprint, plus 4 for an FD stencil (its taps overlap
# the value footprint).  Distinct from the instruction/scalar cost model.
SAMPLE_COUNTS = {
    "bilinear_fd": 8,        # 4 + 4
    "bicubic16_fd": 20,      # 16 + 4
    "bicubic16_analytic": 16,
    "fast_bicubic_fd": 8,    # 4 bilinear fetches + 4
    "hermite": 4,
    "nearest": 1,
    "ground_truth": 0,
}


def cost_report(method: str) -> tuple[int, int]:
    """Measured (texture instructions, scalars) for one query of a pipeline.

    Runs the actual sampling code against tiny maps and reads the counters;
    nothing is hard-coded here.
    """
    from .fields import ChartField
    from .bake import bake, bake_value_only

    flat = ChartField(lambda f, u, v: np.ones_like(np.asarray(u, dtype=np.float64)))
    value_map = bake_value_only(flat, 4, gutter=2)
    hermite_map = bake(flat, 4, gutter=2)
    surface = sampler.surface_from_map(hermite_map)
    d = cubemap.normalize(np.array([0.3, 0.2, 1.0]))
    counter = sampler.FetchCounter()
    if method == "bilinear_hw":
        fp = cubemap.direction_to_face_uv(d)
        sampler.sample_value(value_map, fp.face, fp.u, fp.v, "bilinear", counter)
    elif method == "bilinear_fd":
        sampler.fd_normal(surface, value_map, d, "bilinear", counter=counter)
    elif method == "bicubic16":
        fp = cubemap.direction_to_face_uv(d)
        sampler.sample_value(value_map, fp.face, fp.u, fp.v, "bicubic16", counter)
    elif method == "fast_bicubic":
        fp = cubemap.direction_to_face_uv(d)
        sampler.sample_value(value_map, fp.face, fp.u, fp.v, "fast_bicubic", counter)
    elif method == "fast_bicubic_fd":
        sampler.fd_normal(surface, value_map, d, "fast_bicubic", counter=counter)
    elif method == "hermite":
        sampler.analytic_normal(surface, hermite_map, d, counter=counter)
    elif method == "nearest":
        fp = cubemap.direction_to_face_uv(d)
        sampler.sample_value(value_map, fp.face, fp.u, fp.v, "nearest", counter)
    else:
        raise ValueError(f"unknown cost method {method!r}")
    return counter.as_tuple()

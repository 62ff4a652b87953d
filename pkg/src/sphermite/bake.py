"""Baking spherical fields onto padded cubemaps, plus mip-chain building.

Every stored texel (interior and gutter) holds a direct field evaluation at
its own texel-center direction; gutters are never copied or reflected from
neighbor faces.  Derivative channels come from either central differences
over a one-texel bake margin (general fields) or exact chart derivatives
(harmonic fields), with the mixed derivative always differenced.
"""

from __future__ import annotations

import numpy as np

from . import cubemap
from .fields import ChartField, RadialSurface, SphericalField
from .hermitemap import HermiteCubemap, bake_error_location

MODES = ("central_diff", "analytic", "auto")
MIP_MODES = ("consistent", "naive")


class BakeError(RuntimeError):
    pass


def _resolve_source(source):
    if isinstance(source, RadialSurface):
        return source.field, source.scale, source.signed_abs
    if isinstance(source, SphericalField):
        return source, 1.0, False
    raise TypeError(f"cannot bake {type(source).__name__}")


def _margin_values(field, cmap: HermiteCubemap, face: int) -> np.ndarray:
    """Field values on the stored grid plus one margin ring, shape (S+2, S+2)."""
    U, V = cmap.texel_centers(margin=1)
    if isinstance(field, ChartField):
        vals = field.chart_value(face, U, V)
    else:
        dirs = cubemap.face_uv_to_direction(face, U, V)
        vals = field.eval(dirs)
    if not np.all(np.isfinite(vals)):
        j, i = np.argwhere(~np.isfinite(np.asarray(vals)))[0]
        raise BakeError(
            f"non-finite field value at {bake_error_location(face, int(j) - 1, int(i) - 1)}"
        )
    return np.asarray(vals, dtype=np.float64)


def bake(source, n: int, mode: str = "auto", gutter: int = 1) -> HermiteCubemap:
    """Bake a 4-channel Hermite cubemap at interior resolution n.

    ``source`` is a field or a radial surface (whose scale/signed-abs flags
    are copied into the map header).  Modes:

    * ``central_diff``: evaluate on an (S+2)^2 margin grid and difference;
      r_u, r_v use the central stencil with step h, r_uv the 4-point cross.
    * ``analytic``: exact chart derivatives from the field; r_uv is still a
      central difference of the analytic r_u in v (step h).
    * ``auto``: analytic when the field provides derivatives.
    """
    field, scale, signed_abs = _resolve_source(source)
    if n < 2:
        raise ValueError("invalid resolution (need n >= 2)")
    if mode not in MODES:
        raise ValueError(f"unknown bake mode {mode!r}")
    if mode == "auto":
        mode = "analytic" if field.has_chart_derivatives else "central_diff"
    if mode == "analytic" and not field.has_chart_derivatives:
        raise ValueError("analytic bake requires a field with chart derivatives")

    out = HermiteCubemap(n, gutter, 4, scale, signed_abs)
    for face in range(6):
        if mode == "central_diff":
            vals = _margin_values(field, out, face)
            # Stored channels are pre-scaled by h, so the stencils reduce to
            # plain neighbor differences: (f(u+h) - f(u-h)) / 2 == r_u * h.
            r = vals[1:-1, 1:-1]
            ru_h = (vals[1:-1, 2:] - vals[1:-1, :-2]) * 0.5
            rv_h = (vals[2:, 1:-1] - vals[:-2, 1:-1]) * 0.5
            ruv_h2 = (vals[2:, 2:] - vals[2:, :-2] - vals[:-2, 2:] + vals[:-2, :-2]) * 0.25
        else:
            U, V = out.texel_centers(margin=1)
            r_m, ru_m, rv_m = field.chart_derivatives(face, U, V)
            if not (np.all(np.isfinite(r_m)) and np.all(np.isfinite(ru_m))
                    and np.all(np.isfinite(rv_m))):
                raise BakeError(f"non-finite chart derivatives on face {face}")
            h = out.h
            r = r_m[1:-1, 1:-1]
            ru_h = ru_m[1:-1, 1:-1] * h
            rv_h = rv_m[1:-1, 1:-1] * h
            # No analytic mixed derivative; difference the analytic r_u in v.
            ruv_h2 = (ru_m[2:, 1:-1] - ru_m[:-2, 1:-1]) * (h * 0.5)
        out.faces[face, :, :, 0] = r
        out.faces[face, :, :, 1] = ru_h
        out.faces[face, :, :, 2] = rv_h
        out.faces[face, :, :, 3] = ruv_h2
    return out


def bake_value_only(source, n: int, gutter: int = 1) -> HermiteCubemap:
    """Bake a 1-channel value map (baseline methods, equal-storage runs)."""
    field, scale, signed_abs = _resolve_source(source)
    if n < 2:
        raise ValueError("invalid resolution (need n >= 2)")
    out = HermiteCubemap(n, gutter, 1, scale, signed_abs)
    for face in range(6):
        vals = _margin_values(field, out, face)
        out.faces[face, :, :, 0] = vals[1:-1, 1:-1]
    return out


# ---------------------------------------------------------------------------
# Mip chains
# ---------------------------------------------------------------------------

def _downsample_weights(parent: HermiteCubemap) -> np.ndarray:
    """Per-axis box-filter matrix W (child size x parent size).

    Each child texel averages the two parent texels its footprint covers;
    gutter texels whose footprint partly leaves parent storage average over
    whichever of the two exists (maps are detached from their fields, so
    gutters can only be re-filtered, not re-evaluated).
    """
    g = parent.gutter
    sc = parent.n // 2 + 2 * g
    sp = parent.stored_size
    w = np.zeros((sc, sp))
    for ci in range(sc):
        cols = [p for p in (2 * ci - g, 2 * ci - g + 1) if 0 <= p < sp]
        w[ci, cols] = 1.0 / len(cols)
    return w


def _downsample_channel(w: np.ndarray, plane: np.ndarray) -> np.ndarray:
    return w @ plane.astype(np.float64) @ w.T


def _derivative_channels(values: np.ndarray, h: float):
    """(r_u*h, r_v*h, r_uv*h^2) from a value plane via grid differences.

    Central differences inside, second-order one-sided on the outer ring
    (np.gradient's boundary treatment).
    """
    rv, ru = np.gradient(values, h, edge_order=2)
    ruv = np.gradient(ru, h, axis=0, edge_order=2)
    return ru * h, rv * h, ruv * h * h


def build_mip_chain(cmap: HermiteCubemap, mode: str = "consistent") -> list[HermiteCubemap]:
    """Halved-resolution levels from n down to 4; level 0 is the input map.

    ``naive`` box-filters all stored channels, which silently breaks the
    pre-scaled derivative encoding (the classic hardware-mipmap mistake).
    ``consistent`` filters the value channel only and recomputes derivative
    channels from the filtered values with the level's own spacing.
    """
    if mode not in MIP_MODES:
        raise ValueError(f"unknown mip mode {mode!r}")
    n = cmap.n
    if n < 4 or (n & (n - 1)) != 0:
        raise ValueError("mip chains require a power-of-two resolution >= 4")
    levels = [cmap]
    while levels[-1].n > 4:
        parent = levels[-1]
        w = _downsample_weights(parent)
        child = HermiteCubemap(parent.n // 2, parent.gutter, parent.channels,
                               parent.scale, parent.signed_abs)
        for face in range(6):
            values = _downsample_channel(w, parent.faces[face, :, :, 0])
            child.faces[face, :, :, 0] = values
            if parent.channels == 1:
                continue
            if mode == "naive":
                for c in range(1, 4):
                    child.faces[face, :, :, c] = _downsample_channel(
                        w, parent.faces[face, :, :, c]
                    )
            else:
                ru_h, rv_h, ruv_h2 = _derivative_channels(values, child.h)
                child.faces[face, :, :, 1] = ru_h
                child.faces[face, :, :, 2] = rv_h
                child.faces[face, :, :, 3] = ruv_h2
        levels.append(child)
    return levels


def rebake_mip_chain(source, n: int, mode: str = "auto", gutter: int = 1) -> list[HermiteCubemap]:
    """Mip chain by re-baking the field at each level resolution.

    Only possible while the field is still available; the highest-quality
    path, used by the ``--rebake-mips`` option.
    """
    if n < 4 or (n & (n - 1)) != 0:
        raise ValueError("mip chains require a power-of-two resolution >= 4")
    levels = []
    level_n = n
    while level_n >= 4:
        levels.append(bake(source, level_n, mode=mode, gutter=gutter))
        level_n //= 2
    return levels

"""Runtime reconstruction from baked maps, with fetch accounting.

Methods:

* ``nearest``     - closest stored texel (1 fetch).
* ``bilinear``    - 2x2 weighted, emulating one hardware-filtered fetch
                    (1 texture instruction, 4 scalars).
* ``bicubic16``   - separable Catmull-Rom over a 4x4 footprint (16 point
                    fetches); optionally differentiates the kernel for
                    analytic chart derivatives at no extra fetch.
* ``fast_bicubic``- cubic B-spline realized as 4 emulated bilinear fetches
                    (smoothing, non-interpolating).
* ``hermite``     - tensor-product cubic Hermite over the 2x2 cell using all
                    four stored channels; value and chart derivatives come
                    from the same 4 RGBA fetches.

Finite-difference normals tap the map 4 extra times around the query; each
tap is a single emulated-bilinear instruction (4 scalars), which is what the
instruction/scalar cost model assumes for every "+FD" pipeline.

Fetch counters are per-call accumulators owned by the caller; nothing here
keeps global state, so concurrent sampling of one map is safe.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from . import cubemap
from .cubemap import spherical_gradient, tangent_frame
from .fields import RadialSurface, SphericalField
from .hermitemap import CellQuery, HermiteCubemap, locate_cell

VALUE_METHODS = ("nearest", "bilinear", "bicubic16", "fast_bicubic", "hermite")


class InsufficientGutterError(ValueError):
    """A 4x4 footprint left stored bounds (bicubic methods need gutter >= 2)."""


class FetchCounter:
    """Tallies texture instructions and scalar reads for a query context."""

    __slots__ = ("fetches", "scalars")

    def __init__(self):
        self.fetches = 0
        self.scalars = 0

    def add(self, fetches: int, scalars: int, queries: int = 1) -> None:
        self.fetches += fetches * queries
        self.scalars += scalars * queries

    def merge(self, other: "FetchCounter") -> None:
        self.fetches += other.fetches
        self.scalars += other.scalars

    def as_tuple(self) -> tuple[int, int]:
        return self.fetches, self.scalars


def method_cost(method: str, channels: int = 1) -> tuple[int, int]:
    """(texture instructions, scalars read) for one value query."""
    if method == "nearest":
        return 1, channels
    if method == "bilinear":
        return 1, 4
    if method == "bicubic16":
        return 16, 16
    if method == "fast_bicubic":
        return 4, 16
    if method == "hermite":
        return 4, 16
    raise ValueError(f"unknown method {method!r}")


FD_TAP_COST = (1, 4)  # one emulated-bilinear instruction per offset tap


class ReconstructionSample(NamedTuple):
    """One reconstruction: value, optional chart derivatives, and its cost."""

    value: np.ndarray
    ru: np.ndarray | None
    rv: np.ndarray | None
    fetches: int
    scalars: int


class HermiteBasisEval(NamedTuple):
    """1D cubic Hermite basis and derivatives at a parameter in [0, 1]."""

    h0: np.ndarray
    h1: np.ndarray
    h0d: np.ndarray
    h1d: np.ndarray
    dh0: np.ndarray
    dh1: np.ndarray
    dh0d: np.ndarray
    dh1d: np.ndarray


def hermite_basis(s) -> HermiteBasisEval:
    s = np.asarray(s, dtype=np.float64)
    s2 = s * s
    s3 = s2 * s
    return HermiteBasisEval(
        h0=2.0 * s3 - 3.0 * s2 + 1.0,
        h1=-2.0 * s3 + 3.0 * s2,
        h0d=s3 - 2.0 * s2 + s,
        h1d=s3 - s2,
        dh0=6.0 * s2 - 6.0 * s,
        dh1=6.0 * s - 6.0 * s2,
        dh0d=3.0 * s2 - 4.0 * s + 1.0,
        dh1d=3.0 * s2 - 2.0 * s,
    )


def _gather(cmap: HermiteCubemap, face, j, i):
    """Point-fetch stored texels; returns float64 (..., channels)."""
    return cmap.faces[face, j, i, :].astype(np.float64)


# ---------------------------------------------------------------------------
# Hermite reconstruction
# ---------------------------------------------------------------------------

def hermite_sample_in_cell(cmap: HermiteCubemap, face, i0, j0, sloc, tloc):
    """Evaluate the Hermite interpolant of one explicit cell.

    Returns (value, ru, rv); ru/rv are derivatives with respect to the chart
    coordinates (the 1/h rescale from cell-local parameters is applied).
    """
    bs = hermite_basis(sloc)
    bt = hermite_basis(tloc)
    hs = ((bs.h0, bs.h0d, bs.dh0, bs.dh0d), (bs.h1, bs.h1d, bs.dh1, bs.dh1d))
    ht = ((bt.h0, bt.h0d, bt.dh0, bt.dh0d), (bt.h1, bt.h1d, bt.dh1, bt.dh1d))
    value = 0.0
    du = 0.0
    dv = 0.0
    for di in (0, 1):
        hi, hid, dhi, dhid = hs[di]
        for dj in (0, 1):
            hj, hjd, dhj, dhjd = ht[dj]
            tex = _gather(cmap, face, j0 + dj, i0 + di)
            r, ruh, rvh, ruvh2 = tex[..., 0], tex[..., 1], tex[..., 2], tex[..., 3]
            value = value + hi * hj * r + hid * hj * ruh + hi * hjd * rvh + hid * hjd * ruvh2
            du = du + dhi * hj * r + dhid * hj * ruh + dhi * hjd * rvh + dhid * hjd * ruvh2
            dv = dv + hi * dhj * r + hid * dhj * ruh + hi * dhjd * rvh + hid * dhjd * ruvh2
    return value, du * cmap.n, dv * cmap.n


def sample_hermite(cmap: HermiteCubemap, face, u, v, counter: FetchCounter | None = None):
    """(value, ru, rv) from the 2x2 cell owning (u, v); 4 RGBA fetches."""
    if cmap.channels != 4:
        raise ValueError("hermite sampling requires a 4-channel map")
    cell = locate_cell(cmap, face, u, v)
    if counter is not None:
        counter.add(*method_cost("hermite"), queries=int(np.asarray(u).size))
    return hermite_sample_in_cell(cmap, cell.face, cell.i0, cell.j0, cell.sloc, cell.tloc)


# ---------------------------------------------------------------------------
# Baseline reconstructions (channel 0)
# ---------------------------------------------------------------------------

def _bilinear_texcoord(cmap: HermiteCubemap, face, x, y):
    """Bilinear on channel 0 at continuous texel coordinates.

    Coordinates slightly outside the sampleable range clamp to the edge cell
    (turning into linear extrapolation), which keeps half-texel FD overhang
    well defined at u = 0 or 1.
    """
    size = cmap.stored_size
    i0 = np.clip(np.floor(x), 0, size - 2).astype(np.int64)
    j0 = np.clip(np.floor(y), 0, size - 2).astype(np.int64)
    fs = x - i0
    ft = y - j0
    t00 = cmap.faces[face, j0, i0, 0].astype(np.float64)
    t10 = cmap.faces[face, j0, i0 + 1, 0].astype(np.float64)
    t01 = cmap.faces[face, j0 + 1, i0, 0].astype(np.float64)
    t11 = cmap.faces[face, j0 + 1, i0 + 1, 0].astype(np.float64)
    return (1 - fs) * (1 - ft) * t00 + fs * (1 - ft) * t10 + (1 - fs) * ft * t01 + fs * ft * t11


def sample_bilinear_unchecked(cmap: HermiteCubemap, face, u, v,
                              counter: FetchCounter | None = None):
    """Emulated hardware-bilinear value; tolerates half-texel overhang."""
    x, y = cmap.cell_coords(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64))
    if counter is not None:
        counter.add(*method_cost("bilinear"), queries=int(np.asarray(u).size))
    return _bilinear_texcoord(cmap, face, x, y)


def _catmull_rom_weights(f):
    f2 = f * f
    f3 = f2 * f
    w0 = 0.5 * (-f3 + 2.0 * f2 - f)
    w1 = 0.5 * (3.0 * f3 - 5.0 * f2 + 2.0)
    w2 = 0.5 * (-3.0 * f3 + 4.0 * f2 + f)
    w3 = 0.5 * (f3 - f2)
    return w0, w1, w2, w3


def _catmull_rom_dweights(f):
    f2 = f * f
    w0 = 0.5 * (-3.0 * f2 + 4.0 * f - 1.0)
    w1 = 0.5 * (9.0 * f2 - 10.0 * f)
    w2 = 0.5 * (-9.0 * f2 + 8.0 * f + 1.0)
    w3 = 0.5 * (3.0 * f2 - 2.0 * f)
    return w0, w1, w2, w3


def _check_16tap_bounds(cmap: HermiteCubemap, cell: CellQuery, method: str):
    size = cmap.stored_size
    bad = (cell.i0 < 1) | (cell.i0 > size - 3) | (cell.j0 < 1) | (cell.j0 > size - 3)
    if np.any(bad):
        raise InsufficientGutterError(
            f"insufficient gutter for {method} near a face edge "
            f"(gutter={cmap.gutter}, need 2)"
        )


def sample_bicubic16(cmap: HermiteCubemap, face, u, v, derivatives: bool = False,
                     counter: FetchCounter | None = None):
    """Separable Catmull-Rom over the 4x4 footprint (16 point fetches).

    With ``derivatives=True`` the kernel is differentiated in each axis to
    produce (value, ru, rv) from the same fetches.
    """
    cell = locate_cell(cmap, face, u, v)
    _check_16tap_bounds(cmap, cell, "bicubic16")
    ws = _catmull_rom_weights(cell.sloc)
    wt = _catmull_rom_weights(cell.tloc)
    if counter is not None:
        counter.add(*method_cost("bicubic16"), queries=int(np.asarray(u).size))
    rows = []
    for dj in range(-1, 3):
        acc = 0.0
        for di in range(-1, 3):
            acc = acc + ws[di + 1] * cmap.faces[cell.face, cell.j0 + dj, cell.i0 + di, 0].astype(np.float64)
        rows.append(acc)
    value = sum(wt[k] * rows[k] for k in range(4))
    if not derivatives:
        return value
    dws = _catmull_rom_dweights(cell.sloc)
    dwt = _catmull_rom_dweights(cell.tloc)
    du_rows = []
    for dj in range(-1, 3):
        acc = 0.0
        for di in range(-1, 3):
            acc = acc + dws[di + 1] * cmap.faces[cell.face, cell.j0 + dj, cell.i0 + di, 0].astype(np.float64)
        du_rows.append(acc)
    ru = sum(wt[k] * du_rows[k] for k in range(4)) * cmap.n
    rv = sum(dwt[k] * rows[k] for k in range(4)) * cmap.n
    return value, ru, rv


def _bspline_weights(f):
    f2 = f * f
    f3 = f2 * f
    w0 = (1.0 - 3.0 * f + 3.0 * f2 - f3) / 6.0
    w1 = (4.0 - 6.0 * f2 + 3.0 * f3) / 6.0
    w2 = (1.0 + 3.0 * f + 3.0 * f2 - 3.0 * f3) / 6.0
    w3 = f3 / 6.0
    return w0, w1, w2, w3


def sample_fast_bicubic(cmap: HermiteCubemap, face, u, v,
                        counter: FetchCounter | None = None):
    """Cubic B-spline via the 4-bilinear-fetch weight/offset decomposition.

    Smoothing (does not interpolate the texels); no usable derivatives, so
    shading pairs it with finite differences.
    """
    cell = locate_cell(cmap, face, u, v)
    _check_16tap_bounds(cmap, cell, "fast_bicubic")
    ws = _bspline_weights(cell.sloc)
    wt = _bspline_weights(cell.tloc)
    gs0, gs1 = ws[0] + ws[1], ws[2] + ws[3]
    gt0, gt1 = wt[0] + wt[1], wt[2] + wt[3]
    px0 = cell.i0 - 1.0 + ws[1] / gs0
    px1 = cell.i0 + 1.0 + ws[3] / gs1
    py0 = cell.j0 - 1.0 + wt[1] / gt0
    py1 = cell.j0 + 1.0 + wt[3] / gt1
    if counter is not None:
        counter.add(*method_cost("fast_bicubic"), queries=int(np.asarray(u).size))
    b00 = _bilinear_texcoord(cmap, face, px0, py0)
    b10 = _bilinear_texcoord(cmap, face, px1, py0)
    b01 = _bilinear_texcoord(cmap, face, px0, py1)
    b11 = _bilinear_texcoord(cmap, face, px1, py1)
    return gt0 * (gs0 * b00 + gs1 * b10) + gt1 * (gs0 * b01 + gs1 * b11)


def sample_nearest(cmap: HermiteCubemap, face, u, v, counter: FetchCounter | None = None):
    x, y = cmap.cell_coords(np.asarray(u, dtype=np.float64), np.asarray(v, dtype=np.float64))
    size = cmap.stored_size
    i = np.clip(np.rint(x), 0, size - 1).astype(np.int64)
    j = np.clip(np.rint(y), 0, size - 1).astype(np.int64)
    if counter is not None:
        counter.add(*method_cost("nearest", cmap.channels),
                    queries=int(np.asarray(u).size))
    return cmap.faces[face, j, i, 0].astype(np.float64)


def sample_value(cmap: HermiteCubemap, face, u, v, method: str,
                 counter: FetchCounter | None = None):
    """Reconstruct the stored value channel with the named method."""
    if method == "nearest":
        return sample_nearest(cmap, face, u, v, counter)
    if method == "bilinear":
        return sample_bilinear_unchecked(cmap, face, u, v, counter)
    if method == "bicubic16":
        return sample_bicubic16(cmap, face, u, v, counter=counter)
    if method == "fast_bicubic":
        return sample_fast_bicubic(cmap, face, u, v, counter)
    if method == "hermite":
        return sample_hermite(cmap, face, u, v, counter)[0]
    raise ValueError(f"unknown method {method!r}")


# ---------------------------------------------------------------------------
# Spec-shaped single/batch query wrappers
# ---------------------------------------------------------------------------

def hermite_sample(cmap: HermiteCubemap, p) -> ReconstructionSample:
    """Hermite value plus extracted chart derivatives at a face point."""
    value, ru, rv = sample_hermite(cmap, p.face, p.u, p.v)
    f, s = method_cost("hermite")
    return ReconstructionSample(value, ru, rv, f, s)


def baseline_sample(cmap: HermiteCubemap, p, method: str) -> ReconstructionSample:
    """Value-only reconstruction at a face point with per-query cost."""
    if method == "bicubic16_analytic":
        value, ru, rv = sample_bicubic16(cmap, p.face, p.u, p.v, derivatives=True)
        f, s = method_cost("bicubic16")
        return ReconstructionSample(value, ru, rv, f, s)
    value = sample_value(cmap, p.face, p.u, p.v, method)
    f, s = method_cost(method, cmap.channels)
    return ReconstructionSample(value, None, None, f, s)


# ---------------------------------------------------------------------------
# Normals
# ---------------------------------------------------------------------------

def _normal_from_gradient(R, d, grad_vec):
    """n = normalize(R*omega - grad); falls back to omega for zero input."""
    nvec = np.asarray(R)[..., None] * d - grad_vec
    norm = np.linalg.norm(nvec, axis=-1, keepdims=True)
    tiny = norm[..., 0] < 1e-300
    if np.any(tiny):
        nvec = np.where(tiny[..., None], d, nvec / np.where(norm == 0, 1.0, norm))
    else:
        nvec = nvec / norm
    return nvec


def _apply_sign_chain(surface: RadialSurface, r, ru, rv):
    """Scaled radius and chart derivatives of R from raw field samples.

    For signed surfaces R = s*|r|, so dR = s*sign(r)*dr, with sign(0) = +1.
    """
    s = surface.scale
    if surface.signed_abs:
        sign = np.where(np.asarray(r) < 0.0, -1.0, 1.0)
        return s * np.abs(r), s * sign * ru, s * sign * rv
    return s * r, s * ru, s * rv


def normal_from_chart_derivatives(surface, face, u, v, d, R, Ru, Rv):
    """Gradient transport plus the radial normal formula, vectorized."""
    frame = tangent_frame(face, u, v)
    grad = spherical_gradient(frame, Ru, Rv)
    return _normal_from_gradient(R, d, grad.vec)


def analytic_normal(surface: RadialSurface, cmap: HermiteCubemap, d,
                    counter: FetchCounter | None = None):
    """Surface normal from the Hermite sample's own derivatives.

    Consumes exactly the value reconstruction's 4 fetches: the derivatives
    ride along in the same texels.
    """
    d = np.asarray(d, dtype=np.float64)
    fp = cubemap.direction_to_face_uv(d)
    r, ru, rv = sample_hermite(cmap, fp.face, fp.u, fp.v, counter)
    R, Ru, Rv = _apply_sign_chain(surface, r, ru, rv)
    return normal_from_chart_derivatives(surface, fp.face, fp.u, fp.v, d, R, Ru, Rv)


def bicubic_analytic_normal(surface: RadialSurface, cmap: HermiteCubemap, d,
                            counter: FetchCounter | None = None):
    """Normal from differentiated Catmull-Rom reconstruction (same 16 taps)."""
    d = np.asarray(d, dtype=np.float64)
    fp = cubemap.direction_to_face_uv(d)
    r, ru, rv = sample_bicubic16(cmap, fp.face, fp.u, fp.v, derivatives=True,
                                 counter=counter)
    R, Ru, Rv = _apply_sign_chain(surface, r, ru, rv)
    return normal_from_chart_derivatives(surface, fp.face, fp.u, fp.v, d, R, Ru, Rv)


def fd_normal(surface: RadialSurface, cmap: HermiteCubemap, d, method: str,
              step: float | None = None, counter: FetchCounter | None = None):
    """Finite-difference normal: the method's value plus 4 offset taps.

    Central differences of the transformed radius R in chart coordinates,
    with taps at +-step around the query (step defaults to h/2).  Each tap
    is one emulated-bilinear fetch of the value channel; the differenced
    gradient then goes through the usual metric/normal pipeline.
    """
    d = np.asarray(d, dtype=np.float64)
    fp = cubemap.direction_to_face_uv(d)
    if step is None:
        step = 0.5 * cmap.h
    r_c = sample_value(cmap, fp.face, fp.u, fp.v, method, counter)
    R_c = surface.scale * (np.abs(r_c) if surface.signed_abs else r_c)

    def tap(uu, vv):
        rr = sample_bilinear_unchecked(cmap, fp.face, uu, vv)
        if counter is not None:
            counter.add(*FD_TAP_COST, queries=int(np.asarray(uu).size))
        return surface.scale * (np.abs(rr) if surface.signed_abs else rr)

    Ru = (tap(fp.u + step, fp.v) - tap(fp.u - step, fp.v)) / (2.0 * step)
    Rv = (tap(fp.u, fp.v + step) - tap(fp.u, fp.v - step)) / (2.0 * step)
    return normal_from_chart_derivatives(surface, fp.face, fp.u, fp.v, d, R_c, Ru, Rv)


# ---------------------------------------------------------------------------
# Map-backed fields (rendering a map when the source field is gone)
# ---------------------------------------------------------------------------

class MapField(SphericalField):
    """A spherical field reconstructed from a baked map.

    Lets a map file stand in for its (no longer available) source field: the
    renderer and metrics only need ``eval``.  The reconstruction method
    defaults to hermite on 4-channel maps and bilinear otherwise.
    """

    def __init__(self, cmap: HermiteCubemap, method: str | None = None):
        if method is None:
            method = "hermite" if cmap.channels == 4 else "bilinear"
        self.cmap = cmap
        self.method = method

    def eval(self, dirs):
        fp = cubemap.direction_to_face_uv(np.asarray(dirs, dtype=np.float64))
        return sample_value(self.cmap, fp.face, fp.u, fp.v, self.method)


def surface_from_map(cmap: HermiteCubemap, center=(0.0, 0.0, 0.0)) -> RadialSurface:
    """Radial surface wrapping a map, with a texel-derived radius bound.

    Interpolation can overshoot the stored extrema slightly, so the bound
    adds a 5% margin on top of the largest stored magnitude.
    """
    r_max = float(np.max(np.abs(cmap.faces[:, :, :, 0]))) * 1.05
    return RadialSurface(field=MapField(cmap), center=np.asarray(center, dtype=np.float64),
                         scale=cmap.scale, signed_abs=cmap.signed_abs,
                         r_max=max(r_max, 1e-12))

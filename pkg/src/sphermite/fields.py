"""Spherical field sources: harmonic expansions, procedural terrain, meshes.

A field maps unit directions to real values.  Sources that know their exact
chart derivatives (harmonic expansions) expose them so bakes can skip finite
differencing; everything else is differenced at bake time.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field
import json
import math
import warnings

import numpy as np

from . import cubemap, sh


class SphericalField:
    """Interface: deterministic, finite value per unit direction."""

    def eval(self, dirs):
        """Field value at unit direction(s) of shape (..., 3)."""
        raise NotImplementedError

    def chart_derivatives(self, face, u, v):
        """Exact (r, r_u, r_v) at chart points, or None when unavailable."""
        return None

    @property
    def has_chart_derivatives(self) -> bool:
        return False


def sh_field(c: sh.ShCoefficients) -> "ShField":
    return ShField(c)


class ShField(SphericalField):
    """Field defined by a real spherical-harmonic expansion."""

    def __init__(self, coefficients: sh.ShCoefficients):
        self.coefficients = coefficients

    def eval(self, dirs):
        return sh.sh_eval(self.coefficients, dirs)

    def chart_derivatives(self, face, u, v):
        return sh.sh_chart_derivatives(self.coefficients, face, u, v)

    @property
    def has_chart_derivatives(self) -> bool:
        return True


class ChartField(SphericalField):
    """Validation-only field defined directly in chart coordinates.

    ``fn(face, u, v) -> value``.  The baker detects this type and evaluates
    it with the baked face's own (u, v) instead of going through directions,
    which makes stencil accuracy exactly checkable (e.g. r = u bakes to
    ru_h = h with zero error).  Not meaningful as a function on the sphere.
    """

    def __init__(self, fn):
        self.fn = fn

    def eval(self, dirs):
        fp = cubemap.direction_to_face_uv(dirs)
        return self.chart_value(fp.face, fp.u, fp.v)

    def chart_value(self, face, u, v):
        return np.asarray(self.fn(face, u, v), dtype=np.float64)


# ---------------------------------------------------------------------------
# Gradient noise and fBm terrain
# ---------------------------------------------------------------------------

def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & 0xFFFFFFFFFFFFFFFF
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return state, z ^ (z >> 31)


def _permutation(seed: int) -> np.ndarray:
    """256-entry permutation, doubled, from a splitmix64 Fisher-Yates shuffle."""
    perm = np.arange(256, dtype=np.int64)
    state = seed & 0xFFFFFFFFFFFFFFFF
    for i in range(255, 0, -1):
        state, z = _splitmix64(state)
        j = z % (i + 1)
        perm[i], perm[j] = perm[j], perm[i]
    return np.concatenate([perm, perm])


# Classic 12-direction gradient set (cube edge midpoints).
_GRADS = np.array(
    [
        [1, 1, 0], [-1, 1, 0], [1, -1, 0], [-1, -1, 0],
        [1, 0, 1], [-1, 0, 1], [1, 0, -1], [-1, 0, -1],
        [0, 1, 1], [0, -1, 1], [0, 1, -1], [0, -1, -1],
    ],
    dtype=np.float64,
)


def gradient_noise(points, perm: np.ndarray):
    """3D gradient noise with quintic fade at points of shape (..., 3).

    Values lie roughly in [-1, 1]; zero mean by construction.
    """
    p = np.asarray(points, dtype=np.float64)
    pi = np.floor(p).astype(np.int64)
    pf = p - pi
    pi &= 255

    def fade(t):
        return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)

    fu, fv, fw = fade(pf[..., 0]), fade(pf[..., 1]), fade(pf[..., 2])

    def corner(dx, dy, dz):
        h = perm[perm[perm[pi[..., 0] + dx] + pi[..., 1] + dy] + pi[..., 2] + dz] % 12
        g = _GRADS[h]
        d = pf - np.array([dx, dy, dz], dtype=np.float64)
        return np.sum(g * d, axis=-1)

    n000, n100 = corner(0, 0, 0), corner(1, 0, 0)
    n010, n110 = corner(0, 1, 0), corner(1, 1, 0)
    n001, n101 = corner(0, 0, 1), corner(1, 0, 1)
    n011, n111 = corner(0, 1, 1), corner(1, 1, 1)

    def lerp(t, a, b):
        return a + t * (b - a)

    x00 = lerp(fu, n000, n100)
    x10 = lerp(fu, n010, n110)
    x01 = lerp(fu, n001, n101)
    x11 = lerp(fu, n011, n111)
    y0 = lerp(fv, x00, x10)
    y1 = lerp(fv, x01, x11)
    return lerp(fw, y0, y1)


@dataclass(frozen=True)
class TerrainParams:
    """Parameters of an fBm heightfield plus optional analytic features.

    Feature entries: craters/boulders are dicts with keys ``center`` (any
    3-vector, normalized internally), ``radius`` (angular, radians) and
    ``depth``/``height``; ridges have ``normal``, ``width`` (angular) and
    ``height``.  The JSON document mirrors these fields one to one.
    """

    base_radius: float = 1.0
    octaves: int = 4
    lacunarity: float = 2.0
    gain: float = 0.5
    amplitude: float = 0.1
    frequency: float = 2.0
    seed: int = 0
    craters: tuple = ()
    ridges: tuple = ()
    boulders: tuple = ()

    def __post_init__(self):
        if self.octaves < 1:
            raise ValueError("octaves must be >= 1")
        if self.amplitude < 0:
            raise ValueError("amplitude must be >= 0")
        if self.base_radius <= 0:
            raise ValueError("base_radius must be > 0")
        object.__setattr__(self, "craters", tuple(dict(c) for c in self.craters))
        object.__setattr__(self, "ridges", tuple(dict(r) for r in self.ridges))
        object.__setattr__(self, "boulders", tuple(dict(b) for b in self.boulders))

    @classmethod
    def from_json(cls, text: str) -> "TerrainParams":
        doc = json.loads(text)
        return cls(**doc)

    def to_json(self) -> str:
        doc = {
            "base_radius": self.base_radius,
            "octaves": self.octaves,
            "lacunarity": self.lacunarity,
            "gain": self.gain,
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "seed": self.seed,
            "craters": list(self.craters),
            "ridges": list(self.ridges),
            "boulders": list(self.boulders),
        }
        return json.dumps(doc, indent=2)


def _bump(x):
    """C1 radial profile: 1 at x=0, 0 with zero slope at |x|>=1."""
    t = np.clip(1.0 - x * x, 0.0, None)
    return t * t


def fbm_terrain_field(params: TerrainParams, validate: bool = True) -> "FbmTerrainField":
    return FbmTerrainField(params, validate=validate)


class FbmTerrainField(SphericalField):
    """base_radius plus multi-octave gradient noise and shaped features.

    No exact chart derivatives; bakes go through central differences.
    """

    def __init__(self, params: TerrainParams, validate: bool = True):
        self.params = params
        self._perm = _permutation(params.seed)
        self._craters = [
            (cubemap.normalize(np.asarray(c["center"], dtype=np.float64)),
             float(c["radius"]), float(c["depth"]))
            for c in params.craters
        ]
        self._ridges = [
            (cubemap.normalize(np.asarray(r["normal"], dtype=np.float64)),
             float(r["width"]), float(r["height"]))
            for r in params.ridges
        ]
        self._boulders = [
            (cubemap.normalize(np.asarray(b["center"], dtype=np.float64)),
             float(b["radius"]), float(b["height"]))
            for b in params.boulders
        ]
        if validate:
            sweep = fibonacci_directions(20000)
            rmin = float(np.min(self.eval(sweep)))
            if rmin <= 0.0:
                raise ValueError(
                    f"terrain radius is not positive everywhere (min {rmin:.4g})"
                )

    def eval(self, dirs):
        p = np.asarray(dirs, dtype=np.float64)
        out = np.full(p.shape[:-1], self.params.base_radius)
        amp = self.params.amplitude
        freq = self.params.frequency
        for _ in range(self.params.octaves):
            out = out + amp * gradient_noise(p * freq, self._perm)
            amp *= self.params.gain
            freq *= self.params.lacunarity
        for center, radius, depth in self._craters:
            ang = np.arccos(np.clip(p @ center, -1.0, 1.0))
            out = out - depth * _bump(ang / radius)
        for normal, width, height in self._ridges:
            s = p @ normal  # sine of the angular offset from the great circle
            out = out + height * _bump(s / math.sin(width))
        for center, radius, height in self._boulders:
            ang = np.arccos(np.clip(p @ center, -1.0, 1.0))
            out = out + height * _bump(ang / radius)
        return out


# ---------------------------------------------------------------------------
# Mesh radial depth field
# ---------------------------------------------------------------------------

class MeshRadialField(SphericalField):
    """Farthest ray/triangle hit distance from a center point.

    Encodes a closed mesh as a star-shaped radial function.  Rays that miss
    every triangle (the star-shape assumption is violated or the mesh is not
    closed around the center) return 0 and are tallied in ``miss_count``.
    """

    def __init__(self, triangles, center):
        tris = np.asarray(triangles, dtype=np.float64)
        if tris.ndim != 3 or tris.shape[1:] != (3, 3) or tris.shape[0] == 0:
            raise ValueError("triangles must be a non-empty (n, 3, 3) array")
        self.triangles = tris
        self.center = np.asarray(center, dtype=np.float64).reshape(3)
        self.miss_count = 0
        self._v0 = tris[:, 0]
        self._e1 = tris[:, 1] - tris[:, 0]
        self._e2 = tris[:, 2] - tris[:, 0]

    def eval(self, dirs):
        d = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
        flat = d.reshape(-1, 3)
        out = np.empty(flat.shape[0])
        # Chunk the (rays x triangles) product to bound memory.
        chunk = max(1, int(2e7) // max(1, self.triangles.shape[0]))
        for lo in range(0, flat.shape[0], chunk):
            out[lo:lo + chunk] = self._farthest_hits(flat[lo:lo + chunk])
        misses = int(np.sum(out == 0.0))
        if misses:
            self.miss_count += misses
            warnings.warn(
                f"{misses} directions had no triangle hit; returned 0",
                RuntimeWarning,
                stacklevel=2,
            )
        shaped = out.reshape(d.shape[:-1])
        return shaped if np.asarray(dirs).ndim > 1 else shaped[0]

    def _farthest_hits(self, dirs):
        # Moller-Trumbore, vectorized over (rays, triangles).
        eps = 1e-12
        dvec = dirs[:, None, :]
        pvec = np.cross(dvec, self._e2[None, :, :])
        det = np.sum(self._e1[None, :, :] * pvec, axis=-1)
        ok = np.abs(det) > eps
        inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
        tvec = self.center[None, None, :] - self._v0[None, :, :]
        bu = np.sum(tvec * pvec, axis=-1) * inv
        qvec = np.cross(tvec, self._e1[None, :, :])
        bv = np.sum(dvec * qvec, axis=-1) * inv
        t = np.sum(self._e2[None, :, :] * qvec, axis=-1) * inv
        tol = 1e-9
        hit = ok & (bu >= -tol) & (bv >= -tol) & (bu + bv <= 1.0 + tol) & (t > eps)
        t = np.where(hit, t, 0.0)
        return np.max(t, axis=1)


# ---------------------------------------------------------------------------
# Radial surfaces
# ---------------------------------------------------------------------------

def fibonacci_directions(n: int) -> np.ndarray:
    """Low-discrepancy unit directions (golden-angle spiral)."""
    i = np.arange(n, dtype=np.float64)
    z = 1.0 - (2.0 * i + 1.0) / n
    r = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = i * (math.pi * (3.0 - math.sqrt(5.0)))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)


R_MAX_SWEEP = 100_000
R_MAX_SAFETY = 1.02


@dataclass
class RadialSurface:
    """A star-shaped surface x(w) = center + R(w) * w.

    ``R = scale * field`` for nonnegative fields; with ``signed_abs`` set,
    ``R = scale * |field|`` and the field's sign is tracked for normals.
    ``r_max`` bounds the unscaled field magnitude (dense-sweep estimate with
    a small safety factor) and sizes the renderer's bounding sphere.
    """

    field: SphericalField
    center: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(3))
    scale: float = 1.0
    signed_abs: bool = False
    r_max: float = 0.0

    def __post_init__(self):
        if self.scale <= 0:
            raise ValueError("scale must be > 0")
        self.center = np.asarray(self.center, dtype=np.float64).reshape(3)
        if self.r_max <= 0.0:
            sweep = fibonacci_directions(R_MAX_SWEEP)
            vals = self.field.eval(sweep)
            if not self.signed_abs and np.min(vals) < 0.0:
                raise ValueError(
                    "field is negative on the sweep; use signed_abs for signed fields"
                )
            self.r_max = float(np.max(np.abs(vals))) * R_MAX_SAFETY

    @property
    def bounding_radius(self) -> float:
        return self.scale * self.r_max

    def radius(self, dirs):
        """(R, sign) at unit direction(s); sign(0) counts as +1."""
        r = self.field.eval(dirs)
        sign = np.where(np.asarray(r) < 0.0, -1.0, 1.0)
        if self.signed_abs:
            return self.scale * np.abs(r), sign
        return self.scale * r, sign


def radius_transform(surface: RadialSurface, d):
    """Scaled radius and carried sign of the surface at direction(s)."""
    return surface.radius(d)


def mesh_radial_field(triangles, center) -> MeshRadialField:
    return MeshRadialField(triangles, center)

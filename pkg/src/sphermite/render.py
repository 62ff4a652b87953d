"""CPU ray-cast rendering of star-shaped radial surfaces.

Per-pixel pinhole rays are intersected with ``x(w) = c + R(w) w`` by
bracketing the implicit function ``F(p) = |p - c| - R(omega)`` inside the
bounding sphere (fixed-step march), then bisection, then a short Newton
polish with a numerically differenced dF/dt.  Hits are rejected unless the
final residual is below tolerance.

The radius callable is pluggable: direct field evaluation (ground truth) or
any map reconstruction method, so every pixel of a LUT render goes through
the same reconstruction the GPU shader would use.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dataclass_field

import numpy as np

from . import cubemap, sampler
from .fields import RadialSurface, SphericalField
from .hermitemap import HermiteCubemap
from .sampler import FetchCounter

RENDER_METHODS = (
    "ground_truth",
    "nearest",
    "bilinear_fd",
    "bicubic16_fd",
    "bicubic16_analytic",
    "fast_bicubic_fd",
    "hermite",
)

# Value reconstruction and FD base method per render method.
_VALUE_METHOD = {
    "nearest": "nearest",
    "bilinear_fd": "bilinear",
    "bicubic16_fd": "bicubic16",
    "bicubic16_analytic": "bicubic16",
    "fast_bicubic_fd": "fast_bicubic",
    "hermite": "hermite",
}


def worker_count() -> int:
    """Parallel chunk count; capped by the SPHERMITE_THREADS env var."""
    env = os.environ.get("SPHERMITE_THREADS")
    if env is not None:
        return max(1, int(env))
    return 1


@dataclass
class Camera:
    eye: np.ndarray
    look_at: np.ndarray
    up: np.ndarray = dataclass_field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    fov_y: float = math.radians(35.0)
    width: int = 256
    height: int = 256

    def __post_init__(self):
        self.eye = np.asarray(self.eye, dtype=np.float64).reshape(3)
        self.look_at = np.asarray(self.look_at, dtype=np.float64).reshape(3)
        self.up = np.asarray(self.up, dtype=np.float64).reshape(3)
        if not (0.0 < self.fov_y < math.pi):
            raise ValueError("fov_y must lie in (0, pi)")
        if self.width < 1 or self.height < 1:
            raise ValueError("image dimensions must be >= 1")

    def rays(self):
        """Unit ray directions through all pixel centers, shape (h*w, 3)."""
        fwd = cubemap.normalize(self.look_at - self.eye)
        up = self.up
        if abs(float(np.dot(fwd, cubemap.normalize(up)))) > 0.999:
            up = np.array([1.0, 0.0, 0.0])
        right = cubemap.normalize(np.cross(fwd, up))
        cam_up = np.cross(right, fwd)
        tan_half = math.tan(0.5 * self.fov_y)
        aspect = self.width / self.height
        xs = ((np.arange(self.width) + 0.5) / self.width * 2.0 - 1.0) * tan_half * aspect
        ys = (1.0 - (np.arange(self.height) + 0.5) / self.height * 2.0) * tan_half
        X, Y = np.meshgrid(xs, ys)
        d = fwd + X[..., None] * right + Y[..., None] * cam_up
        return cubemap.normalize(d.reshape(-1, 3))


def frame_surface(surface: RadialSurface, width: int = 256, height: int = 256,
                  fov_y: float = math.radians(35.0),
                  view_dir=(0.45, 0.35, 1.0), margin: float = 1.12) -> Camera:
    """A camera that fits the surface's bounding sphere with some margin."""
    vd = cubemap.normalize(np.asarray(view_dir, dtype=np.float64))
    dist = surface.bounding_radius * margin / math.sin(0.5 * fov_y)
    return Camera(eye=surface.center + dist * vd, look_at=surface.center,
                  fov_y=fov_y, width=width, height=height)


@dataclass
class ShadingParams:
    """Lambert + Blinn-Phong constants (documented defaults, fixed gamma)."""

    light_dir: np.ndarray = dataclass_field(
        default_factory=lambda: cubemap.normalize(np.array([0.45, 0.8, 0.55]))
    )
    albedo: np.ndarray = dataclass_field(
        default_factory=lambda: np.array([0.78, 0.33, 0.26])
    )
    ka: float = 0.1
    kd: float = 0.8
    ks: float = 0.3
    shininess: float = 64.0
    background: np.ndarray = dataclass_field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        self.light_dir = cubemap.normalize(np.asarray(self.light_dir, dtype=np.float64))
        self.albedo = np.asarray(self.albedo, dtype=np.float64).reshape(3)
        self.background = np.asarray(self.background, dtype=np.float64).reshape(3)


@dataclass
class MarchConfig:
    steps: int = 32
    bisect_iters: int = 12
    newton_iters: int = 3
    residual_tol: float = 1e-5   # relative to the bounding radius
    newton_step: float = 1e-4    # dF/dt differencing step, x bounding radius


@dataclass
class Hit:
    """Batched intersection result over a ray set."""

    mask: np.ndarray       # (n,) bool
    t: np.ndarray          # (n,)
    point: np.ndarray      # (n, 3)
    omega: np.ndarray      # (n, 3) direction from surface center
    radius: np.ndarray     # (n,) R at the hit
    residual: np.ndarray   # (n,) |F| at the accepted parameter


def shade(normals, view_dirs, params: ShadingParams):
    """Linear-RGB Lambert + Blinn-Phong with one directional light."""
    n = np.asarray(normals, dtype=np.float64)
    l = params.light_dir
    ndotl = np.maximum(np.sum(n * l, axis=-1), 0.0)
    h = cubemap.normalize(l + np.asarray(view_dirs, dtype=np.float64))
    spec = np.maximum(np.sum(n * h, axis=-1), 0.0) ** params.shininess
    rgb = (params.ka + params.kd * ndotl)[..., None] * params.albedo \
        + (params.ks * spec)[..., None]
    return rgb


@dataclass
class RenderImage:
    rgb: np.ndarray               # (h, w, 3) float32, linear
    mask: np.ndarray              # (h, w) bool, True where the surface was hit
    normals: np.ndarray | None    # (h, w, 3) float32 or None
    fetches: int = 0
    scalars: int = 0


@dataclass
class RenderScene:
    """One or more surface instances plus shading constants.

    Each instance is (surface, maps) where ``maps`` holds the baked inputs a
    method may need: key "hermite" for the 4-channel map, "value" for the
    value-only baseline map.  Ground truth needs no maps.
    """

    instances: list
    shading: ShadingParams = dataclass_field(default_factory=ShadingParams)


@dataclass
class GlyphInstance:
    surface: RadialSurface
    hermite_map: HermiteCubemap | None = None
    value_map: HermiteCubemap | None = None


def single_glyph_scene(surface: RadialSurface, hermite_map=None, value_map=None,
                       shading: ShadingParams | None = None) -> RenderScene:
    inst = GlyphInstance(surface, hermite_map, value_map)
    return RenderScene([inst], shading or ShadingParams())


def glyph_grid_scene(surface: RadialSurface, hermite_map, value_map,
                     rows: int, cols: int, spacing: float | None = None,
                     shading: ShadingParams | None = None) -> RenderScene:
    """Replicate one glyph on a grid (many-surface comparison renders)."""
    if spacing is None:
        spacing = 2.4 * surface.bounding_radius
    instances = []
    for r in range(rows):
        for c in range(cols):
            off = np.array([
                (c - (cols - 1) / 2.0) * spacing,
                ((rows - 1) / 2.0 - r) * spacing,
                0.0,
            ])
            s = RadialSurface(field=surface.field, center=surface.center + off,
                              scale=surface.scale, signed_abs=surface.signed_abs,
                              r_max=surface.r_max)
            instances.append(GlyphInstance(s, hermite_map, value_map))
    return RenderScene(instances, shading or ShadingParams())


# ---------------------------------------------------------------------------
# Intersection
# ---------------------------------------------------------------------------

def intersect(surface: RadialSurface, value_fn, origins, dirs,
              cfg: MarchConfig | None = None) -> Hit:
    """Bracket/bisect/Newton intersection of rays with the radial surface.

    ``value_fn(omega) -> R`` is any radius reconstruction (scaled, world
    units).  Misses (no bounding-sphere hit, no sign change, or residual
    above tolerance) are reported through the mask.
    """
    cfg = cfg or MarchConfig()
    origins = np.atleast_2d(np.asarray(origins, dtype=np.float64))
    dirs = np.atleast_2d(np.asarray(dirs, dtype=np.float64))
    if origins.shape[0] == 1 and dirs.shape[0] > 1:
        origins = np.broadcast_to(origins, dirs.shape)
    n = dirs.shape[0]
    center = surface.center
    rb = surface.bounding_radius

    t = np.zeros(n)
    radius = np.zeros(n)
    residual = np.full(n, np.inf)
    mask = np.zeros(n, dtype=bool)

    oc = origins - center
    b = np.sum(oc * dirs, axis=-1)
    c2 = np.sum(oc * oc, axis=-1) - rb * rb
    disc = b * b - c2
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    t_far = -b + sq
    ok &= t_far > 0.0
    t_near = np.maximum(-b - sq, 0.0)
    idx = np.nonzero(ok)[0]
    if idx.size == 0:
        return Hit(mask, t, origins + t[:, None] * dirs, dirs.copy(), radius, residual)

    o_a = origins[idx]
    d_a = dirs[idx]
    lo_all = t_near[idx]
    hi_all = t_far[idx]

    def f_of(tq, rows):
        p = o_a[rows] + tq[:, None] * d_a[rows]
        q = p - center
        dist = np.linalg.norm(q, axis=-1)
        omega = q / np.maximum(dist, 1e-300)[:, None]
        return dist - value_fn(omega), dist

    # Fixed-step march to the first sign change of F.
    found = np.zeros(idx.size, dtype=bool)
    br_lo = np.zeros(idx.size)
    br_hi = np.zeros(idx.size)
    steps = (hi_all - lo_all) / cfg.steps
    prev_t = lo_all.copy()
    f0, _ = f_of(lo_all, np.arange(idx.size))
    inside0 = f0 <= 0.0
    if np.any(inside0):
        found |= inside0
        br_lo[inside0] = lo_all[inside0]
        br_hi[inside0] = lo_all[inside0]
    for k in range(1, cfg.steps + 1):
        open_rows = np.nonzero(~found)[0]
        if open_rows.size == 0:
            break
        tk = lo_all[open_rows] + steps[open_rows] * k
        fk, _ = f_of(tk, open_rows)
        crossing = fk <= 0.0
        rows = open_rows[crossing]
        br_lo[rows] = prev_t[rows]
        br_hi[rows] = tk[crossing]
        found[rows] = True
        prev_t[open_rows[~crossing]] = tk[~crossing]

    hit_rows = np.nonzero(found)[0]
    if hit_rows.size:
        lo = br_lo[hit_rows]
        hi = br_hi[hit_rows]
        for _ in range(cfg.bisect_iters):
            mid = 0.5 * (lo + hi)
            fm, _ = f_of(mid, hit_rows)
            below = fm <= 0.0
            hi = np.where(below, mid, hi)
            lo = np.where(below, lo, mid)
        tq = 0.5 * (lo + hi)
        delta = cfg.newton_step * rb
        for _ in range(cfg.newton_iters):
            ft, _ = f_of(tq, hit_rows)
            fp, _ = f_of(tq + delta, hit_rows)
            fm2, _ = f_of(tq - delta, hit_rows)
            df = (fp - fm2) / (2.0 * delta)
            step = np.where(np.abs(df) > 1e-300, ft / np.where(df == 0, 1.0, df), 0.0)
            tq = np.clip(tq - step, lo, hi)
        ffin, dist = f_of(tq, hit_rows)
        res = np.abs(ffin)
        good = res <= cfg.residual_tol * rb
        rows_global = idx[hit_rows[good]]
        mask[rows_global] = True
        t[rows_global] = tq[good]
        radius[rows_global] = dist[good] - ffin[good]
        residual[rows_global] = res[good]

    point = origins + t[:, None] * dirs
    q = point - center
    dist_all = np.linalg.norm(q, axis=-1)
    omega = q / np.maximum(dist_all, 1e-300)[:, None]
    return Hit(mask, t, point, omega, radius, residual)


# ---------------------------------------------------------------------------
# Method plumbing
# ---------------------------------------------------------------------------

def _ground_truth_normals(surface: RadialSurface, dirs):
    """Exact normals via field chart derivatives, or dense FD for fields
    without them (eps well below any texel scale)."""
    field = surface.field
    fp = cubemap.direction_to_face_uv(np.asarray(dirs, dtype=np.float64))
    if field.has_chart_derivatives:
        r, ru, rv = field.chart_derivatives(fp.face, fp.u, fp.v)
    else:
        eps = 1e-5
        def val(uu, vv):
            return field.eval(cubemap.face_uv_to_direction(fp.face, uu, vv))
        r = val(fp.u, fp.v)
        ru = (val(fp.u + eps, fp.v) - val(fp.u - eps, fp.v)) / (2 * eps)
        rv = (val(fp.u, fp.v + eps) - val(fp.u, fp.v - eps)) / (2 * eps)
    R, Ru, Rv = sampler._apply_sign_chain(surface, r, ru, rv)
    return sampler.normal_from_chart_derivatives(
        surface, fp.face, fp.u, fp.v, dirs, R, Ru, Rv)


def _instance_fns(inst: GlyphInstance, method: str, counter: FetchCounter):
    """(value_fn, normal_fn) for one instance and render method."""
    surface = inst.surface
    if method == "ground_truth":
        def value_fn(omega):
            return surface.radius(omega)[0]
        return value_fn, lambda dirs: _ground_truth_normals(surface, dirs)

    base = _VALUE_METHOD[method]
    if base == "hermite":
        cmap = inst.hermite_map
    else:
        cmap = inst.value_map or inst.hermite_map
    if cmap is None:
        raise ValueError(f"method {method!r} needs a baked map in the scene")
    if base == "hermite" and cmap.channels != 4:
        raise ValueError("hermite rendering needs the 4-channel map")

    def value_fn(omega):
        fp = cubemap.direction_to_face_uv(omega)
        r = sampler.sample_value(cmap, fp.face, fp.u, fp.v, base, counter)
        return surface.scale * (np.abs(r) if surface.signed_abs else r)

    if method == "hermite":
        def normal_fn(dirs):
            return sampler.analytic_normal(surface, cmap, dirs, counter)
    elif method == "bicubic16_analytic":
        def normal_fn(dirs):
            return sampler.bicubic_analytic_normal(surface, cmap, dirs, counter)
    else:
        def normal_fn(dirs):
            return sampler.fd_normal(surface, cmap, dirs, base, counter=counter)
    return value_fn, normal_fn


def _render_chunk(scene: RenderScene, method: str, origins, dirs,
                  cfg: MarchConfig):
    counter = FetchCounter()
    n = dirs.shape[0]
    best_t = np.full(n, np.inf)
    rgb = np.zeros((n, 3))
    normals = np.zeros((n, 3))
    mask = np.zeros(n, dtype=bool)
    for inst in scene.instances:
        value_fn, normal_fn = _instance_fns(inst, method, counter)
        hit = intersect(inst.surface, value_fn, origins, dirs, cfg)
        closer = hit.mask & (hit.t < best_t)
        if not np.any(closer):
            continue
        rows = np.nonzero(closer)[0]
        best_t[rows] = hit.t[rows]
        nrm = normal_fn(hit.omega[rows])
        normals[rows] = nrm
        view = -dirs[rows]
        rgb[rows] = shade(nrm, view, scene.shading)
        mask[rows] = True
    rgb[~mask] = scene.shading.background
    return rgb, mask, normals, counter


def render(scene: RenderScene, camera: Camera, method: str,
           cfg: MarchConfig | None = None) -> RenderImage:
    """Render the scene with one method; deterministic for fixed inputs."""
    if method not in RENDER_METHODS:
        raise ValueError(f"unknown render method {method!r}")
    cfg = cfg or MarchConfig()
    dirs = camera.rays()
    origins = np.broadcast_to(camera.eye, dirs.shape)
    h, w = camera.height, camera.width

    workers = worker_count()
    if workers <= 1 or h < 2 * workers:
        rgb, mask, normals, counter = _render_chunk(scene, method, origins, dirs, cfg)
    else:
        bounds = np.linspace(0, h, workers + 1, dtype=int) * w
        parts = [(origins[a:b], dirs[a:b]) for a, b in zip(bounds[:-1], bounds[1:])]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(
                lambda ab: _render_chunk(scene, method, ab[0], ab[1], cfg), parts))
        rgb = np.concatenate([r[0] for r in results])
        mask = np.concatenate([r[1] for r in results])
        normals = np.concatenate([r[2] for r in results])
        counter = FetchCounter()
        for r in results:
            counter.merge(r[3])

    return RenderImage(
        rgb=rgb.reshape(h, w, 3).astype(np.float32),
        mask=mask.reshape(h, w),
        normals=normals.reshape(h, w, 3).astype(np.float32),
        fetches=counter.fetches,
        scalars=counter.scalars,
    )

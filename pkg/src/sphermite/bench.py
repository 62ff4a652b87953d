"""End-to-end benchmark suites: bake, reconstruct/render, measure, report.

Each suite returns a JSON-serializable document plus a pass/fail flag for
its built-in assertions, and optionally writes images/CSV next to the JSON.
Every suite is deterministic under a fixed seed: reruns produce identical
bytes.

Scenes are parameterized and seeded rather than tied to any fixed asset, so
the quality comparisons are asserted as orderings and trends, not as
absolute decibel values.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os

import numpy as np

from . import metrics, sampler
from .bake import bake, bake_value_only, build_mip_chain, rebake_mip_chain
from .fields import RadialSurface, ShField, TerrainParams, fbm_terrain_field
from .images import side_by_side, write_ppm
from .render import frame_surface, render, single_glyph_scene
from .sh import ShCoefficients, sh_index

SUITES = ("psnr-vs-n", "cost", "mips", "asteroid", "planet", "equal-storage")

# Face resolutions swept by the resolution benchmark.
PSNR_SWEEP_N = (8, 12, 16, 24, 32, 48, 64)

# Instruction/scalar costs the cost suite must reproduce.
EXPECTED_COSTS = {
    "bilinear_hw": (1, 4),
    "bilinear_fd": (5, 20),
    "bicubic16": (16, 16),
    "fast_bicubic": (4, 16),
    "fast_bicubic_fd": (8, 32),
    "hermite": (4, 16),
}


# ---------------------------------------------------------------------------
# Seeded benchmark inputs
# ---------------------------------------------------------------------------

def benchmark_sh_coefficients(degree: int = 8, seed: int = 7,
                              min_ratio: float = 0.25) -> ShCoefficients:
    """A seeded glyph spectrum, biased positive so the surface is smooth.

    Band energies decay mildly with degree; the constant term is shifted so
    the minimum over a dense sweep equals ``min_ratio`` times the maximum,
    keeping the radius strictly positive (no absolute-value creases).
    """
    rng = np.random.default_rng(seed)
    c = rng.normal(size=(degree + 1) ** 2)
    for l in range(degree + 1):
        c[l * l:(l + 1) * (l + 1)] *= 0.9 ** l
    from .fields import fibonacci_directions

    field = ShField(ShCoefficients(degree, c.copy()))
    vals = field.eval(fibonacci_directions(20000))
    mn, mx = float(np.min(vals)), float(np.max(vals))
    shift = (min_ratio * mx - mn) / (1.0 - min_ratio)
    y00 = 0.5 / math.sqrt(math.pi)
    c[sh_index(0, 0)] += shift / y00
    return ShCoefficients(degree, c)


def benchmark_glyph_surface(degree: int = 8, seed: int = 7) -> RadialSurface:
    return RadialSurface(field=ShField(benchmark_sh_coefficients(degree, seed)))


def asteroid_terrain(seed: int = 11) -> TerrainParams:
    """A rugged seeded body: crater families, ridges, boulders, 5-octave fBm."""
    rng = np.random.default_rng(seed)

    def directions(k):
        v = rng.normal(size=(k, 3))
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    craters = []
    for count, rad_lo, rad_hi, depth in ((6, 0.30, 0.45, 0.055),
                                         (8, 0.16, 0.28, 0.04),
                                         (10, 0.08, 0.15, 0.028)):
        for d in directions(count):
            craters.append({
                "center": d.tolist(),
                "radius": float(rng.uniform(rad_lo, rad_hi)),
                "depth": float(depth * rng.uniform(0.8, 1.2)),
            })
    ridges = [
        {"normal": d.tolist(), "width": float(rng.uniform(0.06, 0.12)),
         "height": float(rng.uniform(0.02, 0.045))}
        for d in directions(4)
    ]
    boulders = [
        {"center": d.tolist(), "radius": float(rng.uniform(0.05, 0.1)),
         "height": float(rng.uniform(0.02, 0.05))}
        for d in directions(12)
    ]
    return TerrainParams(base_radius=1.0, octaves=5, lacunarity=2.0, gain=0.5,
                         amplitude=0.05, frequency=1.7, seed=seed,
                         craters=craters, ridges=ridges, boulders=boulders)


def planet_terrain(seed: int = 13) -> TerrainParams:
    """Gentler multi-scale terrain: continents, ranges, a few shallow craters."""
    rng = np.random.default_rng(seed)

    def directions(k):
        v = rng.normal(size=(k, 3))
        return v / np.linalg.norm(v, axis=-1, keepdims=True)

    craters = [
        {"center": d.tolist(), "radius": float(rng.uniform(0.12, 0.22)),
         "depth": float(rng.uniform(0.012, 0.022))}
        for d in directions(5)
    ]
    ridges = [
        {"normal": d.tolist(), "width": float(rng.uniform(0.08, 0.15)),
         "height": float(rng.uniform(0.015, 0.03))}
        for d in directions(3)
    ]
    return TerrainParams(base_radius=1.0, octaves=6, lacunarity=2.1, gain=0.5,
                         amplitude=0.035, frequency=1.4, seed=seed,
                         craters=craters, ridges=ridges)


def terrain_surface(kind: str, seed: int) -> RadialSurface:
    params = asteroid_terrain(seed) if kind == "asteroid" else planet_terrain(seed)
    return RadialSurface(field=fbm_terrain_field(params))


# ---------------------------------------------------------------------------
# Report formatting
# ---------------------------------------------------------------------------

def format_table(headers, rows) -> str:
    cols = [[str(h)] for h in headers]
    for row in rows:
        for k, cell in enumerate(row):
            cols[k].append(cell if isinstance(cell, str) else f"{cell}")
    widths = [max(len(c) for c in col) for col in cols]
    lines = []
    header = "  ".join(h.ljust(w) for h, w in zip([str(h) for h in headers], widths))
    lines.append(header)
    lines.append("-" * len(header))
    for i in range(1, len(cols[0])):
        lines.append("  ".join(cols[k][i].ljust(widths[k]) for k in range(len(cols))))
    return "\n".join(lines) + "\n"


def _fmt(x, nd=2):
    if isinstance(x, float):
        return "inf" if math.isinf(x) else f"{x:.{nd}f}"
    return str(x)


# ---------------------------------------------------------------------------
# Suites
# ---------------------------------------------------------------------------

def suite_cost() -> tuple[dict, bool, str]:
    rows = []
    ok = True
    for method, (exp_f, exp_s) in EXPECTED_COSTS.items():
        got_f, got_s = metrics.cost_report(method)
        match = (got_f, got_s) == (exp_f, exp_s)
        ok &= match
        rows.append({"method": method, "tex_ops": got_f, "scalars": got_s,
                     "expected_tex_ops": exp_f, "expected_scalars": exp_s,
                     "match": match})
    doc = {"suite": "cost", "rows": rows, "pass": ok}
    table = format_table(
        ["method", "tex ops", "scalars", "expected", "match"],
        [[r["method"], r["tex_ops"], r["scalars"],
          f"{r['expected_tex_ops']}/{r['expected_scalars']}", str(r["match"])]
         for r in rows],
    )
    return doc, ok, table


def _glyph_maps(surface: RadialSurface, n: int, gutter: int = 2):
    hermite_map = bake(surface, n, mode="auto", gutter=gutter)
    value_map = bake_value_only(surface, n, gutter=gutter)
    return hermite_map, value_map


def suite_psnr_vs_n(seed: int = 7, n_list=PSNR_SWEEP_N, value_samples: int = 100_000,
                    image_size: int = 256, degree: int = 8) -> tuple[dict, bool, str]:
    """Value-only and shaded-image PSNR across face resolutions.

    Checks the method ordering (hermite > bicubic16 > bilinear), the growth
    of the hermite-vs-bicubic gap with resolution, and the bilinear plateau
    in the shaded benchmark.
    """
    surface = benchmark_glyph_surface(degree, seed)
    field = surface.field
    camera = frame_surface(surface, image_size, image_size)
    scene = single_glyph_scene(surface)
    gt_image = render(scene, camera, "ground_truth")

    value_rows = []
    shaded_rows = []
    for n in n_list:
        hermite_map, value_map = _glyph_maps(surface, n)
        vp = {
            m: metrics.psnr_values(field, value_map, m, value_samples, seed)
            for m in ("bilinear", "bicubic16")
        }
        vp["hermite"] = metrics.psnr_values(field, hermite_map, "hermite",
                                            value_samples, seed)
        value_rows.append({
            "n": n,
            "bilinear_db": vp["bilinear"].psnr_db,
            "bicubic16_db": vp["bicubic16"].psnr_db,
            "hermite_db": vp["hermite"].psnr_db,
            "delta_hermite_bicubic_db": vp["hermite"].psnr_db - vp["bicubic16"].psnr_db,
        })
        scene_n = single_glyph_scene(surface, hermite_map, value_map)
        srow = {"n": n}
        for method in ("bilinear_fd", "bicubic16_fd", "hermite"):
            img = render(scene_n, camera, method)
            srow[method + "_db"] = metrics.psnr_images(img, gt_image).psnr_db
        shaded_rows.append(srow)

    ordering_ok = all(
        r["hermite_db"] > r["bicubic16_db"] > r["bilinear_db"] for r in value_rows
    )
    deltas = [r["delta_hermite_bicubic_db"] for r in value_rows]
    growth_ok = all(b > a for a, b in zip(deltas, deltas[1:]))
    shaded_ok = all(
        r["hermite_db"] > r["bilinear_fd_db"] for r in shaded_rows
    )
    ok = ordering_ok and growth_ok and shaded_ok
    doc = {
        "suite": "psnr-vs-n",
        "seed": seed,
        "degree": degree,
        "value_samples": value_samples,
        "image_size": image_size,
        "value_psnr": value_rows,
        "shaded_psnr": shaded_rows,
        "checks": {
            "value_ordering_hermite_bicubic_bilinear": ordering_ok,
            "hermite_bicubic_gap_grows_with_n": growth_ok,
            "shaded_hermite_above_bilinear": shaded_ok,
        },
        "pass": ok,
    }
    table = format_table(
        ["N", "bilinear", "bicubic16", "hermite", "d(H-Bic)"],
        [[r["n"], _fmt(r["bilinear_db"]), _fmt(r["bicubic16_db"]),
          _fmt(r["hermite_db"]), _fmt(r["delta_hermite_bicubic_db"])]
         for r in value_rows],
    )
    table += "\nshaded-image PSNR (vs ground-truth render)\n"
    table += format_table(
        ["N", "bilinear+FD", "bicubic16+FD", "hermite"],
        [[r["n"], _fmt(r["bilinear_fd_db"]), _fmt(r["bicubic16_fd_db"]),
          _fmt(r["hermite_db"])] for r in shaded_rows],
    )
    return doc, ok, table


def suite_mips(seed: int = 7, n: int = 32, samples: int = 4000,
               degree: int = 8) -> tuple[dict, bool, str]:
    """Derivative handling across mip levels: recompute vs box-filter-all.

    Reference normals at each level come from a fresh bake of the field at
    that level's resolution (the filtered-representation ground truth that a
    detached chain tries to approximate).
    """
    surface = benchmark_glyph_surface(degree, seed)
    base = bake(surface, n, mode="auto", gutter=1)
    consistent = build_mip_chain(base, "consistent")
    naive = build_mip_chain(base, "naive")
    reference = rebake_mip_chain(surface, n, mode="auto", gutter=1)
    dirs = metrics.uniform_directions(samples, seed)

    def mean_err(level_map, ref_map):
        got = sampler.analytic_normal(surface, level_map, dirs)
        ref = sampler.analytic_normal(surface, ref_map, dirs)
        dots = np.clip(np.sum(got * ref, axis=-1), -1.0, 1.0)
        ang = np.degrees(np.arccos(dots))
        return float(np.mean(ang)), float(np.percentile(ang, 95))

    level0_identical = (
        np.array_equal(consistent[0].faces, naive[0].faces)
        and np.array_equal(consistent[0].faces, base.faces)
    )
    rows = []
    for level in range(len(consistent)):
        c_mean, c_p95 = mean_err(consistent[level], reference[level])
        n_mean, n_p95 = mean_err(naive[level], reference[level])
        ratio = n_mean / c_mean if c_mean > 0 else float("inf")
        rows.append({
            "level": level,
            "resolution": consistent[level].n,
            "consistent_mean_deg": c_mean,
            "consistent_p95_deg": c_p95,
            "naive_mean_deg": n_mean,
            "naive_p95_deg": n_p95,
            "ratio": ratio,
        })
    ratio1_ok = rows[1]["ratio"] >= 2.0 if len(rows) > 1 else False
    ok = level0_identical and ratio1_ok
    doc = {
        "suite": "mips",
        "seed": seed,
        "n": n,
        "samples": samples,
        "levels": rows,
        "checks": {
            "level0_bit_identical": level0_identical,
            "naive_level1_at_least_2x_worse": ratio1_ok,
        },
        "pass": ok,
    }
    table = format_table(
        ["level", "res", "consistent mean", "95th", "naive mean", "95th", "ratio"],
        [[r["level"], f"{r['resolution']}^2", _fmt(r["consistent_mean_deg"]),
          _fmt(r["consistent_p95_deg"]), _fmt(r["naive_mean_deg"]),
          _fmt(r["naive_p95_deg"]), _fmt(r["ratio"], 1) + "x"] for r in rows],
    )
    return doc, ok, table


NORMAL_SUITE_METHODS = ("bilinear_fd", "bicubic16_fd", "bicubic16_analytic", "hermite")


def suite_normals(kind: str, seed: int = 11, n: int = 48,
                  image_size: int = 256) -> tuple[dict, bool, str, dict]:
    """Shaded/normal quality on a seeded procedural body at one resolution.

    Returns the extra dict of rendered images so callers can write them out.
    """
    surface = terrain_surface(kind, seed)
    hermite_map = bake(surface, n, mode="central_diff", gutter=2)
    value_map = bake_value_only(surface, n, gutter=2)
    scene = single_glyph_scene(surface, hermite_map, value_map)
    camera = frame_surface(surface, image_size, image_size)
    gt = render(scene, camera, "ground_truth")
    images = {"ground_truth": gt}
    rows = []
    for method in NORMAL_SUITE_METHODS:
        img = render(scene, camera, method)
        images[method] = img
        err = metrics.normal_error(img, gt)
        psnr = metrics.psnr_images(img, gt)
        rows.append({
            "method": method,
            "samples": metrics.SAMPLE_COUNTS[method],
            "psnr_db": psnr.psnr_db,
            "mean_err_deg": err.mean_deg,
            "p95_err_deg": err.p95_deg,
        })
    by = {r["method"]: r for r in rows}
    hermite_best = (
        by["hermite"]["mean_err_deg"] < by["bilinear_fd"]["mean_err_deg"]
        and by["hermite"]["mean_err_deg"] < by["bicubic16_fd"]["mean_err_deg"]
    )
    fetch_ok = by["hermite"]["samples"] == 4
    ok = hermite_best and fetch_ok
    doc = {
        "suite": kind,
        "seed": seed,
        "n": n,
        "image_size": image_size,
        "rows": rows,
        "checks": {
            "hermite_lowest_mean_normal_error": hermite_best,
            "hermite_samples_is_4": fetch_ok,
        },
        "pass": ok,
    }
    table = format_table(
        ["method", "samples", "PSNR", "mean err", "95th %ile"],
        [[r["method"], r["samples"], _fmt(r["psnr_db"]) + " dB",
          _fmt(r["mean_err_deg"]) + " deg", _fmt(r["p95_err_deg"]) + " deg"]
         for r in rows],
    )
    return doc, ok, table, images


def suite_equal_storage(seed: int = 7, n_list=(8, 16), image_size: int = 256,
                        degree: int = 8) -> tuple[dict, bool, str, dict]:
    """Four-channel maps at N against value-only maps at 2N (same scalars).

    The interior of a 4-channel face at N holds 4*N^2 scalars, exactly what
    a value-only face stores at 2N.
    """
    surface = benchmark_glyph_surface(degree, seed)
    camera = frame_surface(surface, image_size, image_size)
    gt = render(single_glyph_scene(surface), camera, "ground_truth")
    images = {"ground_truth": gt}
    rows = []
    ok = True
    for n in n_list:
        hermite_map = bake(surface, n, mode="auto", gutter=2)
        value_map = bake_value_only(surface, 2 * n, gutter=2)
        scene = single_glyph_scene(surface, hermite_map, value_map)
        img_h = render(scene, camera, "hermite")
        img_b = render(scene, camera, "bilinear_fd")
        images[f"hermite_n{n}"] = img_h
        images[f"bilinear_n{2 * n}"] = img_b
        psnr_h = metrics.psnr_images(img_h, gt).psnr_db
        psnr_b = metrics.psnr_images(img_b, gt).psnr_db
        hermite_cost = metrics.cost_report("hermite")
        bilinear_cost = metrics.cost_report("bilinear_fd")
        scalars_per_face = 4 * n * n
        rows.append({
            "hermite_n": n,
            "bilinear_n": 2 * n,
            "interior_scalars_per_face": scalars_per_face,
            "hermite_db": psnr_h,
            "bilinear_fd_db": psnr_b,
            "advantage_db": psnr_h - psnr_b,
            "hermite_tex_ops": hermite_cost[0],
            "bilinear_fd_tex_ops": bilinear_cost[0],
        })
        ok &= psnr_h - psnr_b >= 3.0
    doc = {
        "suite": "equal-storage",
        "seed": seed,
        "image_size": image_size,
        "rows": rows,
        "checks": {"hermite_at_least_3db_ahead": ok},
        "pass": ok,
    }
    table = format_table(
        ["hermite N", "bilinear N", "scalars/face", "hermite dB", "bilinear dB",
         "advantage", "tex ops (H/B)"],
        [[r["hermite_n"], r["bilinear_n"], r["interior_scalars_per_face"],
          _fmt(r["hermite_db"]), _fmt(r["bilinear_fd_db"]),
          "+" + _fmt(r["advantage_db"]),
          f"{r['hermite_tex_ops']}/{r['bilinear_fd_tex_ops']}"] for r in rows],
    )
    return doc, ok, table, images


# ---------------------------------------------------------------------------
# Suite runner with file outputs
# ---------------------------------------------------------------------------

def run_suite(name: str, out_dir: str | None = None, seed: int = 7,
              image_size: int = 256, n_list=None,
              value_samples: int = 100_000) -> tuple[dict, bool]:
    """Run one suite, writing JSON/table/CSV/image artifacts if out_dir set."""
    images = {}
    csv_rows = None
    if name == "cost":
        doc, ok, table = suite_cost()
    elif name == "psnr-vs-n":
        doc, ok, table = suite_psnr_vs_n(
            seed=seed, n_list=tuple(n_list) if n_list else PSNR_SWEEP_N,
            value_samples=value_samples, image_size=image_size)
        csv_rows = [
            ("n", "value_bilinear_db", "value_bicubic16_db", "value_hermite_db",
             "shaded_bilinear_fd_db", "shaded_bicubic16_fd_db", "shaded_hermite_db"),
        ] + [
            (v["n"], v["bilinear_db"], v["bicubic16_db"], v["hermite_db"],
             s["bilinear_fd_db"], s["bicubic16_fd_db"], s["hermite_db"])
            for v, s in zip(doc["value_psnr"], doc["shaded_psnr"])
        ]
    elif name == "mips":
        doc, ok, table = suite_mips(seed=seed)
    elif name in ("asteroid", "planet"):
        doc, ok, table, images = suite_normals(name, seed=seed, image_size=image_size)
    elif name == "equal-storage":
        doc, ok, table, images = suite_equal_storage(
            seed=seed, n_list=tuple(n_list) if n_list else (8, 16),
            image_size=image_size)
    else:
        raise ValueError(f"unknown suite {name!r} (choose from {', '.join(SUITES)})")

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        base = os.path.join(out_dir, name.replace("-", "_"))
        with open(base + ".json", "w", encoding="ascii") as f:
            json.dump(doc, f, indent=2, sort_keys=True)
            f.write("\n")
        with open(base + ".txt", "w", encoding="ascii") as f:
            f.write(table)
        if csv_rows:
            buf = io.StringIO()
            writer = csv.writer(buf, lineterminator="\n")
            writer.writerows(csv_rows)
            with open(base + ".csv", "w", encoding="ascii") as f:
                f.write(buf.getvalue())
        if images:
            ordered = sorted(images)
            for key in ordered:
                write_ppm(f"{base}_{key}.ppm", images[key].rgb)
            strip = side_by_side([images[k].rgb for k in ordered])
            write_ppm(base + "_comparison.ppm", strip)
    return doc, ok

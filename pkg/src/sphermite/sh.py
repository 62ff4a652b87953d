"""Real spherical-harmonic basis with exact first derivatives.

Convention: orthonormal real basis, no Condon-Shortley phase.  Negative
orders carry the sine terms, positive orders the cosine terms:

    Y_l^0      = N_l^0(theta)
    Y_l^{+m}   = sqrt(2) N_l^m(theta) cos(m phi)     m > 0
    Y_l^{-m}   = sqrt(2) N_l^m(theta) sin(m phi)     m > 0

with N_l^m the fully normalized associated Legendre function of cos(theta).
Coefficients are ordered l = 0..L, m = -l..l within each l; the flat index is
``l*l + l + m``.

Derivatives are produced by differentiating the Legendre recurrences in
theta directly, so no finite differencing is involved.  The azimuthal
derivative divided by sin(theta) (the combination needed for the tangent
gradient) is computed through a parallel recurrence on N_l^m / sin(theta),
which is finite for m >= 1, so the +/-Z face centers (exactly at the poles)
evaluate cleanly.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import cubemap

SQRT2 = math.sqrt(2.0)


def sh_index(l: int, m: int) -> int:
    """Flat index of (l, m) in coefficient order."""
    return l * l + l + m


def num_coeffs(degree: int) -> int:
    return (degree + 1) * (degree + 1)


@dataclass(frozen=True)
class ShCoefficients:
    """A truncated expansion: degree L and (L+1)^2 real coefficients."""

    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        c = np.asarray(self.coeffs, dtype=np.float64)
        if c.shape != (num_coeffs(self.degree),):
            raise ValueError(
                f"expected {num_coeffs(self.degree)} coefficients for degree "
                f"{self.degree}, got {c.shape}"
            )
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    def to_json(self) -> str:
        return json.dumps({"degree": self.degree, "coeffs": self.coeffs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "ShCoefficients":
        doc = json.loads(text)
        return cls(int(doc["degree"]), np.asarray(doc["coeffs"], dtype=np.float64))


class SphericalAngles(NamedTuple):
    theta: np.ndarray
    phi: np.ndarray


class ShBasisEval(NamedTuple):
    """Basis values and angular derivatives, each of shape (..., (L+1)^2).

    ``dphi_over_sin`` is dphi / sin(theta) evaluated without dividing, which
    is the quantity the tangent-gradient assembly consumes.
    """

    values: np.ndarray
    dtheta: np.ndarray
    dphi: np.ndarray
    dphi_over_sin: np.ndarray


def _legendre_tables(L, ct, st):
    """Normalized Legendre values N[l][m], theta-derivatives, and N/sin.

    ``ct = cos(theta)``, ``st = sin(theta)`` (arrays).  Returns three dicts
    keyed by (l, m).  Q[(l, m)] = N_l^m / sin(theta) is only built for m >= 1.
    """
    N = {}
    dN = {}
    Q = {}
    c0 = 0.5 / math.sqrt(math.pi)
    N[(0, 0)] = np.full_like(ct, c0)
    dN[(0, 0)] = np.zeros_like(ct)
    if L >= 1:
        Q[(1, 1)] = np.full_like(ct, math.sqrt(1.5) * c0)
    for m in range(2, L + 1):
        Q[(m, m)] = math.sqrt((2 * m + 1) / (2.0 * m)) * st * Q[(m - 1, m - 1)]
    for m in range(1, L + 1):
        N[(m, m)] = st * Q[(m, m)]
        dN[(m, m)] = m * ct * Q[(m, m)]
    for m in range(0, L):
        f = math.sqrt(2 * m + 3)
        N[(m + 1, m)] = f * ct * N[(m, m)]
        dN[(m + 1, m)] = f * (ct * dN[(m, m)] - st * N[(m, m)])
        if m >= 1:
            Q[(m + 1, m)] = f * ct * Q[(m, m)]
    for m in range(0, L + 1):
        for l in range(m + 2, L + 1):
            a = math.sqrt((4 * l * l - 1) / (l * l - m * m))
            b = math.sqrt(
                ((2 * l + 1) * (l - 1 - m) * (l - 1 + m))
                / ((2 * l - 3) * (l * l - m * m))
            )
            N[(l, m)] = a * ct * N[(l - 1, m)] - b * N[(l - 2, m)]
            dN[(l, m)] = a * (ct * dN[(l - 1, m)] - st * N[(l - 1, m)]) - b * dN[(l - 2, m)]
            if m >= 1:
                Q[(l, m)] = a * ct * Q[(l - 1, m)] - b * Q[(l - 2, m)]
    return N, dN, Q


def eval_basis(degree: int, theta, phi) -> ShBasisEval:
    """Evaluate all basis functions and their angular derivatives.

    theta/phi broadcast; the basis axis is appended last.
    """
    if degree < 0:
        raise ValueError("degree must be >= 0")
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    theta, phi = np.broadcast_arrays(theta, phi)
    ct, st = np.cos(theta), np.sin(theta)
    N, dN, Q = _legendre_tables(degree, ct, st)
    n = num_coeffs(degree)
    shape = theta.shape + (n,)
    values = np.zeros(shape)
    dtheta = np.zeros(shape)
    dphi = np.zeros(shape)
    dphi_sin = np.zeros(shape)
    cos_m = {m: np.cos(m * phi) for m in range(1, degree + 1)}
    sin_m = {m: np.sin(m * phi) for m in range(1, degree + 1)}
    for l in range(degree + 1):
        values[..., sh_index(l, 0)] = N[(l, 0)]
        dtheta[..., sh_index(l, 0)] = dN[(l, 0)]
        for m in range(1, l + 1):
            cm, sm = cos_m[m], sin_m[m]
            ip, im = sh_index(l, m), sh_index(l, -m)
            values[..., ip] = SQRT2 * N[(l, m)] * cm
            values[..., im] = SQRT2 * N[(l, m)] * sm
            dtheta[..., ip] = SQRT2 * dN[(l, m)] * cm
            dtheta[..., im] = SQRT2 * dN[(l, m)] * sm
            dphi[..., ip] = -m * SQRT2 * N[(l, m)] * sm
            dphi[..., im] = m * SQRT2 * N[(l, m)] * cm
            dphi_sin[..., ip] = -m * SQRT2 * Q[(l, m)] * sm
            dphi_sin[..., im] = m * SQRT2 * Q[(l, m)] * cm
    return ShBasisEval(values, dtheta, dphi, dphi_sin)


def _sum_expansion(c: ShCoefficients, theta, phi, want_gradient: bool):
    """Accumulate the expansion without materializing the basis matrix.

    Returns ``r`` or ``(r, dr_dtheta, dr_dphi_over_sin)``.
    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    theta, phi = np.broadcast_arrays(theta, phi)
    ct, st = np.cos(theta), np.sin(theta)
    N, dN, Q = _legendre_tables(c.degree, ct, st)
    co = c.coeffs
    r = np.zeros_like(ct)
    dth = np.zeros_like(ct) if want_gradient else None
    dps = np.zeros_like(ct) if want_gradient else None
    for l in range(c.degree + 1):
        r += co[sh_index(l, 0)] * N[(l, 0)]
        if want_gradient:
            dth += co[sh_index(l, 0)] * dN[(l, 0)]
    for m in range(1, c.degree + 1):
        cm, sm = np.cos(m * phi), np.sin(m * phi)
        for l in range(m, c.degree + 1):
            cp = SQRT2 * co[sh_index(l, m)]
            cn = SQRT2 * co[sh_index(l, -m)]
            trig = cp * cm + cn * sm
            r += N[(l, m)] * trig
            if want_gradient:
                dth += dN[(l, m)] * trig
                dps += Q[(l, m)] * m * (cn * cm - cp * sm)
    if want_gradient:
        return r, dth, dps
    return r


def sh_eval(c: ShCoefficients, d):
    """Value of the expansion at unit direction(s) ``d`` of shape (..., 3)."""
    theta, phi = cubemap.direction_to_angles(d)
    return _sum_expansion(c, theta, phi, want_gradient=False)


def sh_gradient(c: ShCoefficients, d):
    """Value and tangent-plane gradient of the expansion at direction(s).

    The gradient is assembled in the spherical orthonormal frame: the theta
    derivative along theta_hat plus dphi/sin(theta) along phi_hat.  At the
    poles phi comes from atan2(0, 0) = 0; the combination is still the
    correct tangent vector because the two frame vectors rotate together.
    """
    d = np.asarray(d, dtype=np.float64)
    theta, phi = cubemap.direction_to_angles(d)
    r, dth, dps = _sum_expansion(c, theta, phi, want_gradient=True)
    ct, st = np.cos(theta), np.sin(theta)
    cp, sp = np.cos(phi), np.sin(phi)
    theta_hat = np.stack([ct * cp, ct * sp, -st], axis=-1)
    phi_hat = np.stack([-sp, cp, np.zeros_like(sp)], axis=-1)
    grad = dth[..., None] * theta_hat + dps[..., None] * phi_hat
    return r, grad


def sh_chart_derivatives(c: ShCoefficients, face, u, v):
    """Value and chart derivatives (r, r_u, r_v) at chart point(s).

    r_u = grad . e1 and r_v = grad . e2, with e1, e2 from the tangent frame
    of the chart point (the chain rule through the chart map).
    """
    d = cubemap.face_uv_to_direction(face, u, v)
    r, grad = sh_gradient(c, d)
    frame = cubemap.tangent_frame(face, u, v)
    ru = np.sum(grad * frame.e1, axis=-1)
    rv = np.sum(grad * frame.e2, axis=-1)
    return r, ru, rv

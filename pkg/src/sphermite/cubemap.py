"""Cubemap chart math: direction <-> (face, u, v), tangent frames, gradients.

Each of the six faces carries local coordinates ``(u, v) in [0, 1]^2``.  The
unnormalized direction is affine in the chart coordinates,

    omega_tilde(u, v) = O_f + u * U_f + v * V_f,

and the unit direction is ``omega = omega_tilde / |omega_tilde|``.  The
per-face origin/axis table below is the one documented in docs/FORMATS.md;
it has to stay fixed because baked files depend on it bit for bit.

Face order and axis table (indices 0..5):

    face  omega_tilde(u, v)
    +X    ( 1,      1 - 2v,  1 - 2u)
    -X    (-1,      1 - 2v,  2u - 1)
    +Y    ( 2u - 1, 1,       2v - 1)
    -Y    ( 2u - 1, -1,      1 - 2v)
    +Z    ( 2u - 1, 1 - 2v,  1)
    -Z    ( 1 - 2u, 1 - 2v, -1)

All functions are vectorized: scalars in, scalars out; arrays in, arrays out.
Everything here is pure and thread-safe.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

FACE_POS_X, FACE_NEG_X, FACE_POS_Y, FACE_NEG_Y, FACE_POS_Z, FACE_NEG_Z = range(6)

FACE_NAMES = ("+X", "-X", "+Y", "-Y", "+Z", "-Z")

# omega_tilde(u, v) = FACE_ORIGIN[f] + u * FACE_DU[f] + v * FACE_DV[f]
FACE_ORIGIN = np.array(
    [
        [1.0, 1.0, 1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, 1.0, -1.0],
        [-1.0, -1.0, 1.0],
        [-1.0, 1.0, 1.0],
        [1.0, 1.0, -1.0],
    ]
)
FACE_DU = np.array(
    [
        [0.0, 0.0, -2.0],
        [0.0, 0.0, 2.0],
        [2.0, 0.0, 0.0],
        [2.0, 0.0, 0.0],
        [2.0, 0.0, 0.0],
        [-2.0, 0.0, 0.0],
    ]
)
FACE_DV = np.array(
    [
        [0.0, -2.0, 0.0],
        [0.0, -2.0, 0.0],
        [0.0, 0.0, 2.0],
        [0.0, 0.0, -2.0],
        [0.0, -2.0, 0.0],
        [0.0, -2.0, 0.0],
    ]
)

# Major axis per face (component index, sign).
FACE_AXIS = np.array([0, 0, 1, 1, 2, 2])
FACE_SIGN = np.array([1.0, -1.0, 1.0, -1.0, 1.0, -1.0])

# Clamp for the metric determinant before inversion (keeps corner gradients
# bounded; see spherical_gradient).
DET_EPS = 1e-8


class FacePoint(NamedTuple):
    """A chart point: face index plus (u, v). Fields may be arrays."""

    face: np.ndarray
    u: np.ndarray
    v: np.ndarray


class TangentFrame(NamedTuple):
    """Chart tangent vectors and metric entries at a face point.

    ``e1 = d omega / du`` and ``e2 = d omega / dv`` (unnormalized tangents),
    ``g11, g12, g22`` the Gram matrix entries, ``det_g = g11*g22 - g12**2``.
    """

    e1: np.ndarray
    e2: np.ndarray
    g11: np.ndarray
    g12: np.ndarray
    g22: np.ndarray
    det_g: np.ndarray


class SphericalGradient(NamedTuple):
    """Tangent-plane gradient expressed in the chart basis: alpha*e1 + beta*e2."""

    alpha: np.ndarray
    beta: np.ndarray
    vec: np.ndarray


def normalize(v):
    """Return v / |v| along the last axis."""
    v = np.asarray(v, dtype=np.float64)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def face_uv_to_direction(face, u, v):
    """Map chart coordinates to the unit direction they subtend.

    ``u, v`` may lie outside [0, 1]; the same affine formula applies, which is
    what gutter and bake-margin texels rely on.
    Returns an array of shape ``(..., 3)``.
    """
    face = np.asarray(face)
    u = np.asarray(u, dtype=np.float64)[..., None]
    v = np.asarray(v, dtype=np.float64)[..., None]
    w = FACE_ORIGIN[face] + u * FACE_DU[face] + v * FACE_DV[face]
    return w / np.linalg.norm(w, axis=-1, keepdims=True)


def direction_to_face_uv(d) -> FacePoint:
    """Select the owning face and invert the chart map.

    The face is the one whose axis has the largest absolute component; exact
    ties resolve in the fixed order +X, -X, +Y, -Y, +Z, -Z (np.argmax picks
    the first maximum, and the axis sign picks the +/- face).
    """
    d = np.asarray(d, dtype=np.float64)
    ax = np.argmax(np.abs(d), axis=-1)
    comp = np.take_along_axis(d, ax[..., None], axis=-1)[..., 0]
    face = 2 * ax + (comp < 0)
    u, v = project_to_face(d, face)
    return FacePoint(face, u, v)


def project_to_face(d, face):
    """Chart coordinates of direction ``d`` in the chart of ``face``.

    Valid for any direction not perpendicular to the face axis; (u, v) fall
    outside [0, 1] when the face does not own the direction.  Used by seam
    diagnostics and gutter addressing.
    """
    d = np.asarray(d, dtype=np.float64)
    face = np.asarray(face)
    major = np.take_along_axis(d, FACE_AXIS[face][..., None], axis=-1)[..., 0]
    scaled = d / np.abs(major)[..., None]
    # u = (scaled_j - O_j) / U_j on the axis j where U is nonzero; same for v.
    du = FACE_DU[face]
    dv = FACE_DV[face]
    ju = np.argmax(np.abs(du), axis=-1)
    jv = np.argmax(np.abs(dv), axis=-1)
    su = np.take_along_axis(scaled, ju[..., None], axis=-1)[..., 0]
    sv = np.take_along_axis(scaled, jv[..., None], axis=-1)[..., 0]
    ou = np.take_along_axis(FACE_ORIGIN[face], ju[..., None], axis=-1)[..., 0]
    ov = np.take_along_axis(FACE_ORIGIN[face], jv[..., None], axis=-1)[..., 0]
    cu = np.take_along_axis(du, ju[..., None], axis=-1)[..., 0]
    cv = np.take_along_axis(dv, jv[..., None], axis=-1)[..., 0]
    return (su - ou) / cu, (sv - ov) / cv


def tangent_frame(face, u, v) -> TangentFrame:
    """Tangent vectors e1, e2 and metric entries at a chart point.

    Differentiating omega = omega_tilde/|omega_tilde| gives

        e_xi = (I - omega omega^T) / |omega_tilde| * d omega_tilde / d xi,

    where d omega_tilde / du and / dv are the constant per-face axis vectors.
    """
    face = np.asarray(face)
    u = np.asarray(u, dtype=np.float64)[..., None]
    v = np.asarray(v, dtype=np.float64)[..., None]
    w = FACE_ORIGIN[face] + u * FACE_DU[face] + v * FACE_DV[face]
    norm = np.linalg.norm(w, axis=-1, keepdims=True)
    omega = w / norm
    du = np.broadcast_to(FACE_DU[face], omega.shape)
    dv = np.broadcast_to(FACE_DV[face], omega.shape)
    e1 = (du - omega * np.sum(omega * du, axis=-1, keepdims=True)) / norm
    e2 = (dv - omega * np.sum(omega * dv, axis=-1, keepdims=True)) / norm
    g11 = np.sum(e1 * e1, axis=-1)
    g12 = np.sum(e1 * e2, axis=-1)
    g22 = np.sum(e2 * e2, axis=-1)
    det_g = g11 * g22 - g12 * g12
    return TangentFrame(e1, e2, g11, g12, g22, det_g)


def spherical_gradient(frame: TangentFrame, ru, rv) -> SphericalGradient:
    """Transport chart derivatives (ru, rv) to the tangent-plane gradient.

    Solves the 2x2 metric system G [alpha, beta]^T = [ru, rv]^T by Cramer's
    rule, clamping det G to DET_EPS so cube corners stay bounded.
    """
    ru = np.asarray(ru, dtype=np.float64)
    rv = np.asarray(rv, dtype=np.float64)
    det = np.maximum(frame.det_g, DET_EPS)
    alpha = (frame.g22 * ru - frame.g12 * rv) / det
    beta = (frame.g11 * rv - frame.g12 * ru) / det
    vec = alpha[..., None] * frame.e1 + beta[..., None] * frame.e2
    return SphericalGradient(alpha, beta, vec)


def direction_to_angles(d):
    """Polar angle theta in [0, pi] and azimuth phi in [-pi, pi] of ``d``."""
    d = np.asarray(d, dtype=np.float64)
    theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
    phi = np.arctan2(d[..., 1], d[..., 0])
    return theta, phi


def angles_to_direction(theta, phi):
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)

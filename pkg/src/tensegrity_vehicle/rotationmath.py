"""Small rotation utilities (rotation vectors, minimal rotations).

All rotations are proper 3x3 matrices acting on column vectors.
"""

import numpy as np

from .exceptions import InvalidAttitudeError


def skew(v):
    """Skew-symmetric matrix S(v) such that S(v) @ x == cross(v, x)."""
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def rotvec_to_matrix(phi):
    """Rodrigues map: rotation vector (axis * angle, rad) to rotation matrix."""
    phi = np.asarray(phi, dtype=float)
    angle = np.linalg.norm(phi)
    if angle < 1e-12:
        # second-order series keeps the map smooth through zero
        s = skew(phi)
        return np.eye(3) + s + 0.5 * (s @ s)
    axis = phi / angle
    s = skew(axis)
    return np.eye(3) + np.sin(angle) * s + (1.0 - np.cos(angle)) * (s @ s)


def matrix_to_rotvec(rot):
    """Inverse Rodrigues map. Input must be orthonormal within 1e-6."""
    rot = np.asarray(rot, dtype=float)
    check_rotation(rot)
    cos_angle = np.clip((np.trace(rot) - 1.0) / 2.0, -1.0, 1.0)
    angle = np.arccos(cos_angle)
    if angle < 1e-8:
        # antisymmetric part gives axis*angle to first order
        return np.array([rot[2, 1] - rot[1, 2],
                         rot[0, 2] - rot[2, 0],
                         rot[1, 0] - rot[0, 1]]) / 2.0
    if angle > np.pi - 1e-6:
        # near pi the antisymmetric part vanishes; use the symmetric part
        sym = (rot + np.eye(3)) / 2.0
        axis = np.sqrt(np.maximum(np.diag(sym), 0.0))
        k = int(np.argmax(axis))
        axis = sym[:, k] / max(axis[k], 1e-12)
        axis /= np.linalg.norm(axis)
        # fix the sign using the largest off-diagonal antisymmetric entry
        w = np.array([rot[2, 1] - rot[1, 2],
                      rot[0, 2] - rot[2, 0],
                      rot[1, 0] - rot[0, 1]])
        if np.dot(w, axis) < 0.0:
            axis = -axis
        return axis * angle
    w = np.array([rot[2, 1] - rot[1, 2],
                  rot[0, 2] - rot[2, 0],
                  rot[1, 0] - rot[0, 1]]) / (2.0 * np.sin(angle))
    return w * angle


def check_rotation(rot, tol=1e-6):
    """Raise InvalidAttitudeError unless ``rot`` is orthonormal within tol."""
    rot = np.asarray(rot, dtype=float)
    if rot.shape != (3, 3):
        raise InvalidAttitudeError(f"rotation matrix must be 3x3, got {rot.shape}")
    err = np.abs(rot.T @ rot - np.eye(3)).max()
    if err > tol or np.linalg.det(rot) < 0.0:
        raise InvalidAttitudeError(f"matrix is not a rotation (orthonormality error {err:.2e})")
    return rot


def any_perpendicular(v):
    """A deterministic unit vector perpendicular to ``v``."""
    v = np.asarray(v, dtype=float)
    k = int(np.argmin(np.abs(v)))
    e = np.zeros(3)
    e[k] = 1.0
    p = e - v * (np.dot(e, v) / np.dot(v, v))
    return p / np.linalg.norm(p)


def minimal_rotation_between(u, v):
    """The smallest-angle rotation R with R @ u == v (unit inputs).

    Parallel inputs give the identity; antiparallel inputs give a pi rotation
    about a deterministically chosen perpendicular axis.
    """
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    c = float(np.dot(u, v))
    axis = np.cross(u, v)
    s = np.linalg.norm(axis)
    if s < 1e-12:
        if c > 0.0:
            return np.eye(3)
        return rotvec_to_matrix(any_perpendicular(u) * np.pi)
    angle = np.arctan2(s, c)
    return rotvec_to_matrix(axis / s * angle)

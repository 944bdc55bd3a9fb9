"""Pauli matrices and unit-quaternion helpers for SU(2).

A quaternion q = (q0, q1, q2, q3) represents the matrix

    U(q) = q0 * Id - i (q1 s1 + q2 s2 + q3 s3),

where s1, s2, s3 are the Pauli matrices.  With this parametrization matrix
multiplication is exactly the Hamilton product, det U = |q|^2, and unit
quaternions are precisely SU(2).
"""

from __future__ import annotations

import numpy as np

ID2 = np.eye(2, dtype=complex)

SIGMA1 = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
SIGMA2 = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
SIGMA3 = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)

# SIGMA[k] is sigma_{k+1}; stacking makes c . sigma a tensordot.
SIGMA = np.stack([SIGMA1, SIGMA2, SIGMA3])


def pauli_vector(c):
    """Return c . sigma for coefficient arrays c of shape (..., 3)."""
    c = np.asarray(c)
    return np.tensordot(c, SIGMA, axes=([-1], [0]))


def pauli_components(a):
    """Coefficients (c1, c2, c3) of the traceless part of a 2x2 matrix.

    For hermitian traceless a, ``pauli_vector(pauli_components(a)) == a``.
    Accepts stacked input of shape (..., 2, 2); returns (..., 3).
    """
    a = np.asarray(a, dtype=complex)
    c1 = 0.5 * (a[..., 0, 1] + a[..., 1, 0])
    c2 = 0.5j * (a[..., 0, 1] - a[..., 1, 0])
    c3 = 0.5 * (a[..., 0, 0] - a[..., 1, 1])
    return np.stack([c1, c2, c3], axis=-1)


def quat_to_matrix(q):
    """U(q) for quaternions of shape (..., 4); returns (..., 2, 2) complex."""
    q = np.asarray(q, dtype=float)
    out = np.empty(q.shape[:-1] + (2, 2), dtype=complex)
    q0, q1, q2, q3 = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    out[..., 0, 0] = q0 - 1j * q3
    out[..., 0, 1] = -q2 - 1j * q1
    out[..., 1, 0] = q2 - 1j * q1
    out[..., 1, 1] = q0 + 1j * q3
    return out


def quat_from_matrix(u):
    """Inverse of :func:`quat_to_matrix` (u must be of the form U(q))."""
    u = np.asarray(u, dtype=complex)
    q0 = 0.5 * (u[..., 0, 0] + u[..., 1, 1]).real
    q3 = -0.5 * (u[..., 0, 0] - u[..., 1, 1]).imag
    q1 = -0.5 * (u[..., 0, 1] + u[..., 1, 0]).imag
    q2 = -0.5 * (u[..., 0, 1] - u[..., 1, 0]).real
    return np.stack([q0, q1, q2, q3], axis=-1)


def quat_mul(a, b):
    """Hamilton product; equals U(a) @ U(b) on the matrix side."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a0, av = a[..., 0], a[..., 1:]
    b0, bv = b[..., 0], b[..., 1:]
    out = np.empty(np.broadcast_shapes(a.shape, b.shape), dtype=float)
    out[..., 0] = a0 * b0 - np.sum(av * bv, axis=-1)
    out[..., 1:] = (a0[..., None] * bv + b0[..., None] * av
                    + np.cross(av, bv))
    return out


def quat_conj(q):
    """Quaternion conjugate: the inverse (and adjoint) for unit quaternions."""
    q = np.asarray(q, dtype=float)
    out = q.copy()
    out[..., 1:] *= -1.0
    return out


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    return q / np.linalg.norm(q, axis=-1, keepdims=True)


def quat_exp_pauli(c):
    """Quaternion of exp(-i c . sigma) for coefficient arrays c (..., 3)."""
    c = np.asarray(c, dtype=float)
    theta = np.linalg.norm(c, axis=-1)
    out = np.empty(c.shape[:-1] + (4,), dtype=float)
    out[..., 0] = np.cos(theta)
    small = theta < 1e-300
    scale = np.where(small, 1.0, np.sin(theta) / np.where(small, 1.0, theta))
    out[..., 1:] = c * scale[..., None]
    return out


IDENTITY_QUAT = np.array([1.0, 0.0, 0.0, 0.0])


def so3_adjoint(q):
    """Rotation matrix R with U(q)^dag (b . sigma) U(q) = (R b) . sigma.

    This is the twofold covering map onto SO(3); works on stacked
    quaternions (..., 4) and returns (..., 3, 3).
    """
    q = np.asarray(q, dtype=float)
    # Conjugation by U(q)^dag rotates Pauli coefficients by the transpose of
    # the standard quaternion rotation matrix of q.
    w, x, y, z = q[..., 0], q[..., 1], q[..., 2], q[..., 3]
    r = np.empty(q.shape[:-1] + (3, 3), dtype=float)
    r[..., 0, 0] = 1 - 2 * (y * y + z * z)
    r[..., 0, 1] = 2 * (x * y - w * z)
    r[..., 0, 2] = 2 * (x * z + w * y)
    r[..., 1, 0] = 2 * (x * y + w * z)
    r[..., 1, 1] = 1 - 2 * (x * x + z * z)
    r[..., 1, 2] = 2 * (y * z - w * x)
    r[..., 2, 0] = 2 * (x * z - w * y)
    r[..., 2, 1] = 2 * (y * z + w * x)
    r[..., 2, 2] = 1 - 2 * (x * x + y * y)
    return np.swapaxes(r, -1, -2)

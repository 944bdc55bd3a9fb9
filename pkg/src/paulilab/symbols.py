"""Matrix-valued phase-space symbols and spin couplings.

A :class:`MatrixSymbol` is a callable field (p, x) -> 2x2 complex matrix.
Symbols are kept as closures and evaluated analytically wherever they are
needed (including off-grid midpoints); they are never stored as sampled
arrays.  Evaluation is vectorized: ``p`` and ``x`` have shape (..., d) and
the result has shape (..., 2, 2).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from paulilab.errors import ContractError
from paulilab.pauli import ID2, SIGMA, pauli_vector


def _as_points(p, x, dim):
    """Broadcast p, x to arrays of shape (..., dim)."""
    p = np.atleast_1d(np.asarray(p, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if p.shape[-1] != dim or x.shape[-1] != dim:
        raise ContractError(
            f"expected trailing axis of length {dim}, got p{p.shape} x{x.shape}")
    return p, x


@dataclass(frozen=True)
class MatrixSymbol:
    """A 2x2 matrix-valued function on phase space.

    Parameters
    ----------
    dim : spatial dimension d.
    func : vectorized callable (p, x) -> (..., 2, 2) complex.
    hermitian : declared hermitian at every point.
    hbar_order : power of hbar the symbol carries in an expansion (metadata).
    scalar : the symbol is a scalar function times the identity; conjugation
        by unitaries then acts trivially, which some consumers exploit.
    name : display name for reports.
    """

    dim: int
    func: Callable
    hermitian: bool = True
    hbar_order: int = 0
    scalar: bool = False
    name: str = "B"

    def __call__(self, p, x):
        p, x = _as_points(p, x, self.dim)
        out = np.asarray(self.func(p, x), dtype=complex)
        expected = np.broadcast_shapes(p.shape[:-1], x.shape[:-1]) + (2, 2)
        if out.shape != expected:
            raise ContractError(
                f"symbol {self.name!r} returned shape {out.shape}, expected {expected}")
        return out

    def check_hermitian(self, rng=None, n_probes=16, scale=2.0, tol=1e-12):
        """Verify the hermitian flag on random probe points."""
        if not self.hermitian:
            return
        rng = np.random.default_rng(0 if rng is None else rng)
        p = rng.uniform(-scale, scale, size=(n_probes, self.dim))
        x = rng.uniform(-scale, scale, size=(n_probes, self.dim))
        vals = self(p, x)
        defect = np.max(np.abs(vals - np.conj(np.swapaxes(vals, -1, -2))))
        if defect > tol:
            raise ContractError(
                f"symbol {self.name!r} declared hermitian but defect {defect:.2e}")


def constant_symbol(mat, dim, name="const"):
    mat = np.asarray(mat, dtype=complex)
    herm = bool(np.allclose(mat, mat.conj().T, atol=1e-14))
    scalar = bool(np.allclose(mat, mat[0, 0] * ID2, atol=1e-14))

    def func(p, x):
        shape = np.broadcast_shapes(p.shape[:-1], x.shape[:-1])
        return np.broadcast_to(mat, shape + (2, 2)).copy()

    return MatrixSymbol(dim=dim, func=func, hermitian=herm, scalar=scalar, name=name)


def scalar_symbol(f, dim, name="b"):
    """b(p, x) * Id for a real-valued vectorized scalar function b."""

    def func(p, x):
        b = np.asarray(f(p, x))
        return b[..., None, None] * ID2

    return MatrixSymbol(dim=dim, func=func, hermitian=True, scalar=True, name=name)


def pauli_symbol(f, axis, dim, name=None):
    """c(p, x) * sigma_j for a real scalar function c and axis j in {1,2,3}."""
    if axis not in (1, 2, 3):
        raise ContractError("Pauli axis must be 1, 2 or 3")
    mat = SIGMA[axis - 1]

    def func(p, x):
        c = np.asarray(f(p, x))
        return c[..., None, None] * mat

    return MatrixSymbol(dim=dim, func=func, hermitian=True,
                        name=name or f"c*sigma{axis}")


@dataclass(frozen=True)
class SpinCoupling:
    """Traceless hermitian coupling H1 = c(p, x) . sigma.

    ``c_func`` maps (p, x) with shape (..., d) to coefficients (..., 3).
    ``abelian_axis`` is set to j when the coupling is a scalar function
    times the single Pauli matrix sigma_j; the closed-form transport
    solution applies exactly in that case.
    """

    dim: int
    c_func: Callable
    abelian_axis: Optional[int] = None
    scalar_func: Optional[Callable] = None
    name: str = "coupling"

    def coefficients(self, p, x):
        p, x = _as_points(p, x, self.dim)
        c = np.asarray(self.c_func(p, x), dtype=float)
        expected = np.broadcast_shapes(p.shape[:-1], x.shape[:-1]) + (3,)
        if c.shape != expected:
            raise ContractError(
                f"coupling {self.name!r} returned shape {c.shape}, expected {expected}")
        return c

    def as_symbol(self):
        def func(p, x):
            return pauli_vector(self.coefficients(p, x))

        return MatrixSymbol(dim=self.dim, func=func, hermitian=True,
                            hbar_order=1, name=self.name)


def sigma_coupling(f, axis, dim, name=None):
    """Abelian coupling c(p, x) * sigma_j."""
    if axis not in (1, 2, 3):
        raise ContractError("Pauli axis must be 1, 2 or 3")

    def c_func(p, x):
        c = np.asarray(f(p, x), dtype=float)
        out = np.zeros(c.shape + (3,))
        out[..., axis - 1] = c
        return out

    return SpinCoupling(dim=dim, c_func=c_func, abelian_axis=axis,
                        scalar_func=f, name=name or f"abelian sigma{axis}")


def constant_coupling(vec, dim, name="constant coupling"):
    vec = np.asarray(vec, dtype=float)
    if vec.shape != (3,):
        raise ContractError("constant coupling needs a 3-vector")
    nz = np.nonzero(np.abs(vec) > 0)[0]
    axis = int(nz[0]) + 1 if len(nz) == 1 else None

    def c_func(p, x):
        shape = np.broadcast_shapes(p.shape[:-1], x.shape[:-1])
        return np.broadcast_to(vec, shape + (3,)).copy()

    scalar = (lambda p, x: np.broadcast_to(
        vec[axis - 1], np.broadcast_shapes(p.shape[:-1], x.shape[:-1])).copy()) \
        if axis is not None else None
    return SpinCoupling(dim=dim, c_func=c_func, abelian_axis=axis,
                        scalar_func=scalar, name=name)


def vector_coupling(c_func, dim, name="vector coupling"):
    """Generic non-abelian coupling from a user coefficient field."""
    return SpinCoupling(dim=dim, c_func=c_func, name=name)


def magnetic_coupling(b_func, dim, scale=-0.5, name="magnetic"):
    """Coupling to a magnetic field: c(x) = scale * B(x).

    ``b_func`` maps positions (..., d) to field vectors (..., 3).  The
    default scale -1/2 absorbs charge, mass and light speed in model units.
    """

    def c_func(p, x):
        return scale * np.asarray(b_func(x), dtype=float)

    return SpinCoupling(dim=dim, c_func=c_func, name=name)


def spin_orbit_coupling(dphi_over_r, dim, scale=0.25, name="spin-orbit"):
    """Planar spin-orbit coupling for d = 2.

    c3(p, x) = scale * g(|x|) * (x1 p2 - x2 p1), with g supplied by the
    caller as d(phi)/d|x| / |x|; the out-of-plane angular momentum couples
    to sigma_3.
    """
    if dim != 2:
        raise ContractError("planar spin-orbit coupling requires d = 2")

    def c_func(p, x):
        lz = x[..., 0] * p[..., 1] - x[..., 1] * p[..., 0]
        r = np.linalg.norm(x, axis=-1)
        out = np.zeros(lz.shape + (3,))
        out[..., 2] = scale * np.asarray(dphi_over_r(r)) * lz
        return out

    return SpinCoupling(dim=dim, c_func=c_func, abelian_axis=3,
                        scalar_func=lambda p, x: scale
                        * np.asarray(dphi_over_r(np.linalg.norm(x, axis=-1)))
                        * (x[..., 0] * p[..., 1] - x[..., 1] * p[..., 0]),
                        name=name)

"""Matrix-valued Wigner and Husimi transforms of spinor grid states.

The discrete Wigner convention lives on the (momentum node, half-step
midpoint) lattice of the quantization grid:

    W[k, v]_{rs} = 2 sum_a exp(i theta_k (2a - v)) psi_r(x_{v-a})
                                                   conj(psi_s(x_a)),

theta_k = (2 pi / N)(k + 1/2 - N/2).  With quadrature weights
dp (dx/2) / (2 pi hbar) per axis, the pairing with any symbol reproduces
the sesquilinear form of its quantized operator exactly (round-off aside):
this duality is the module's ground truth and fixes all constants.

The Husimi transform smooths each matrix entry with the Gaussian kernel
(pi hbar)^(-d) exp(-((p-q)^2 + (x-y)^2) / hbar) by periodic FFT
convolution; the exact transform is pointwise positive semidefinite, and
the discretization keeps the spectrum above a small negative floor.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from paulilab import skew_product
from paulilab.errors import ContractError, ResolutionError
from paulilab.pauli import ID2, SIGMA
from paulilab.phase_flow import HamiltonianModel
from paulilab.symbols import MatrixSymbol, scalar_symbol
from paulilab.weyl_moyal import GridSpec


@dataclass(frozen=True)
class MatrixPhaseField:
    """2x2 matrix per (p, x) node of the transform lattice.

    d = 1 values have shape (N, 2N-1, 2, 2); d = 2 values
    (N, N, 2N-1, 2N-1, 2, 2) with momentum axes first.
    """

    grid: GridSpec
    values: np.ndarray
    kind: str = "wigner"

    def __post_init__(self):
        n = self.grid.n
        expect = ((n, 2 * n - 1, 2, 2) if self.grid.dim == 1
                  else (n, n, 2 * n - 1, 2 * n - 1, 2, 2))
        if self.values.shape != expect:
            raise ContractError(
                f"field shape {self.values.shape} does not match grid {expect}")

    @property
    def node_weight(self) -> float:
        """Quadrature weight per lattice node, including (2 pi hbar)^-d."""
        g = self.grid
        return float((g.dp * g.dx / 2 / (2 * np.pi * g.hbar)) ** g.dim)

    def mass(self) -> float:
        tr = np.trace(self.values, axis1=-2, axis2=-1).real
        return float(tr.sum() * self.node_weight)

    def hermiticity_defect(self) -> float:
        return float(np.max(np.abs(
            self.values - np.conj(np.swapaxes(self.values, -1, -2)))))

    def trace_imag_max(self) -> float:
        return float(np.max(np.abs(
            np.trace(self.values, axis1=-2, axis2=-1).imag)))

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue over all nodes (closed form for 2x2)."""
        a = self.values[..., 0, 0].real
        c = self.values[..., 1, 1].real
        b = self.values[..., 0, 1]
        lam = 0.5 * (a + c) - np.sqrt(0.25 * (a - c) ** 2 + np.abs(b) ** 2)
        return float(lam.min())

    def offdiagonal_fraction(self) -> float:
        num = (np.abs(self.values[..., 0, 1]) + np.abs(self.values[..., 1, 0])).sum()
        den = np.abs(np.trace(self.values, axis1=-2, axis2=-1)).sum()
        return float(num / den) if den else 0.0

    def nodes(self):
        """(p, x) arrays of the lattice, each shaped like values[..., 0, 0]."""
        g = self.grid
        if g.dim == 1:
            p = np.broadcast_to(g.p_axis[:, None, None],
                                (g.n, 2 * g.n - 1, 1))
            x = np.broadcast_to(g.midpoint_axis[None, :, None],
                                (g.n, 2 * g.n - 1, 1))
            return p, x
        n = g.n
        shape = (n, n, 2 * n - 1, 2 * n - 1)
        p = np.stack([np.broadcast_to(g.p_axis[:, None, None, None], shape),
                      np.broadcast_to(g.p_axis[None, :, None, None], shape)],
                     axis=-1)
        x = np.stack([np.broadcast_to(g.midpoint_axis[None, None, :, None], shape),
                      np.broadcast_to(g.midpoint_axis[None, None, None, :], shape)],
                     axis=-1)
        return p, x

    def marginal_position(self) -> np.ndarray:
        """Momentum integral at the grid's own position sites.

        The half-step lattice splits the marginal between even nodes (the
        sites) and interpolating odd nodes; the even-node values carry
        weight 2, so the site marginal is the momentum sum divided by 2.
        Returns (n_sites..., 2, 2), matching psi(x) (x) conj(psi(x)).
        """
        g = self.grid
        w = (g.dp / (2 * np.pi * g.hbar)) ** g.dim / 2 ** g.dim
        if g.dim == 1:
            return self.values[:, ::2].sum(axis=0) * w
        return self.values[:, :, ::2, ::2].sum(axis=(0, 1)) * w


def _split_spin(psi: np.ndarray, grid: GridSpec):
    dim = grid.hilbert_dim
    psi = np.asarray(psi, dtype=complex)
    if psi.shape != (dim,):
        raise ContractError(f"state must have shape ({dim},)")
    if abs(np.linalg.norm(psi) - 1.0) > 1e-8:
        raise ContractError("state must be normalized on the grid")
    comps = psi.reshape(grid.n_sites, 2)
    if grid.dim == 1:
        return comps[:, 0], comps[:, 1]
    n = grid.n
    return comps[:, 0].reshape(n, n), comps[:, 1].reshape(n, n)


def _shift_products_1d(psi_r, psi_s_conj, n):
    """g[v, a] = psi_r(x_{v-a}) conj(psi_s)(x_a), zero off-range."""
    g = np.zeros((2 * n - 1, n), dtype=complex)
    for a in range(n):
        g[a:a + n, a] = psi_r
    return g * psi_s_conj[None, :]


def wigner_transform(psi: np.ndarray, grid: GridSpec) -> MatrixPhaseField:
    """Matrix Wigner transform of a normalized spinor sample vector."""
    comps = _split_spin(psi, grid)
    n = grid.n
    if grid.dim == 1:
        twist = np.exp(2j * np.pi * np.arange(n) / n)
        theta = (2 * np.pi / n) * (np.arange(n) + 0.5 - n / 2)
        vgrid = np.arange(2 * n - 1)
        pref = 2.0 * np.exp(-1j * np.outer(theta, vgrid))   # (k, v)
        bins = (2 * np.arange(n)) % n
        vals = np.empty((n, 2 * n - 1, 2, 2), dtype=complex)
        for r in range(2):
            base = None
            for s in range(2):
                g = _shift_products_1d(comps[r], comps[s].conj(), n)
                f = np.fft.ifft(g * twist[None, :], axis=1) * n
                vals[:, :, r, s] = pref * f[:, bins].T
        return MatrixPhaseField(grid=grid, values=vals, kind="wigner")

    if n > 28:
        raise ContractError(
            "d = 2 Wigner fields above n = 28 per axis exceed the desk-scale "
            "memory budget; use a smaller grid")
    twist = np.exp(2j * np.pi * np.arange(n) / n)
    theta = (2 * np.pi / n) * (np.arange(n) + 0.5 - n / 2)
    vgrid = np.arange(2 * n - 1)
    pref1 = np.exp(-1j * np.outer(theta, vgrid))
    bins = (2 * np.arange(n)) % n
    vals = np.empty((n, n, 2 * n - 1, 2 * n - 1, 2, 2), dtype=complex)
    for r in range(2):
        for s in range(2):
            g = np.zeros((2 * n - 1, 2 * n - 1, n, n), dtype=complex)
            for a1 in range(n):
                for a2 in range(n):
                    g[a1:a1 + n, a2:a2 + n, a1, a2] = comps[r]
            g *= comps[s].conj()[None, None, :, :]
            g *= (twist[:, None] * twist[None, :])[None, None, :, :]
            f = np.fft.ifft2(g, axes=(2, 3)) * n * n
            f = f[:, :, bins][:, :, :, bins]                # (v1, v2, k1, k2)
            w = 4.0 * np.einsum("kv,lw,vwkl->klvw", pref1, pref1, f)
            vals[:, :, :, :, r, s] = w
    return MatrixPhaseField(grid=grid, values=vals, kind="wigner")


def expectation_from_wigner(field: MatrixPhaseField, symbol: MatrixSymbol):
    """(2 pi hbar)^-d integral of tr(W B) over the transform lattice.

    By the discrete duality this equals <psi, Op(B) psi> for the Wigner
    field of psi up to round-off.
    """
    if symbol.dim != field.grid.dim:
        raise ContractError("symbol dimension does not match field grid")
    p, x = field.nodes()
    bvals = symbol(p, x)
    pair = np.einsum("...ij,...ji->...", field.values, bvals)
    val = pair.sum() * field.node_weight
    return float(val.real) if symbol.hermitian else complex(val)


def husimi_transform(field: MatrixPhaseField, loss_tol: float = 1e-6) \
        -> MatrixPhaseField:
    """Gaussian smoothing of a Wigner field on its own lattice.

    Periodic FFT convolution with the normalized kernel; raises
    ResolutionError when the kernel tail reaching the lattice edge exceeds
    ``loss_tol`` (the wrap would then fold weight back in).
    """
    if field.kind != "wigner":
        raise ContractError("husimi_transform expects a Wigner field")
    g = field.grid
    p_span = g.p_axis[-1] - g.p_axis[0]
    x_span = g.midpoint_axis[-1] - g.midpoint_axis[0]
    tail = max(np.exp(-(p_span / 2) ** 2 / g.hbar),
               np.exp(-(x_span / 2) ** 2 / g.hbar))
    if tail > loss_tol:
        raise ResolutionError(
            f"Gaussian kernel tail {tail:.2e} reaches the lattice edge")

    n = g.n
    if g.dim == 1:
        om_p = 2 * np.pi * np.fft.fftfreq(n, d=g.dp)
        om_x = 2 * np.pi * np.fft.fftfreq(2 * n - 1, d=g.dx / 2)
        damp = np.exp(-g.hbar * (om_p[:, None] ** 2 + om_x[None, :] ** 2) / 4)
        spec = np.fft.fft2(field.values, axes=(0, 1))
        vals = np.fft.ifft2(spec * damp[..., None, None], axes=(0, 1))
    else:
        om_p = 2 * np.pi * np.fft.fftfreq(n, d=g.dp)
        om_x = 2 * np.pi * np.fft.fftfreq(2 * n - 1, d=g.dx / 2)
        damp = np.exp(-g.hbar * (
            om_p[:, None, None, None] ** 2 + om_p[None, :, None, None] ** 2
            + om_x[None, None, :, None] ** 2
            + om_x[None, None, None, :] ** 2) / 4)
        spec = np.fft.fftn(field.values, axes=(0, 1, 2, 3))
        vals = np.fft.ifftn(spec * damp[..., None, None], axes=(0, 1, 2, 3))
    # the exact transform is hermitian; discard the round-off skew part
    vals = 0.5 * (vals + np.conj(np.swapaxes(vals, -1, -2)))
    return MatrixPhaseField(grid=g, values=vals, kind="husimi")


# ---------------------------------------------------------------------------
# equidistribution diagnostics
# ---------------------------------------------------------------------------

def default_test_dictionary(model: HamiltonianModel, n_bumps: int = 8,
                            seed: int = 515) -> list:
    """Ten fixed smooth scalar test functions for weak-convergence checks.

    Eight Gaussian bumps centered on shell points plus the quadratic
    monomials p_1^2 and x_1^2.
    """
    width2 = max(abs(model.energy_E), 0.5)
    if model.shell_parametrization is not None:
        theta = np.linspace(0, 2 * np.pi, n_bumps, endpoint=False)
        centers = model.shell_parametrization(theta)
    else:
        sampler = skew_product.default_sampler(model, seed=seed)
        centers = skew_product.sample_liouville_array(model, sampler, n_bumps)
    d = model.dim
    tests = []
    for i, row in enumerate(np.atleast_2d(centers)):
        pc, xc = row[:d].copy(), row[d:].copy()

        def bump(p, x, pc=pc, xc=xc):
            return np.exp(-(np.sum((p - pc) ** 2, axis=-1)
                            + np.sum((x - xc) ** 2, axis=-1)) / (2 * width2))

        tests.append((f"bump{i}", bump))
    tests.append(("p1_sq", lambda p, x: p[..., 0] ** 2))
    tests.append(("x1_sq", lambda p, x: x[..., 0] ** 2))
    return tests


def equidistribution_distance(field: MatrixPhaseField, model: HamiltonianModel,
                              tests: Optional[list] = None,
                              sampler: Optional[skew_product.ShellSampler] = None,
                              mc_samples: int = 200_000):
    """Weak distance of the normalized field trace from the shell measure.

    Pairs the field against a fixed dictionary of smooth test symbols and
    compares with the classical shell averages; returns
    (scalar_distance, offdiag_mass).  The off-diagonal mass measures spin
    mixing, which vanishes for eigenstates of a commuting spin component.
    """
    if tests is None:
        tests = default_test_dictionary(model)
    mass = field.mass()
    if mass <= 0:
        raise ContractError("field has nonpositive mass")
    worst = 0.0
    for _, f in tests:
        sym = scalar_symbol(f, model.dim)
        pairing = expectation_from_wigner(field, sym) / mass
        if model.shell_parametrization is not None:
            classical = skew_product.shell_average_quadrature(model, f)
        else:
            if sampler is None:
                sampler = skew_product.default_sampler(model)
            pts = skew_product.sample_liouville_array(model, sampler, mc_samples)
            classical = float(np.mean(f(pts[:, :model.dim], pts[:, model.dim:])))
        worst = max(worst, abs(pairing - classical))
    return worst, field.offdiagonal_fraction()

"""Weyl quantization of 2x2 matrix symbols and the truncated star product.

Discretization
--------------
Positions live on the periodic lattice x_a = -L + a dx, dx = 2L/N; the dual
momentum lattice is half-integer offset, p_k = dp (k + 1/2 - N/2) with
dp = pi hbar / L, so it is symmetric under p -> -p without containing 0.
The operator of a symbol B acting on sample vectors is assembled from the
midpoint rule

    M[a, b] = phase(a - b) * IFFT_k[ B(p_k, m_{a+b}) ][(a - b) mod N],

with m_v = -L + v dx / 2 the half-step midpoint lattice and
phase(u) = exp(i (2 pi / N) u (1/2 - N/2)).  Constant symbols quantize to
themselves and x * Id to exact multiplication by x_a; hermitian symbols
give exactly hermitian matrices (round-off aside).

Operator identities that are false in finite dimensions globally (the trace
of a commutator vanishes, so canonical commutation cannot hold as a matrix
identity) are checked through Gaussian probe states confined to the trusted
region of phase space; see :func:`operator_probe_error`.

Symbols are closures; star-product and Poisson-bracket derivatives use
high-order central differences evaluated analytically at shifted points,
which are exact on polynomials up to degree four.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from itertools import product as iproduct
from typing import Callable, Optional, Sequence

import numpy as np

from paulilab import batch
from paulilab.errors import ContractError, ResolutionError
from paulilab.phase_flow import HamiltonianModel
from paulilab.symbols import MatrixSymbol, scalar_symbol

__all__ = [
    "GridSpec", "WeylOperator", "weyl_quantize", "moyal_star",
    "matrix_poisson_bracket", "egorov_symbol", "transport_residual",
    "spin_operator", "coherent_state", "operator_probe_error",
]


@dataclass(frozen=True)
class GridSpec:
    """Periodic position grid [-L, L) with its discrete Fourier dual."""

    dim: int
    n: int
    length: float
    hbar: float

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ContractError("grids support d = 1 or 2")
        if self.n < 4 or self.n % 2:
            raise ContractError("points per axis must be even and >= 4")
        if self.length <= 0 or self.hbar <= 0:
            raise ContractError("length and hbar must be positive")

    @property
    def dx(self) -> float:
        return 2 * self.length / self.n

    @property
    def dp(self) -> float:
        return np.pi * self.hbar / self.length

    @property
    def x_axis(self) -> np.ndarray:
        return -self.length + self.dx * np.arange(self.n)

    @property
    def p_axis(self) -> np.ndarray:
        return self.dp * (np.arange(self.n) + 0.5 - self.n / 2)

    @property
    def midpoint_axis(self) -> np.ndarray:
        return -self.length + 0.5 * self.dx * np.arange(2 * self.n - 1)

    @property
    def p_max(self) -> float:
        return float(self.p_axis[-1])

    @property
    def n_sites(self) -> int:
        return self.n ** self.dim

    @property
    def hilbert_dim(self) -> int:
        return 2 * self.n_sites

    def phase(self, u):
        return np.exp(1j * (2 * np.pi / self.n) * np.asarray(u)
                      * (0.5 - self.n / 2))


@dataclass(frozen=True)
class WeylOperator:
    """Dense matrix of a quantized symbol, spin index innermost."""

    matrix: np.ndarray
    grid: GridSpec
    hermiticity_defect: float
    name: str = "Op"

    def __post_init__(self):
        dim = self.grid.hilbert_dim
        if self.matrix.shape != (dim, dim):
            raise ContractError("operator matrix does not match grid dimension")

    def frobenius(self) -> float:
        return float(np.linalg.norm(self.matrix))

    def spectral_norm(self, iters: int = 60, seed: int = 0) -> float:
        """Power-iteration estimate of the operator 2-norm."""
        rng = np.random.default_rng(seed)
        v = rng.standard_normal(self.matrix.shape[0]) \
            + 1j * rng.standard_normal(self.matrix.shape[0])
        v /= np.linalg.norm(v)
        m = self.matrix
        mh = m.conj().T
        s = 0.0
        for _ in range(iters):
            w = mh @ (m @ v)
            s = np.linalg.norm(w)
            if s == 0:
                return 0.0
            v = w / s
        return float(np.sqrt(s))


def spin_operator(grid: GridSpec, axis: int) -> WeylOperator:
    """sigma_j acting on the spin factor (axis in {1, 2, 3})."""
    from paulilab.pauli import SIGMA
    if axis not in (1, 2, 3):
        raise ContractError("Pauli axis must be 1, 2 or 3")
    mat = np.kron(np.eye(grid.n_sites), SIGMA[axis - 1])
    return WeylOperator(matrix=mat, grid=grid, hermiticity_defect=0.0,
                        name=f"sigma{axis}")


def _spectral_tail_fraction(values, axis):
    """Windowed FFT tail of sampled data along one axis.

    The Hann window suppresses the leakage a non-periodic but smooth trend
    produces, so genuine oscillation near the lattice Nyquist stands out.
    """
    n = values.shape[axis]
    win_shape = [1] * values.ndim
    win_shape[axis] = n
    windowed = values * np.hanning(n).reshape(win_shape)
    spec = np.abs(np.fft.fft(windowed, axis=axis)) ** 2
    freqs = np.fft.fftfreq(n)
    tail = np.compress(np.abs(freqs) >= 0.375, spec, axis=axis).sum()
    total = spec.sum()
    return tail / total if total > 0 else 0.0


def _eval_on_quantization_nodes_1d(symbol, grid):
    p = grid.p_axis[:, None, None]
    m = grid.midpoint_axis[None, :, None]
    shape = (grid.n, 2 * grid.n - 1)
    return symbol(np.broadcast_to(p, shape + (1,)),
                  np.broadcast_to(m, shape + (1,)))


def _assemble_1d(symbol, grid):
    vals = _eval_on_quantization_nodes_1d(symbol, grid)
    ift = np.fft.ifft(vals, axis=0)
    a = np.arange(grid.n)
    u = a[:, None] - a[None, :]
    v = a[:, None] + a[None, :]
    blocks = grid.phase(u)[..., None, None] * ift[u % grid.n, v]
    return blocks, vals


def _assemble_2d(symbol, grid):
    n = grid.n
    p1 = grid.p_axis
    p2 = grid.p_axis
    m_axis = grid.midpoint_axis
    a = np.arange(n)
    u = a[:, None] - a[None, :]
    umod = u % n
    vsum = a[:, None] + a[None, :]
    ph = grid.phase(u)

    blocks = np.empty((n * n, n * n, 2, 2), dtype=complex)
    tail = 0.0
    # chunk over the first midpoint index to bound memory
    pgrid1 = np.broadcast_to(p1[:, None, None], (n, n, 2 * n - 1))
    pgrid2 = np.broadcast_to(p2[None, :, None], (n, n, 2 * n - 1))
    mgrid2 = np.broadcast_to(m_axis[None, None, :], (n, n, 2 * n - 1))
    blocks_view = blocks.reshape(n, n, n, n, 2, 2)
    for v1 in range(2 * n - 1):
        pts_p = np.stack([pgrid1, pgrid2], axis=-1)
        pts_x = np.stack([np.full((n, n, 2 * n - 1), m_axis[v1]), mgrid2],
                         axis=-1)
        vals = symbol(pts_p, pts_x)          # (n, n, 2n-1, 2, 2)
        ift = np.fft.ifft2(vals, axes=(0, 1))
        tail = max(tail, _spectral_tail_fraction(vals, 0),
                   _spectral_tail_fraction(vals, 2))
        pairs = [(a1, v1 - a1) for a1 in range(n) if 0 <= v1 - a1 < n]
        for a1, b1 in pairs:
            u1m = (a1 - b1) % n
            blocks_view[a1, :, b1, :] = (ph[a1, b1] * ph)[..., None, None] \
                * ift[u1m][umod, vsum]       # (n, n, 2, 2)
    return blocks, tail


def weyl_quantize(symbol: MatrixSymbol, grid: GridSpec, symmetrize: bool = True,
                  strict: bool = False, tail_tol: float = 1e-6) -> WeylOperator:
    """Quantize a matrix symbol on the grid.

    The symbol is evaluated analytically at momentum nodes and half-step
    position midpoints; resolution trouble (oscillation at the lattice
    Nyquist) raises a warning, escalated to ResolutionError when strict.
    For hermitian symbols the result is symmetrized and the pre-symmetrized
    defect recorded.
    """
    if symbol.dim != grid.dim:
        raise ContractError("symbol dimension does not match grid")
    if grid.dim == 1:
        blocks, vals = _assemble_1d(symbol, grid)
        tail = max(_spectral_tail_fraction(vals, 0),
                   _spectral_tail_fraction(vals, 1))
    else:
        blocks, tail = _assemble_2d(symbol, grid)

    if tail > tail_tol:
        msg = (f"symbol {symbol.name!r} has Nyquist-shell content "
               f"{tail:.2e} on this grid")
        if strict:
            raise ResolutionError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)

    ns = grid.n_sites
    mat = blocks.reshape(ns, ns, 2, 2).transpose(0, 2, 1, 3) \
        .reshape(2 * ns, 2 * ns)
    defect = 0.0
    if symbol.hermitian:
        scale = np.linalg.norm(mat)
        defect = float(np.linalg.norm(mat - mat.conj().T) / scale) if scale else 0.0
        if symmetrize:
            mat = 0.5 * (mat + mat.conj().T)
    return WeylOperator(matrix=mat, grid=grid, hermiticity_defect=defect,
                        name=symbol.name)


def coherent_state(grid: GridSpec, p0, x0, spin=(1.0, 0.0)) -> np.ndarray:
    """Normalized Gaussian wave packet sample vector, spin innermost."""
    p0 = np.atleast_1d(np.asarray(p0, float))
    x0 = np.atleast_1d(np.asarray(x0, float))
    if p0.size != grid.dim or x0.size != grid.dim:
        raise ContractError("packet center dimension mismatch")
    x = grid.x_axis
    per_axis = [np.exp(-(x - x0[i]) ** 2 / (2 * grid.hbar)
                       + 1j * p0[i] * (x - x0[i]) / grid.hbar)
                for i in range(grid.dim)]
    psi = per_axis[0]
    for arr in per_axis[1:]:
        psi = np.outer(psi, arr).ravel()
    spinor = np.asarray(spin, dtype=complex)
    spinor = spinor / np.linalg.norm(spinor)
    vec = np.kron(psi, spinor)
    return vec / np.linalg.norm(vec)


def probe_states(grid: GridSpec, reach: float = 0.5, per_axis: int = 3) -> np.ndarray:
    """A deterministic family of confined probes spanning the trusted region.

    Packet centers form a lattice covering ``reach`` times the grid's
    position and momentum half-widths; both spin directions are included.
    Returns a (hilbert_dim, n_probes) matrix with orthonormalized columns.
    """
    xs = np.linspace(-reach * grid.length, reach * grid.length, per_axis)
    ps = np.linspace(-reach * grid.p_max, reach * grid.p_max, per_axis)
    cols = []
    for x0 in iproduct(xs, repeat=grid.dim):
        for p0 in iproduct(ps, repeat=grid.dim):
            for spin in ((1.0, 0.0), (0.0, 1.0)):
                cols.append(coherent_state(grid, p0, x0, spin))
    q, _ = np.linalg.qr(np.array(cols).T)
    return q


def operator_probe_error(a: WeylOperator, b: WeylOperator,
                         probes: Optional[np.ndarray] = None,
                         reach: float = 0.5) -> float:
    """Relative Frobenius error of a - b through confined probe states.

    Global matrix comparisons on a periodic grid are polluted by states at
    the spectral edge where neither operator represents its symbol; probe
    comparison restricts to the trusted region, where quantization of the
    star product and the operator product agree.
    """
    if a.grid != b.grid:
        raise ContractError("operators live on different grids")
    if probes is None:
        probes = probe_states(a.grid, reach=reach)
    num = np.linalg.norm((a.matrix - b.matrix) @ probes)
    den = np.linalg.norm(b.matrix @ probes)
    return float(num / den) if den else float(num)


# ---------------------------------------------------------------------------
# finite-difference derivative engine for symbol closures
# ---------------------------------------------------------------------------

_STENCILS = {
    0: ((0, 1.0),),
    1: ((-2, 1 / 12), (-1, -8 / 12), (1, 8 / 12), (2, -1 / 12)),
    2: ((-2, -1 / 12), (-1, 16 / 12), (0, -30 / 12), (1, 16 / 12), (2, -1 / 12)),
    3: ((-2, -0.5), (-1, 1.0), (1, -1.0), (2, 0.5)),
    4: ((-2, 1.0), (-1, -4.0), (0, 6.0), (1, -4.0), (2, 1.0)),
}


def _derivative(symbol: MatrixSymbol, p_orders, x_orders, p, x, h):
    """Mixed partial d^p_orders/dp d^x_orders/dx of a symbol closure.

    Tensor-product central stencils, fourth-order accurate for first and
    second derivatives and exact on polynomials of degree <= 4.
    """
    axes = []
    for i, o in enumerate(p_orders):
        if o:
            axes.append(("p", i, o))
    for i, o in enumerate(x_orders):
        if o:
            axes.append(("x", i, o))
    if not axes:
        return symbol(p, x)
    total = np.zeros(np.broadcast_shapes(p.shape[:-1], x.shape[:-1]) + (2, 2),
                     dtype=complex)
    for combo in iproduct(*[_STENCILS[o] for _, _, o in axes]):
        weight = 1.0
        dp = np.zeros(p.shape[-1])
        dx = np.zeros(x.shape[-1])
        for (kind, idx, order), (off, w) in zip(axes, combo):
            weight *= w
            if kind == "p":
                dp[idx] += off * h
            else:
                dx[idx] += off * h
        total += weight * symbol(p + dp, x + dx)
    denom = h ** sum(o for _, _, o in axes)
    return total / denom


def _multiindices(dim, total):
    """All multi-indices over `dim` slots summing to `total`."""
    if dim == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _multiindices(dim - 1, total - first):
            yield (first,) + rest


def moyal_star(b1: MatrixSymbol, b2: MatrixSymbol, order: int,
               grid: Optional[GridSpec] = None, hbar: Optional[float] = None,
               fd_step: float = 1e-2, strict: bool = False) -> MatrixSymbol:
    """Truncated star product of two matrix symbols.

    Sums the bidifferential expansion up to the given order (at most 4):

        sum over multi-indices a, b with |a| + |b| <= order of
        (i hbar / 2)^(|a|+|b|) (-1)^|b| / (a! b!)
        (d_x^a d_p^b B1) (d_p^a d_x^b B2),

    with matrix factors kept in written order.  Derivatives are central
    differences on the closures, exact for polynomial symbols of degree
    <= 4, so for quadratic symbols the truncation at order 2 is exact.
    """
    if order < 0 or order > 4:
        raise ContractError("supported truncation orders are 0..4")
    if b1.dim != b2.dim:
        raise ContractError("symbol dimensions differ")
    if hbar is None:
        if grid is None:
            raise ContractError("need a grid or an explicit hbar")
        hbar = grid.hbar
    if grid is not None and strict:
        for sym in (b1, b2):
            vals = _eval_on_quantization_nodes_1d(sym, grid) if grid.dim == 1 \
                else None
            if vals is not None:
                tail = max(_spectral_tail_fraction(vals, 0),
                           _spectral_tail_fraction(vals, 1))
                if tail > 1e-8:
                    raise ResolutionError(
                        f"symbol {sym.name!r} leaks {tail:.2e} past the "
                        "Nyquist shell")
    dim = b1.dim

    terms = []
    for k in range(order + 1):
        for asum in range(k + 1):
            bsum = k - asum
            for a_idx in _multiindices(dim, asum):
                for b_idx in _multiindices(dim, bsum):
                    afact = math.prod(math.factorial(j) for j in a_idx)
                    bfact = math.prod(math.factorial(j) for j in b_idx)
                    coef = ((0.5j * hbar) ** k) * ((-1.0) ** bsum) \
                        / (afact * bfact)
                    terms.append((coef, a_idx, b_idx))

    def func(p, x):
        out = np.zeros(np.broadcast_shapes(p.shape[:-1], x.shape[:-1]) + (2, 2),
                       dtype=complex)
        for coef, a_idx, b_idx in terms:
            d1 = _derivative(b1, b_idx, a_idx, p, x, fd_step)
            d2 = _derivative(b2, a_idx, b_idx, p, x, fd_step)
            out += coef * np.einsum("...ij,...jk->...ik", d1, d2)
        return out

    return MatrixSymbol(dim=dim, func=func, hermitian=False,
                        name=f"({b1.name} * {b2.name})")


def matrix_poisson_bracket(a: MatrixSymbol, b: MatrixSymbol,
                           fd_step: float = 1e-2) -> MatrixSymbol:
    """{A, B} = dA/dp . dB/dx - dA/dx . dB/dp with matrix products kept
    in this order; not antisymmetric for noncommuting values."""
    if a.dim != b.dim:
        raise ContractError("symbol dimensions differ")
    dim = a.dim

    def func(p, x):
        out = np.zeros(np.broadcast_shapes(p.shape[:-1], x.shape[:-1]) + (2, 2),
                       dtype=complex)
        for j in range(dim):
            pj = tuple(1 if i == j else 0 for i in range(dim))
            zero = tuple(0 for _ in range(dim))
            da_dp = _derivative(a, pj, zero, p, x, fd_step)
            db_dx = _derivative(b, zero, pj, p, x, fd_step)
            da_dx = _derivative(a, zero, pj, p, x, fd_step)
            db_dp = _derivative(b, pj, zero, p, x, fd_step)
            out += np.einsum("...ij,...jk->...ik", da_dp, db_dx)
            out -= np.einsum("...ij,...jk->...ik", da_dx, db_dp)
        return out

    return MatrixSymbol(dim=dim, func=func, hermitian=False,
                        name=f"{{{a.name},{b.name}}}")


def egorov_symbol(model: HamiltonianModel, b0: MatrixSymbol, t: float,
                  n_steps: Optional[int] = None,
                  chunk: int = 200_000) -> MatrixSymbol:
    """The classically transported symbol d^dag (B0 o Phi^t) d.

    Evaluation integrates flow and transport jointly from each requested
    point; scalar symbols reduce to the pure pullback.  At t = 0 this is
    B0 itself.
    """
    if b0.dim != model.dim:
        raise ContractError("observable dimension does not match model")

    def func(p, x):
        shape = np.broadcast_shapes(p.shape[:-1], x.shape[:-1])
        pb = np.broadcast_to(p, shape + (model.dim,)).reshape(-1, model.dim)
        xb = np.broadcast_to(x, shape + (model.dim,)).reshape(-1, model.dim)
        pts = np.concatenate([pb, xb], axis=1)
        vals = batch.transported_symbol_values(model, b0, pts, t,
                                               n_steps=n_steps, chunk=chunk)
        return vals.reshape(shape + (2, 2))

    return MatrixSymbol(dim=model.dim, func=func,
                        hermitian=b0.hermitian, scalar=b0.scalar,
                        name=f"{b0.name}(t={t:g})")


def transport_residual(model: HamiltonianModel, b0: MatrixSymbol, t: float,
                       fd_step: float = 1e-3, probes: Optional[np.ndarray] = None,
                       n_probes: int = 16, seed: int = 0,
                       fd_time: Optional[float] = None) -> float:
    """Sup-norm residual of the leading-order transport equation.

    Checks d/dt B(t) = {H0, B(t)} + i [H1, B(t)] at probe points, with the
    time derivative by central difference of the transported symbol and
    space derivatives by the bracket engine.  Second-order consistent in
    both step sizes.
    """
    if t < 0:
        raise ContractError("residual check runs forward in time")
    fd_time = fd_time if fd_time is not None else fd_step
    if probes is None:
        rng = np.random.default_rng(seed)
        p = rng.uniform(-0.5 * model.box.p_max, 0.5 * model.box.p_max,
                        size=(n_probes, model.dim))
        x = rng.uniform(-0.5 * model.box.x_max, 0.5 * model.box.x_max,
                        size=(n_probes, model.dim))
    else:
        probes = np.asarray(probes, dtype=float)
        p, x = probes[:, :model.dim], probes[:, model.dim:]

    bt = egorov_symbol(model, b0, t)
    b_plus = egorov_symbol(model, b0, t + fd_time)
    b_minus = egorov_symbol(model, b0, max(t - fd_time, 0.0))
    if t - fd_time < 0:
        # one-sided first step keeps t >= 0; fall back to forward difference
        dt_b = (b_plus(p, x) - bt(p, x)) / fd_time
    else:
        dt_b = (b_plus(p, x) - b_minus(p, x)) / (2 * fd_time)

    h0_sym = scalar_symbol(lambda pp, xx: model.hamiltonian(pp, xx), model.dim,
                           name="H0")
    bracket = matrix_poisson_bracket(h0_sym, bt, fd_step=fd_step)(p, x)

    residual = dt_b - bracket
    if model.coupling is not None and not b0.scalar:
        h1_vals = model.h1(p, x)
        bt_vals = bt(p, x)
        comm = np.einsum("...ij,...jk->...ik", h1_vals, bt_vals) \
            - np.einsum("...ij,...jk->...ik", bt_vals, h1_vals)
        residual = residual - 1j * comm
    return float(np.max(np.linalg.norm(residual, axis=(-2, -1))))

"""Discretized Pauli operators, spectral windows and eigenstate statistics.

The quantum side of the laboratory: assemble H = H0s Id + hbar H1 on a
grid, solve the window [E - hbar w, E + hbar w] by dense eigendecomposition,
and compute the window averages and the variance of eigenstate expectation
values around the classical target (1/2) tr mu_E(B0).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from paulilab import skew_product
from paulilab.errors import ContractError
from paulilab.phase_flow import HamiltonianModel
from paulilab.symbols import MatrixSymbol
from paulilab.weyl_moyal import (GridSpec, WeylOperator, egorov_symbol,
                                 spin_operator, weyl_quantize)


@dataclass(frozen=True)
class SpectralWindow:
    """Energy interval [E - hbar omega, E + hbar omega]."""

    energy: float
    omega: float
    hbar: float

    def __post_init__(self):
        if self.omega <= 0 or self.hbar <= 0:
            raise ContractError("window needs positive omega and hbar")

    @property
    def lo(self) -> float:
        return self.energy - self.hbar * self.omega

    @property
    def hi(self) -> float:
        return self.energy + self.hbar * self.omega

    def check_inside_band(self, model: HamiltonianModel):
        if self.hbar * self.omega > model.epsilon + 1e-12:
            raise ContractError(
                "window exceeds the model's admissible energy band")


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs inside a spectral window; vectors are columns."""

    energies: np.ndarray
    vectors: np.ndarray
    window: SpectralWindow
    grid: GridSpec

    @property
    def count(self) -> int:
        return len(self.energies)

    def orthonormality_defect(self) -> float:
        if self.count == 0:
            return 0.0
        g = self.vectors.conj().T @ self.vectors
        return float(np.max(np.abs(g - np.eye(self.count))))

    def residual(self, op: WeylOperator) -> float:
        if self.count == 0:
            return 0.0
        r = op.matrix @ self.vectors - self.vectors * self.energies
        return float(np.max(np.linalg.norm(r, axis=0)))

    def expectations(self, op: WeylOperator) -> np.ndarray:
        """<psi_k, Op psi_k> for every window state (real for hermitian Op)."""
        if op.grid != self.grid:
            raise ContractError("operator grid does not match eigensystem")
        vals = np.einsum("ik,ij,jk->k", self.vectors.conj(), op.matrix,
                         self.vectors)
        return vals.real


def build_pauli_operator(model: HamiltonianModel, grid: GridSpec,
                         strict: bool = False) -> WeylOperator:
    """Quantize H0s Id + hbar H1; hermitian after symmetrization."""
    if model.dim != grid.dim:
        raise ContractError("model dimension does not match grid")
    if model.coupling is not None:
        model.check_spin_coupling()
    sym = model.full_symbol(grid.hbar)
    op = weyl_quantize(sym, grid, strict=strict)
    return WeylOperator(matrix=op.matrix, grid=grid,
                        hermiticity_defect=op.hermiticity_defect,
                        name=f"H[{model.name}]")


def default_resolver(model: HamiltonianModel, grid: GridSpec) \
        -> Optional[WeylOperator]:
    """Observable used to fix eigenbases inside degenerate clusters.

    Spin-decoupled models pair every level; the deterministic choice is
    the sigma_3 eigenbasis per level.  For couplings of the form
    C * sigma_j the commuting spin component sigma_j is the natural
    resolver, giving the joint eigenbasis.
    """
    if model.coupling is None:
        return spin_operator(grid, 3)
    if model.coupling.abelian_axis is not None:
        return spin_operator(grid, model.coupling.abelian_axis)
    return None


def solve_window(op: WeylOperator, window: SpectralWindow,
                 resolver: Optional[WeylOperator] = None,
                 cluster_tol: Optional[float] = None) -> EigenSystem:
    """All eigenpairs with energy inside the window.

    Degenerate clusters (gap below ``cluster_tol``) are re-diagonalized in
    the resolver observable when one is supplied, which fixes the
    otherwise arbitrary basis; an empty window yields count 0.
    """
    w, v = np.linalg.eigh(op.matrix)
    mask = (w >= window.lo) & (w <= window.hi)
    ww = w[mask]
    vv = v[:, mask]
    if resolver is not None and len(ww) > 1:
        scale = max(1.0, float(np.max(np.abs(w))))
        tol = cluster_tol if cluster_tol is not None else 1e-9 * scale
        vv = vv.copy()
        start = 0
        for i in range(1, len(ww) + 1):
            if i == len(ww) or ww[i] - ww[i - 1] > tol:
                if i - start > 1:
                    sub = vv[:, start:i]
                    s = sub.conj().T @ resolver.matrix @ sub
                    s = 0.5 * (s + s.conj().T)
                    _, u = np.linalg.eigh(s)
                    vv[:, start:i] = sub @ u
                start = i
    return EigenSystem(energies=ww, vectors=vv, window=window, grid=op.grid)


def weyl_count(model: HamiltonianModel, window: SpectralWindow,
               n_samples: int = 10_000_000, width: Optional[float] = None,
               seed: int = 1234) -> float:
    """Leading-order count (2 omega / pi) vol(Omega_E) / (2 pi hbar)^(d-1).

    The shell volume comes from Monte Carlo thickened-shell sampling; the
    spin factor n = 2 is built in.
    """
    vol, _ = skew_product.shell_volume(model, n_samples=n_samples,
                                       width=width, seed=seed)
    return float(2 * window.omega / np.pi * vol
                 / (2 * np.pi * window.hbar) ** (model.dim - 1))


def szego_average(eig: EigenSystem, op: WeylOperator, target: float):
    """Window mean of eigenstate expectations and its distance to target."""
    if eig.count == 0:
        raise ContractError("empty spectral window")
    avg = float(np.mean(eig.expectations(op)))
    return avg, abs(avg - target)


def s2_variance(eig: EigenSystem, op: WeylOperator, target: float) -> float:
    """Mean squared deviation of expectations from the classical target."""
    if eig.count == 0:
        raise ContractError("empty spectral window")
    vals = eig.expectations(op)
    return float(np.mean(np.abs(vals - target) ** 2))


# ---------------------------------------------------------------------------
# time evolution
# ---------------------------------------------------------------------------

def _eigendecompose(op: WeylOperator):
    w, v = np.linalg.eigh(op.matrix)
    return w, v


def heisenberg_evolve(h_op: WeylOperator, b_op: WeylOperator, t: float,
                      decomposition=None) -> WeylOperator:
    """U(t)^dag B U(t) with U = exp(-i H t / hbar), via full eigensolve."""
    if h_op.grid != b_op.grid:
        raise ContractError("operators live on different grids")
    if t == 0.0:
        return b_op
    w, v = decomposition if decomposition is not None else _eigendecompose(h_op)
    phases = np.exp(-1j * w * t / h_op.grid.hbar)
    # U^dag B U = V conj(D) V^dag B V D V^dag with D diagonal of phases
    core = (v.conj().T @ b_op.matrix @ v) * phases[None, :]
    core *= phases.conj()[:, None]
    mat = v @ core @ v.conj().T
    return WeylOperator(matrix=mat, grid=b_op.grid,
                        hermiticity_defect=b_op.hermiticity_defect,
                        name=f"{b_op.name}(t={t:g})")


def time_averaged_operator(h_op: WeylOperator, b_op: WeylOperator, t_final: float,
                           shift: float = 0.0, decomposition=None) -> WeylOperator:
    """(1/T) integral of the Heisenberg evolution minus a scalar shift.

    In the eigenbasis of H the average multiplies the matrix element at
    energy gap Delta by (exp(i Delta T / hbar) - 1)/(i Delta T / hbar),
    so no quadrature in t is needed.  With ``shift`` equal to the classical
    target this is the self-adjoint auxiliary operator whose squared window
    expectations bound the eigenstate variance.
    """
    if h_op.grid != b_op.grid:
        raise ContractError("operators live on different grids")
    if t_final <= 0:
        raise ContractError("averaging time must be positive")
    w, v = decomposition if decomposition is not None else _eigendecompose(h_op)
    gaps = (w[:, None] - w[None, :]) * (t_final / h_op.grid.hbar)
    with np.errstate(invalid="ignore", divide="ignore"):
        kernel = np.where(np.abs(gaps) < 1e-12, 1.0,
                          (np.exp(1j * gaps) - 1.0) / (1j * gaps))
    core = (v.conj().T @ b_op.matrix @ v) * kernel
    mat = v @ core @ v.conj().T
    if shift:
        mat = mat - shift * np.eye(mat.shape[0])
    return WeylOperator(matrix=mat, grid=b_op.grid, hermiticity_defect=0.0,
                        name=f"avg[{b_op.name};T={t_final:g}]")


# ---------------------------------------------------------------------------
# semiclassical comparison of the two evolutions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EgorovCurve:
    hbars: tuple
    errors: tuple
    slope: float


def _window_projected_norm(delta: np.ndarray, vectors: np.ndarray) -> float:
    core = vectors.conj().T @ delta @ vectors
    core = 0.5 * (core + core.conj().T)
    return float(np.max(np.abs(np.linalg.eigvalsh(core))))


def egorov_check(model: HamiltonianModel, b0: MatrixSymbol,
                 grid_for: Callable[[float], GridSpec], t: float,
                 hbars: Sequence[float], energy_cut: Optional[float] = None,
                 t_max: float = 2.0, n_steps: Optional[int] = None,
                 tail_tol: float = 1e-3) -> EgorovCurve:
    """Error curve e(hbar) between quantum evolution and transported symbol.

    e = || P (U^dag B U - Op(d^dag (B0 o Phi^t) d)) P || / || B ||, with P
    the spectral projector of H below ``energy_cut`` (default: the top of
    the model's admissible band).  The projector removes lattice-edge
    states whose dynamics has no classical counterpart; the log-log slope
    of the curve estimates the semiclassical convergence order.
    """
    if abs(t) > t_max:
        raise ContractError(f"|t| exceeds the trusted window {t_max}")
    cut = energy_cut if energy_cut is not None \
        else model.energy_E + model.epsilon
    errors = []
    for hbar in hbars:
        grid = grid_for(hbar)
        if grid.hbar != hbar:
            raise ContractError("grid factory returned inconsistent hbar")
        h_op = build_pauli_operator(model, grid)
        w, v = _eigendecompose(h_op)
        b_op = weyl_quantize(b0, grid)
        b_t = heisenberg_evolve(h_op, b_op, t, decomposition=(w, v))
        sym_t = egorov_symbol(model, b0, t, n_steps=n_steps)
        # transported symbols tolerate mild Nyquist content: the aliasing
        # floor sits far below the semiclassical error being measured
        e_op = weyl_quantize(sym_t, grid, tail_tol=tail_tol)
        keep = v[:, w <= cut]
        num = _window_projected_norm(b_t.matrix - e_op.matrix, keep)
        den = b_op.spectral_norm()
        errors.append(num / den)
    hb = np.asarray(hbars, dtype=float)
    err = np.asarray(errors)
    slope = float(np.polyfit(np.log(hb), np.log(np.maximum(err, 1e-300)), 1)[0])
    return EgorovCurve(hbars=tuple(hbars), errors=tuple(errors), slope=slope)


# ---------------------------------------------------------------------------
# variance trend studies and the commuting-coupling counterexample
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class S2Point:
    hbar: float
    count: int
    s2: float
    s2_bound_timeavg: Optional[float] = None


def s2_curve(model: HamiltonianModel, b0: MatrixSymbol,
             grid_for: Callable[[float], GridSpec], hbars: Sequence[float],
             omega: float, target: float, use_resolver: bool = True,
             timeavg_t: Optional[float] = None) -> list[S2Point]:
    """S2(E, hbar) across an hbar ladder at fixed observable and window.

    With ``timeavg_t`` set, also reports the window mean of <psi, B_T^2 psi>
    for the time-averaged auxiliary operator B_T, an upper bound for S2
    that converges to the classical variance bound as T grows.
    """
    points = []
    for hbar in hbars:
        grid = grid_for(hbar)
        h_op = build_pauli_operator(model, grid)
        window = SpectralWindow(energy=model.energy_E, omega=omega, hbar=hbar)
        window.check_inside_band(model)
        resolver = default_resolver(model, grid) if use_resolver else None
        w, v = _eigendecompose(h_op)
        mask = (w >= window.lo) & (w <= window.hi)
        eig = EigenSystem(energies=w[mask], vectors=v[:, mask],
                          window=window, grid=grid)
        if resolver is not None:
            eig = solve_window(h_op, window, resolver=resolver)
        b_op = weyl_quantize(b0, grid)
        s2 = s2_variance(eig, b_op, target)
        bound = None
        if timeavg_t is not None:
            b_t = time_averaged_operator(h_op, b_op, timeavg_t, shift=target,
                                         decomposition=(w, v))
            sq = b_t.matrix @ b_t.matrix
            bound = float(np.mean(np.einsum(
                "ik,ij,jk->k", eig.vectors.conj(), sq, eig.vectors).real)) \
                if eig.count else 0.0
        points.append(S2Point(hbar=hbar, count=eig.count, s2=s2,
                              s2_bound_timeavg=bound))
    return points


@dataclass(frozen=True)
class CounterexampleReport:
    """End-to-end structure of the commuting-coupling obstruction.

    For H1 = C sigma_j the spin component commutes with the Hamiltonian,
    eigenvectors split into two half-density families of sigma_j
    eigenvectors, the expectation variance of sigma_j stays at 1, and the
    classical Birkhoff averages keep an order-one, g-dependent deviation:
    the extension explores only a circle inside SU(2), so extended-flow
    ergodicity fails even over an ergodic base flow.
    """

    axis: int
    commutator_rel: float
    hbars: tuple
    counts: tuple
    family_sizes: tuple          # (n_plus, n_minus) per hbar
    spin_purity_min: float       # min |<sigma_j>| over all window states
    s2_values: tuple
    classical: skew_product.ErgodicityReport


def counterexample_report(model: HamiltonianModel,
                          grid_for: Callable[[float], GridSpec],
                          hbars: Sequence[float], omega: float = 1.0,
                          sampler: Optional[skew_product.ShellSampler] = None,
                          schedule: Sequence[float] = (100.0, 300.0, 1000.0),
                          ensemble: skew_product.EnsembleSpec =
                          skew_product.EnsembleSpec()) -> CounterexampleReport:
    """Verify the commuting-coupling structure across an hbar ladder."""
    if model.coupling is None or model.coupling.abelian_axis is None:
        raise ContractError("counterexample needs a coupling C * sigma_j")
    axis = model.coupling.abelian_axis

    comm_rel = 0.0
    counts = []
    families = []
    purities = []
    s2s = []
    for hbar in hbars:
        grid = grid_for(hbar)
        h_op = build_pauli_operator(model, grid)
        s_op = spin_operator(grid, axis)
        comm = s_op.matrix @ h_op.matrix - h_op.matrix @ s_op.matrix
        comm_rel = max(comm_rel,
                       float(np.linalg.norm(comm) / np.linalg.norm(h_op.matrix)))
        window = SpectralWindow(energy=model.energy_E, omega=omega, hbar=hbar)
        eig = solve_window(h_op, window, resolver=s_op)
        if eig.count == 0:
            raise ContractError(f"empty window at hbar={hbar}")
        spins = eig.expectations(s_op)
        counts.append(eig.count)
        families.append((int(np.sum(spins > 0)), int(np.sum(spins < 0))))
        purities.append(float(np.min(np.abs(spins))))
        b_op = weyl_quantize(_sigma_symbol(axis, model.dim), grid)
        s2s.append(s2_variance(eig, b_op, target=0.0))

    if sampler is None:
        sampler = skew_product.default_sampler(model)
    classical = skew_product.ergodicity_report(
        model, _sigma_symbol(axis, model.dim), sampler, schedule,
        ensemble=ensemble)
    return CounterexampleReport(
        axis=axis, commutator_rel=comm_rel, hbars=tuple(hbars),
        counts=tuple(counts), family_sizes=tuple(families),
        spin_purity_min=float(min(purities)), s2_values=tuple(s2s),
        classical=classical)


def _sigma_symbol(axis: int, dim: int) -> MatrixSymbol:
    from paulilab.pauli import SIGMA
    from paulilab.symbols import constant_symbol
    return constant_symbol(SIGMA[axis - 1], dim, name=f"sigma{axis}")

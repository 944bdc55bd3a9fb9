"""Hamiltonian models and the classical flow on R^d x R^d.

Models carry an analytic principal part H0s with its gradient, an optional
traceless hermitian spin coupling, a reference energy with an admissible
band, and a bounding box used by shell samplers.  The flow is integrated
with an adaptive high-order explicit scheme with dense output; a fixed-step
symplectic scheme for long ergodic runs lives in :mod:`paulilab.batch`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import solve_ivp

from paulilab.errors import ContractError, DivergenceError, EvaluationError
from paulilab.symbols import MatrixSymbol, SpinCoupling, _as_points


@dataclass(frozen=True)
class PhasePoint:
    """A point (p, x) of the translational phase space."""

    p: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        p = np.atleast_1d(np.asarray(self.p, dtype=float))
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "x", x)
        if p.ndim != 1 or x.ndim != 1 or p.shape != x.shape or p.size < 1:
            raise ContractError("p and x must be 1-d arrays of equal length >= 1")
        if not (np.all(np.isfinite(p)) and np.all(np.isfinite(x))):
            raise ContractError("phase point has non-finite components")

    @property
    def dim(self):
        return self.p.size

    def as_state(self):
        """Flat state vector [p, x] used by the integrators."""
        return np.concatenate([self.p, self.x])

    @staticmethod
    def from_state(state):
        state = np.asarray(state, dtype=float)
        d = state.size // 2
        return PhasePoint(state[:d], state[d:])


@dataclass(frozen=True)
class ToleranceSpec:
    rtol: float = 1e-10
    atol: float = 1e-12
    max_step: float = np.inf

    def __post_init__(self):
        if self.rtol <= 0 or self.atol <= 0:
            raise ContractError("tolerances must be positive")


@dataclass(frozen=True)
class BoundingBox:
    """Axis-aligned box |p_i| <= p_max[i], |x_i| <= x_max[i]."""

    p_max: np.ndarray
    x_max: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p_max", np.atleast_1d(np.asarray(self.p_max, float)))
        object.__setattr__(self, "x_max", np.atleast_1d(np.asarray(self.x_max, float)))
        if np.any(self.p_max <= 0) or np.any(self.x_max <= 0):
            raise ContractError("bounding box half-widths must be positive")

    @property
    def volume(self):
        return float(np.prod(2 * self.p_max) * np.prod(2 * self.x_max))

    def contains(self, p, x, margin=0.0):
        return (np.all(np.abs(p) <= self.p_max * (1 - margin), axis=-1)
                & np.all(np.abs(x) <= self.x_max * (1 - margin), axis=-1))


@dataclass(frozen=True)
class HamiltonianModel:
    """Scalar principal symbol plus optional matrix subprincipal coupling.

    ``h0s`` and ``grad_h0s`` are vectorized closures: h0s(p, x) -> (...,),
    grad_h0s(p, x) -> ((..., d), (..., d)) giving (dH/dp, dH/dx).  The
    spin coupling defines H1 = c(p, x) . sigma; ``None`` means H1 = 0.
    ``potential``/``grad_potential`` are set for separable models
    H = |p|^2/2 + V(x) and enable the symplectic long-run integrator.
    """

    name: str
    dim: int
    h0s: Callable
    grad_h0s: Callable
    energy_E: float
    epsilon: float
    box: BoundingBox
    coupling: Optional[SpinCoupling] = None
    potential: Optional[Callable] = None
    grad_potential: Optional[Callable] = None
    shell_parametrization: Optional[Callable] = None

    def __post_init__(self):
        if self.epsilon <= 0:
            raise ContractError("admissible band half-width must be positive")
        if self.coupling is not None and self.coupling.dim != self.dim:
            raise ContractError("coupling dimension does not match model")

    # -- principal symbol ------------------------------------------------

    def hamiltonian(self, p, x):
        p, x = _as_points(p, x, self.dim)
        return np.asarray(self.h0s(p, x), dtype=float)

    def gradient(self, p, x):
        p, x = _as_points(p, x, self.dim)
        dp, dx = self.grad_h0s(p, x)
        return np.asarray(dp, dtype=float), np.asarray(dx, dtype=float)

    @property
    def h1(self) -> Optional[MatrixSymbol]:
        if self.coupling is None:
            return None
        return self.coupling.as_symbol()

    @property
    def separable(self):
        return self.potential is not None and self.grad_potential is not None

    def full_symbol(self, hbar):
        """H0s * Id + hbar * H1 as a single matrix symbol."""
        coupling = self.coupling

        def func(p, x):
            h0 = np.asarray(self.h0s(p, x))
            out = h0[..., None, None] * np.eye(2, dtype=complex)
            if coupling is not None:
                from paulilab.pauli import pauli_vector
                out = out + hbar * pauli_vector(coupling.coefficients(p, x))
            return out

        return MatrixSymbol(dim=self.dim, func=func, hermitian=True,
                            name=f"{self.name} symbol")

    # -- admissibility checks -------------------------------------------

    def validate_conditions(self, n_probes=4096, seed=0, grad_floor=1e-6,
                            ellipticity_floor=1e-3, box_margin=0.02):
        """Check the standing assumptions on H0s over a probe grid.

        Returns a :class:`ConditionReport`; violations are reported, not
        silently accepted.  The checks are necessarily empirical: they
        sample the declared bounding box.
        """
        rng = np.random.default_rng(seed)
        p = rng.uniform(-self.box.p_max, self.box.p_max, size=(n_probes, self.dim))
        x = rng.uniform(-self.box.x_max, self.box.x_max, size=(n_probes, self.dim))
        h = self.hamiltonian(p, x)

        bounded_below = bool(np.all(np.isfinite(h)))
        lower_bound = float(np.min(h))

        band = np.abs(h - self.energy_E) <= self.epsilon
        inside = self.box.contains(p[band], x[band], margin=box_margin)
        shell_compact = bool(np.all(inside)) if band.any() else False

        if band.any():
            dp, dx = self.gradient(p[band], x[band])
            grad_norm = np.sqrt(np.sum(dp**2, axis=-1) + np.sum(dx**2, axis=-1))
            min_grad = float(np.min(grad_norm))
        else:
            min_grad = np.nan
        no_critical_value = band.any() and min_grad > grad_floor

        weight = 1.0 + np.sum(p**2, axis=-1) + np.sum(x**2, axis=-1)
        ell = np.abs(h + 1j) / weight
        ellipticity_const = float(np.min(ell))
        elliptic = ellipticity_const > ellipticity_floor

        return ConditionReport(
            bounded_below=bounded_below, lower_bound=lower_bound,
            shell_compact=shell_compact, shell_nonempty=bool(band.any()),
            no_critical_value=bool(no_critical_value), min_shell_gradient=min_grad,
            elliptic=bool(elliptic), ellipticity_const=ellipticity_const)

    def check_spin_coupling(self, n_probes=64, seed=0, tol=1e-12):
        """Hermiticity and tracelessness of H1 on random probes."""
        if self.coupling is None:
            return
        rng = np.random.default_rng(seed)
        p = rng.uniform(-self.box.p_max, self.box.p_max, size=(n_probes, self.dim))
        x = rng.uniform(-self.box.x_max, self.box.x_max, size=(n_probes, self.dim))
        vals = self.h1(p, x)
        herm = np.max(np.abs(vals - np.conj(np.swapaxes(vals, -1, -2))))
        trace = np.max(np.abs(np.trace(vals, axis1=-2, axis2=-1)))
        if herm > tol:
            raise ContractError(f"H1 hermiticity defect {herm:.2e} exceeds {tol}")
        if trace > tol:
            raise ContractError(
                f"H1 has trace up to {trace:.2e}; spin-1/2 couplings must be traceless")


@dataclass(frozen=True)
class ConditionReport:
    bounded_below: bool
    lower_bound: float
    shell_compact: bool
    shell_nonempty: bool
    no_critical_value: bool
    min_shell_gradient: float
    elliptic: bool
    ellipticity_const: float

    @property
    def ok(self):
        return (self.bounded_below and self.shell_compact and self.shell_nonempty
                and self.no_critical_value and self.elliptic)

    def violations(self):
        out = []
        if not self.bounded_below:
            out.append("H0s not bounded below on probes")
        if not self.shell_nonempty:
            out.append("energy band not reached inside the bounding box")
        if not self.shell_compact:
            out.append("energy band touches the bounding box")
        if not self.no_critical_value:
            out.append(f"gradient nearly vanishes on the band "
                       f"(min {self.min_shell_gradient:.2e})")
        if not self.elliptic:
            out.append(f"ellipticity constant too small "
                       f"({self.ellipticity_const:.2e})")
        return out


@dataclass(frozen=True)
class Trajectory:
    """Samples of the flow t -> Phi^t(z0) with dense interpolation."""

    model: HamiltonianModel
    times: np.ndarray
    points: np.ndarray          # shape (n, 2d): rows [p, x]
    energies: np.ndarray
    energy_drift: float
    tolerance: ToleranceSpec
    dense: Optional[Callable] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1 or len(t) != len(self.points):
            raise ContractError("times and points must align")
        if len(t) > 1 and not np.all(np.diff(t) > 0) and not np.all(np.diff(t) < 0):
            raise ContractError("times must be strictly monotone")

    @property
    def dim(self):
        return self.points.shape[1] // 2

    def point(self, i) -> PhasePoint:
        return PhasePoint.from_state(self.points[i])

    @property
    def final(self) -> PhasePoint:
        return self.point(-1)

    def at(self, t):
        """Dense evaluation of the state [p, x] at intermediate times."""
        if self.dense is None:
            raise ContractError("trajectory carries no dense interpolant")
        return np.asarray(self.dense(t))


def vector_field(model: HamiltonianModel, z: PhasePoint):
    """Hamiltonian vector field (dp/dt, dx/dt) = (-dH/dx, dH/dp) at z."""
    if z.dim != model.dim:
        raise ContractError("point dimension does not match model")
    dp, dx = model.gradient(z.p[None, :], z.x[None, :])
    if not (np.all(np.isfinite(dp)) and np.all(np.isfinite(dx))):
        raise EvaluationError("non-finite gradient", point=z)
    return -dx[0], dp[0]


def _flow_rhs(model):
    d = model.dim

    def rhs(t, state):
        p = state[:d][None, :]
        x = state[d:][None, :]
        dhdp, dhdx = model.gradient(p, x)
        return np.concatenate([-dhdx[0], dhdp[0]])

    return rhs


def integrate_flow(model: HamiltonianModel, z0: PhasePoint, t_final: float,
                   tolerance: ToleranceSpec | None = None,
                   samples_per_unit_time: float = 64.0,
                   min_samples: int = 33) -> Trajectory:
    """Integrate Hamilton's equations from z0 up to t_final.

    Negative ``t_final`` integrates the flow backward.  The trajectory is
    sampled densely enough for downstream quadrature and carries the
    integrator's dense interpolant.
    """
    if not np.isfinite(t_final):
        raise ContractError("t_final must be finite")
    if z0.dim != model.dim:
        raise ContractError("initial point dimension does not match model")
    tol = tolerance or ToleranceSpec()

    state0 = z0.as_state()
    if t_final == 0.0:
        e0 = float(model.hamiltonian(z0.p[None], z0.x[None])[0])
        return Trajectory(model=model, times=np.zeros(1), points=state0[None, :],
                          energies=np.array([e0]), energy_drift=0.0,
                          tolerance=tol, dense=lambda t: np.broadcast_to(
                              state0[:, None], (state0.size, np.size(t))).squeeze())

    n = max(min_samples, int(np.ceil(abs(t_final) * samples_per_unit_time)) + 1)
    t_eval = np.linspace(0.0, t_final, n)
    sol = solve_ivp(_flow_rhs(model), (0.0, t_final), state0, method="DOP853",
                    rtol=tol.rtol, atol=tol.atol, max_step=tol.max_step,
                    t_eval=t_eval, dense_output=True)
    if not sol.success:
        raise DivergenceError(f"flow integration failed: {sol.message}")

    pts = sol.y.T
    d = model.dim
    energies = model.hamiltonian(pts[:, :d], pts[:, d:])
    drift = float(np.max(np.abs(energies - energies[0])))
    return Trajectory(model=model, times=sol.t, points=pts, energies=energies,
                      energy_drift=drift, tolerance=tol, dense=sol.sol)


# ---------------------------------------------------------------------------
# model catalog
# ---------------------------------------------------------------------------

def harmonic_model(dim=1, energy=1.0, epsilon=0.5, coupling=None,
                   box_pad=1.6) -> HamiltonianModel:
    """Isotropic oscillator H = (|p|^2 + |x|^2) / 2.

    The d = 1 shell is a circle of radius sqrt(2E); it carries an exact
    angle parametrization used by quadrature oracles.
    """
    r = float(np.sqrt(2 * (energy + epsilon)))

    def h0s(p, x):
        return 0.5 * (np.sum(p**2, axis=-1) + np.sum(x**2, axis=-1))

    def grad(p, x):
        return p.copy(), x.copy()

    shell_param = None
    if dim == 1:
        radius = np.sqrt(2 * energy)

        def shell_param(theta):
            # uniform Liouville measure in the angle
            p = radius * np.sin(theta)
            x = radius * np.cos(theta)
            return np.stack([p, x], axis=-1)

    return HamiltonianModel(
        name=f"harmonic{dim}d", dim=dim, h0s=h0s, grad_h0s=grad,
        energy_E=energy, epsilon=epsilon,
        box=BoundingBox(np.full(dim, box_pad * r), np.full(dim, box_pad * r)),
        coupling=coupling,
        potential=lambda x: 0.5 * np.sum(x**2, axis=-1),
        grad_potential=lambda x: x.copy(),
        shell_parametrization=shell_param)


def quartic_model_2d(beta=0.01, energy=1.0, epsilon=0.3,
                     coupling=None, box_pad=1.3) -> HamiltonianModel:
    """Homogeneous quartic H = |p|^2/2 + x1^2 x2^2 / 2 + beta (x1^4 + x2^4)/4.

    Strongly chaotic for small beta; the channels along the axes reach
    |x_i| = (4 E / beta)^(1/4), which sets the bounding box.
    """
    if beta <= 0:
        raise ContractError("beta must be positive to close the channels")
    x_reach = (4 * (energy + epsilon) / beta) ** 0.25
    p_reach = np.sqrt(2 * (energy + epsilon))

    def potential(x):
        x1, x2 = x[..., 0], x[..., 1]
        return 0.5 * x1**2 * x2**2 + 0.25 * beta * (x1**4 + x2**4)

    def h0s(p, x):
        return 0.5 * np.sum(p**2, axis=-1) + potential(x)

    def grad_potential(x):
        x1, x2 = x[..., 0], x[..., 1]
        g = np.empty_like(x)
        g[..., 0] = x1 * x2**2 + beta * x1**3
        g[..., 1] = x1**2 * x2 + beta * x2**3
        return g

    def grad(p, x):
        return p.copy(), grad_potential(x)

    return HamiltonianModel(
        name=f"quartic2d(beta={beta:g})", dim=2, h0s=h0s, grad_h0s=grad,
        energy_E=energy, epsilon=epsilon,
        box=BoundingBox(np.full(2, box_pad * p_reach), np.full(2, box_pad * x_reach)),
        coupling=coupling,
        potential=potential, grad_potential=grad_potential)


def coupled_quartic_model_2d(alpha=8.0, energy=0.45, epsilon=0.2,
                             coupling=None, box_pad=1.6) -> HamiltonianModel:
    """Confined chaotic oscillator H = |p|^2/2 + |x|^2/2 + alpha x1^2 x2^2.

    The harmonic confinement keeps the shell inside a compact box of
    half-width ~ sqrt(2E) while the quartic coupling drives chaos once
    alpha * E is of order one.  This is the demonstration base for the
    ergodic-extension scenario; ergodicity on the chosen shell is an
    empirical assumption, not a theorem.
    """
    r = np.sqrt(2 * (energy + epsilon))

    def potential(x):
        x1, x2 = x[..., 0], x[..., 1]
        return 0.5 * (x1**2 + x2**2) + alpha * x1**2 * x2**2

    def h0s(p, x):
        return 0.5 * np.sum(p**2, axis=-1) + potential(x)

    def grad_potential(x):
        x1, x2 = x[..., 0], x[..., 1]
        g = np.empty_like(x)
        g[..., 0] = x1 + 2 * alpha * x1 * x2**2
        g[..., 1] = x2 + 2 * alpha * x2 * x1**2
        return g

    def grad(p, x):
        return p.copy(), grad_potential(x)

    return HamiltonianModel(
        name=f"coupled-quartic2d(alpha={alpha:g})", dim=2, h0s=h0s, grad_h0s=grad,
        energy_E=energy, epsilon=epsilon,
        box=BoundingBox(np.full(2, box_pad * r), np.full(2, box_pad * r)),
        coupling=coupling,
        potential=potential, grad_potential=grad_potential)

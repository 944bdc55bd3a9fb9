"""SU(2) spin transport along classical trajectories.

The transport matrix d(p, x, t) solves

    d'(t) + i H1(Phi^t(p, x)) d(t) = 0,   d(0) = Id,

with H1 = c . sigma traceless hermitian, so d stays in SU(2).  In the unit
quaternion representation the equation is the Hamilton product

    q'(t) = (0, c(Phi^t)) (x) q(t),

which preserves |q| exactly; the integrator renormalizes per output sample
to push round-off back onto the unit sphere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, solve_ivp

from paulilab.errors import ContractError, DivergenceError
from paulilab.pauli import (IDENTITY_QUAT, quat_conj, quat_mul,
                            quat_normalize, quat_to_matrix)
from paulilab.phase_flow import HamiltonianModel, Trajectory, ToleranceSpec


@dataclass(frozen=True)
class SU2Element:
    """Unit quaternion q representing q0 Id - i (q . sigma)."""

    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        if q.shape != (4,):
            raise ContractError("quaternion must have shape (4,)")
        n = np.linalg.norm(q)
        if not np.isfinite(n) or abs(n - 1.0) > 1e-9:
            raise ContractError(f"quaternion norm {n} is not 1")
        object.__setattr__(self, "q", q / n)

    @staticmethod
    def identity() -> "SU2Element":
        return SU2Element(IDENTITY_QUAT.copy())

    def as_matrix(self):
        return quat_to_matrix(self.q)

    def inverse(self) -> "SU2Element":
        return SU2Element(quat_conj(self.q))

    def __matmul__(self, other: "SU2Element") -> "SU2Element":
        return SU2Element(quat_normalize(quat_mul(self.q, other.q)))

    def distance(self, other: "SU2Element") -> float:
        """Frobenius distance between the represented matrices."""
        return float(np.linalg.norm(self.as_matrix() - other.as_matrix()))


@dataclass(frozen=True)
class TransportPath:
    """Transport matrices sampled along a trajectory's times."""

    times: np.ndarray
    quats: np.ndarray           # shape (n, 4), unit rows

    def __post_init__(self):
        if len(self.times) != len(self.quats):
            raise ContractError("times and elements must align")
        if np.linalg.norm(self.quats[0] - IDENTITY_QUAT) > 1e-9:
            raise ContractError("transport must start at the identity")

    def element(self, i) -> SU2Element:
        return SU2Element(self.quats[i])

    @property
    def final(self) -> SU2Element:
        return self.element(-1)

    def matrices(self):
        return quat_to_matrix(self.quats)

    def unitarity_defect(self):
        m = self.matrices()
        gram = np.einsum("nji,njk->nik", m.conj(), m)
        return float(np.max(np.abs(gram - np.eye(2))))


def _require_coupling(model: HamiltonianModel):
    if model.coupling is None:
        return None
    model.check_spin_coupling()
    return model.coupling


def _check_ownership(model, traj: Trajectory):
    if traj.model is not model:
        raise ContractError("trajectory was produced by a different model")


def integrate_spin_transport(model: HamiltonianModel, traj: Trajectory,
                             mode: str = "joint") -> TransportPath:
    """Solve the transport equation along ``traj`` and sample at its times.

    ``mode='joint'`` re-integrates base flow and quaternion as one combined
    state (the default; avoids interpolation-induced generator error).
    ``mode='replay'`` drives the quaternion with the trajectory's dense
    interpolant instead.
    """
    _check_ownership(model, traj)
    coupling = _require_coupling(model)
    times = traj.times
    if coupling is None:
        quats = np.tile(IDENTITY_QUAT, (len(times), 1))
        return TransportPath(times=times, quats=quats)

    d = model.dim
    tol = traj.tolerance

    if mode == "joint":
        def rhs(t, state):
            p = state[:d][None, :]
            x = state[d:2 * d][None, :]
            q = state[2 * d:]
            dhdp, dhdx = model.gradient(p, x)
            c = coupling.coefficients(p, x)[0]
            dq = quat_mul(np.concatenate([[0.0], c]), q)
            return np.concatenate([-dhdx[0], dhdp[0], dq])

        state0 = np.concatenate([traj.points[0], IDENTITY_QUAT])
    elif mode == "replay":
        if traj.dense is None:
            raise ContractError("replay mode needs a dense trajectory")

        def rhs(t, q):
            z = traj.at(t)
            c = coupling.coefficients(z[:d][None, :], z[d:][None, :])[0]
            return quat_mul(np.concatenate([[0.0], c]), q)

        state0 = IDENTITY_QUAT.copy()
    else:
        raise ContractError(f"unknown transport mode {mode!r}")

    span = (times[0], times[-1])
    if span[0] == span[-1]:
        return TransportPath(times=times, quats=IDENTITY_QUAT[None, :].copy())
    sol = solve_ivp(rhs, span, state0, method="DOP853", rtol=tol.rtol,
                    atol=tol.atol, t_eval=times)
    if not sol.success:
        raise DivergenceError(f"spin transport failed: {sol.message}")
    quats = sol.y[-4:, :].T if mode == "joint" else sol.y.T
    return TransportPath(times=times, quats=quat_normalize(quats))


def abelian_closed_form(model: HamiltonianModel, traj: Trajectory,
                        refine: int = 8) -> TransportPath:
    """Closed-form transport for couplings C(p, x) * sigma_j.

    d(t) = cos(alpha) Id - i sin(alpha) sigma_j with the accumulated phase
    alpha(t) = integral of C along the trajectory, evaluated by Simpson
    quadrature on a refinement of the dense samples.
    """
    _check_ownership(model, traj)
    coupling = model.coupling
    if coupling is None or coupling.abelian_axis is None:
        raise ContractError("model coupling is not of the form C * sigma_j")
    axis = coupling.abelian_axis
    times = traj.times
    if len(times) == 1:
        return TransportPath(times=times, quats=IDENTITY_QUAT[None, :].copy())

    if traj.dense is not None and refine > 1:
        fine = np.linspace(times[0], times[-1], refine * (len(times) - 1) + 1)
        states = traj.at(fine).T
    else:
        fine = times
        states = traj.points
    d = model.dim
    c_vals = coupling.scalar_func(states[:, :d], states[:, d:])
    alpha_fine = np.concatenate(
        [[0.0], cumulative_simpson(c_vals, x=fine)])
    alpha = np.interp(times, fine, alpha_fine)

    quats = np.zeros((len(times), 4))
    quats[:, 0] = np.cos(alpha)
    quats[:, axis] = np.sin(alpha)
    return TransportPath(times=times, quats=quats)


def compose_transport(d_first: SU2Element, d_second: SU2Element) -> SU2Element:
    """Cocycle composition: transport over the second leg after the first.

    Equals d(z, t+s) when d_first = d(z, t) and d_second = d(Phi^t z, s).
    """
    return d_second @ d_first

"""The extended flow on (energy shell) x SU(2) and its invariant measures.

The product phase space pairs shell points with group elements; the flow
moves the base by the Hamiltonian flow and left-multiplies the group part
by the spin transport matrix,

    Y^t((p, x), g) = (Phi^t(p, x), d(p, x, t) g).

Liouville measure is realized by uniform sampling of the thin shell
|H0s - E| < eps_s inside the declared bounding box, Haar measure on SU(2)
by normalized 4-dimensional Gaussians.  Ergodicity of the extension is
diagnosed through Birkhoff averages of spin-conjugated observables; it is
never certified.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from paulilab import batch
from paulilab.errors import ContractError, SamplerError
from paulilab.pauli import ID2, SIGMA, quat_to_matrix, so3_adjoint
from paulilab.phase_flow import (BoundingBox, HamiltonianModel, PhasePoint,
                                 ToleranceSpec, integrate_flow)
from paulilab.spin_transport import SU2Element, integrate_spin_transport
from paulilab.symbols import MatrixSymbol


@dataclass(frozen=True)
class ExtendedPoint:
    """A pair ((p, x), g) with the base on the model's energy shell."""

    base: PhasePoint
    g: SU2Element

    @staticmethod
    def on_shell(model: HamiltonianModel, base: PhasePoint, g: SU2Element,
                 shell_tol: float) -> "ExtendedPoint":
        h = float(model.hamiltonian(base.p[None], base.x[None])[0])
        if abs(h - model.energy_E) > shell_tol:
            raise ContractError(
                f"base point is off shell: |H - E| = {abs(h - model.energy_E):.3e}"
                f" > {shell_tol:.3e}")
        return ExtendedPoint(base=base, g=g)


def evolve_extended(model: HamiltonianModel, pt: ExtendedPoint, t: float,
                    tolerance: ToleranceSpec | None = None) -> ExtendedPoint:
    """Y^t(pt): transported base and left-multiplied group element."""
    if t == 0.0:
        return pt
    traj = integrate_flow(model, pt.base, t, tolerance=tolerance)
    path = integrate_spin_transport(model, traj)
    return ExtendedPoint(base=traj.final, g=path.final @ pt.g)


# ---------------------------------------------------------------------------
# samplers
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ShellSampler:
    """Uniform rejection sampler of the thin shell |H0s - E| < width.

    As the width shrinks the law converges weakly to the normalized
    Liouville measure on the shell (coarea).  Deterministic under a fixed
    seed; the acceptance floor guards against misconfigured boxes.
    """

    energy: float
    width: float
    box: BoundingBox
    seed: int
    batch_size: int = 100_000
    max_batches: int = 400
    acceptance_floor: float = 1e-7

    def __post_init__(self):
        if self.width <= 0:
            raise ContractError("shell width must be positive")


def default_sampler(model: HamiltonianModel, seed: int = 0,
                    width: Optional[float] = None) -> ShellSampler:
    width = width if width is not None else 1e-3 * max(abs(model.energy_E), 1.0)
    return ShellSampler(energy=model.energy_E, width=width, box=model.box,
                        seed=seed)


def sample_liouville_array(model: HamiltonianModel, sampler: ShellSampler,
                           n: int) -> np.ndarray:
    """n shell points as an array of shape (n, 2d), rows [p, x].

    Batch sizes grow with the observed acceptance rate so thin shells stay
    cheap; the draw is a fixed function of the seed regardless of n.
    """
    rng = np.random.default_rng(sampler.seed)
    d = model.dim
    out = np.empty((n, 2 * d))
    got = 0
    accepted = 0
    proposed = 0
    batch_size = sampler.batch_size
    for _ in range(sampler.max_batches):
        p = rng.uniform(-sampler.box.p_max, sampler.box.p_max,
                        size=(batch_size, d))
        x = rng.uniform(-sampler.box.x_max, sampler.box.x_max,
                        size=(batch_size, d))
        h = model.hamiltonian(p, x)
        keep = np.abs(h - sampler.energy) < sampler.width
        k = int(np.count_nonzero(keep))
        accepted += k
        proposed += batch_size
        take = min(k, n - got)
        out[got:got + take, :d] = p[keep][:take]
        out[got:got + take, d:] = x[keep][:take]
        got += take
        if got == n:
            return out
        rate = accepted / proposed
        if proposed >= 10 * sampler.batch_size and rate < sampler.acceptance_floor:
            break
        if rate > 0:
            # grow batches so the remainder lands within a few more rounds
            batch_size = int(min(4_000_000, max(sampler.batch_size,
                                                1.5 * (n - got) / rate)))
    raise SamplerError(
        f"shell acceptance rate {accepted / max(proposed, 1):.2e} too low; "
        "check the bounding box and shell width")


def sample_liouville(model: HamiltonianModel, sampler: ShellSampler,
                     n: int) -> list[PhasePoint]:
    pts = sample_liouville_array(model, sampler, n)
    d = model.dim
    return [PhasePoint(row[:d], row[d:]) for row in pts]


def sample_haar_array(n: int, seed: int) -> np.ndarray:
    """n Haar-uniform unit quaternions, shape (n, 4)."""
    if n < 1:
        raise ContractError("need at least one sample")
    rng = np.random.default_rng(seed)
    q = rng.standard_normal((n, 4))
    return q / np.linalg.norm(q, axis=1, keepdims=True)


def sample_haar(n: int, seed: int) -> list[SU2Element]:
    return [SU2Element(q) for q in sample_haar_array(n, seed)]


def shell_volume(model: HamiltonianModel, n_samples: int = 4_000_000,
                 width: Optional[float] = None, seed: int = 1234,
                 chunk: int = 1_000_000):
    """Monte Carlo estimate of vol(Omega_E) = d/dE vol{H0s <= E}.

    Thickened-shell estimator: vol{|H - E| < width} / (2 width).  Returns
    (value, standard_error).
    """
    width = width if width is not None else 1e-2 * max(abs(model.energy_E), 1.0)
    rng = np.random.default_rng(seed)
    d = model.dim
    hits = 0
    for lo in range(0, n_samples, chunk):
        m = min(chunk, n_samples - lo)
        p = rng.uniform(-model.box.p_max, model.box.p_max, size=(m, d))
        x = rng.uniform(-model.box.x_max, model.box.x_max, size=(m, d))
        h = model.hamiltonian(p, x)
        hits += int(np.count_nonzero(np.abs(h - model.energy_E) < width))
    frac = hits / n_samples
    vol_box = model.box.volume
    value = frac * vol_box / (2 * width)
    stderr = np.sqrt(frac * (1 - frac) / n_samples) * vol_box / (2 * width)
    return value, stderr


# ---------------------------------------------------------------------------
# measure-theoretic averages
# ---------------------------------------------------------------------------

def haar_adjoint_average(a: np.ndarray) -> np.ndarray:
    """The Haar integral of h^dag a h over SU(2): (tr a / 2) Id.

    The traceless part transforms under the covering map onto SO(3), whose
    Haar average of rotation matrices vanishes by left invariance.
    """
    a = np.asarray(a, dtype=complex)
    if a.shape != (2, 2) or np.max(np.abs(a - a.conj().T)) > 1e-10:
        raise ContractError("input must be a hermitian 2x2 matrix")
    return 0.5 * np.trace(a).real * ID2


def haar_adjoint_average_mc(a: np.ndarray, n: int, seed: int) -> np.ndarray:
    """Monte Carlo counterpart of :func:`haar_adjoint_average`."""
    q = sample_haar_array(n, seed)
    u = quat_to_matrix(q)
    return np.einsum("nji,jk,nkl->il", u.conj(), np.asarray(a, complex), u) / n


@dataclass(frozen=True)
class LiouvilleAverage:
    mean: np.ndarray
    stderr: np.ndarray
    n: int

    @property
    def half_trace(self) -> float:
        return float(0.5 * np.trace(self.mean).real)


def liouville_average(model: HamiltonianModel, b0: MatrixSymbol,
                      sampler: ShellSampler, n: int) -> LiouvilleAverage:
    """Monte Carlo shell average of a matrix observable with its error."""
    pts = sample_liouville_array(model, sampler, n)
    d = model.dim
    vals = b0(pts[:, :d], pts[:, d:])
    mean = vals.mean(axis=0)
    stderr = vals.std(axis=0) / np.sqrt(n)
    return LiouvilleAverage(mean=mean, stderr=stderr, n=n)


def shell_average_quadrature(model: HamiltonianModel, f, n_nodes: int = 8192):
    """Deterministic shell average for models with a parametrized shell.

    ``f(p, x)`` is a scalar vectorized function; the harmonic d = 1 model
    exposes its uniform angle parametrization, for which the trapezoid rule
    on the circle converges spectrally.
    """
    if model.shell_parametrization is None:
        raise ContractError(f"model {model.name!r} has no shell parametrization")
    theta = np.linspace(0.0, 2 * np.pi, n_nodes, endpoint=False)
    z = model.shell_parametrization(theta)
    d = model.dim
    return float(np.mean(f(z[..., :d], z[..., d:])))


def shell_average_matrix(model: HamiltonianModel, b0: MatrixSymbol,
                         n_nodes: int = 8192) -> np.ndarray:
    """Matrix-valued counterpart of :func:`shell_average_quadrature`."""
    if model.shell_parametrization is None:
        raise ContractError(f"model {model.name!r} has no shell parametrization")
    theta = np.linspace(0.0, 2 * np.pi, n_nodes, endpoint=False)
    z = model.shell_parametrization(theta)
    d = model.dim
    return b0(z[..., :d], z[..., d:]).mean(axis=0)


def birkhoff_average(model: HamiltonianModel, b0: MatrixSymbol,
                     start: ExtendedPoint, t_final: float,
                     dt: float) -> np.ndarray:
    """Time average (1/T) int g(t)^dag B0(Phi^t z) g(t) dt, g(t) = d(z,t) g0.

    Quadrature runs on the jointly integrated flow + transport; dt must
    resolve the fastest spin precession (dt * |c| << 1).
    """
    if t_final <= 0 or dt <= 0:
        raise ContractError("need positive averaging time and step")
    n_steps = max(4, int(np.ceil(t_final / dt)))
    avg, _ = batch.time_averaged_conjugation(
        model, b0, start.base.as_state()[None, :], t_final, n_steps=n_steps)
    u = start.g.as_matrix()
    if b0.scalar:
        return avg[0]
    return u.conj().T @ avg[0] @ u


# ---------------------------------------------------------------------------
# ergodicity diagnostics
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class EnsembleSpec:
    """Product ensemble: n_base shell points x n_group Haar elements."""

    n_base: int = 16
    n_group: int = 4
    seed_haar: int = 7


@dataclass(frozen=True)
class ErgodicityStats:
    """Ensemble statistics at one averaging time.

    The deviation is the Frobenius distance of each member's Birkhoff
    average from the Haar-adjoint target; since that norm is unitarily
    invariant, dependence on the initial group element is quantified
    separately as the spread of the averaged matrices across g at a fixed
    base point (zero iff the average commutes with every sampled g).
    """

    t_final: float
    mean_deviation: float
    max_deviation: float
    mean_group_spread: float


@dataclass(frozen=True)
class ErgodicityReport:
    """Deviation of Birkhoff averages from the Haar-adjoint target.

    ``deviations[t][i, j]`` is the Frobenius distance for base i, group
    element j; the group spread quantifies dependence on the initial g at
    a fixed base point.  Trends are diagnostic only.
    """

    observable: str
    target: np.ndarray
    schedule: tuple
    deviations: dict
    stats: list

    def stat_for(self, t_final: float) -> ErgodicityStats:
        for s in self.stats:
            if s.t_final == t_final:
                return s
        raise KeyError(t_final)


def ergodicity_report(model: HamiltonianModel, b0: MatrixSymbol,
                      sampler: ShellSampler, schedule: Sequence[float],
                      ensemble: EnsembleSpec = EnsembleSpec(),
                      steps_per_unit_time: float = 100.0,
                      target: Optional[np.ndarray] = None,
                      target_samples: int = 200_000) -> ErgodicityReport:
    """Distribution of Birkhoff deviations over a product ensemble.

    The target is haar_adjoint_average(mu_E(B0)); the shell average is
    estimated by quadrature when the model provides a parametrized shell
    and by Monte Carlo otherwise (constant symbols are averaged exactly).
    """
    schedule = sorted(float(t) for t in schedule)
    t_max = schedule[-1]
    bases = sample_liouville_array(model, sampler, ensemble.n_base)
    gq = sample_haar_array(ensemble.n_group, ensemble.seed_haar)
    gmats = quat_to_matrix(gq)

    if target is None:
        if model.shell_parametrization is not None:
            mu = shell_average_matrix(model, b0)
        else:
            mu = liouville_average(model, b0, sampler, target_samples).mean
        mu = 0.5 * (mu + mu.conj().T)
        target = haar_adjoint_average(mu)

    n_steps = max(16, int(np.ceil(t_max * steps_per_unit_time)))
    averages, partials = batch.time_averaged_conjugation(
        model, b0, bases, t_max, n_steps=n_steps,
        checkpoints=[t for t in schedule if t < t_max], method="auto")
    partials[t_max] = averages

    deviations = {}
    stats = []
    for t in schedule:
        a_mats = partials[t]  # (n_base, 2, 2)
        if b0.scalar:
            conj = np.broadcast_to(a_mats[:, None, :, :],
                                   (len(bases), len(gq), 2, 2))
        else:
            conj = np.einsum("gji,njk,gkl->ngil", gmats.conj(), a_mats, gmats)
        dev = np.linalg.norm(conj - target, axis=(-2, -1))
        center = conj.mean(axis=1, keepdims=True)
        spread = np.linalg.norm(conj - center, axis=(-2, -1)).mean(axis=1)
        deviations[t] = dev
        stats.append(ErgodicityStats(
            t_final=t, mean_deviation=float(dev.mean()),
            max_deviation=float(dev.max()),
            mean_group_spread=float(spread.mean())))
    return ErgodicityReport(observable=b0.name, target=target,
                            schedule=tuple(schedule), deviations=deviations,
                            stats=stats)

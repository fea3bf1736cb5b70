"""Density-matrix kernels on a truncated harmonic-oscillator number basis.

Three right-hand sides are provided for d(rho)/dt:

  * `rhs_caldeira_leggett` -- the high-temperature Markovian kernel, whose
    stationary state differs from the canonical Gibbs operator at low T;
  * `rhs_nonlinear` -- the entropy-consistent kernel carrying the Boltzmann
    logarithm k_B T ln(rho), whose exact fixed point is the Gibbs state;
  * `rhs_linearized` -- the linearization of the nonlinear kernel around the
    Gibbs state, sharing its fixed point and reducing to the
    Caldeira-Leggett kernel at high temperature.

All kernels have a commutator with the position operator outermost, so they
are exactly traceless, and all preserve Hermiticity.  Positivity is
monitored during evolution but never enforced: its loss is a physical
finding about a kernel, not a numerical artifact to paper over.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np

from .core import PhysParams, hermitian_eigendecompose, rk4_step
from .errors import InstabilityError

__all__ = [
    "DensityMatrix",
    "OperatorSet",
    "MasterEquation",
    "build_oscillator_operators",
    "gibbs_state",
    "displaced_thermal_state",
    "rhs_caldeira_leggett",
    "matrix_log_density",
    "rhs_nonlinear",
    "rhs_linearized",
    "evolve",
    "OperatorTrajectory",
    "von_neumann_entropy",
    "trace_distance",
    "friction_scale",
]


class MasterEquation(Enum):
    CALDEIRA_LEGGETT = "caldeira-leggett"
    NONLINEAR = "nonlinear"
    LINEARIZED = "linearized"


@dataclass
class DensityMatrix:
    """Complex matrix on the truncated number basis, expected Hermitian with
    unit trace; eigenvalue positivity is monitored, not enforced."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)
        if self.matrix.ndim != 2 or self.matrix.shape[0] != self.matrix.shape[1]:
            raise ValueError(f"density matrix must be square, got {self.matrix.shape}")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def validate(self, hermiticity_tol: float = 1e-10, trace_tol: float = 1e-10):
        scale = max(np.linalg.norm(self.matrix), 1e-300)
        dev = np.linalg.norm(self.matrix - self.matrix.conj().T)
        if dev > hermiticity_tol * scale:
            raise ValueError(f"density matrix not Hermitian: deviation {dev:.3e}")
        tr = self.matrix.trace()
        if abs(tr - 1.0) > trace_tol:
            raise ValueError(f"density matrix trace {tr} differs from 1")
        return self

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.conj().T)).min())


@dataclass(frozen=True)
class OperatorSet:
    """Hamiltonian, position and lowering operators of the truncated
    oscillator basis, plus the physical parameters they were built with."""

    hamiltonian: np.ndarray
    position: np.ndarray
    lowering: np.ndarray
    params: PhysParams

    @property
    def n(self) -> int:
        return self.hamiltonian.shape[0]

    @property
    def momentum(self) -> np.ndarray:
        p = self.params
        return 1j * math.sqrt(p.hbar * p.m * p.omega0 / 2.0) * (
            self.lowering.conj().T - self.lowering
        )

    @cached_property
    def velocity(self) -> np.ndarray:
        """[x, H] / (i hbar), reused by every dissipative kernel."""
        return _comm(self.position, self.hamiltonian) / (1j * self.params.hbar)


def build_oscillator_operators(N: int, params: PhysParams) -> OperatorSet:
    """Standard number-basis construction: a[n-1, n] = sqrt(n),
    H = hbar w0 (a^dag a + 1/2), x = sqrt(hbar / 2 m w0) (a + a^dag)."""
    if N < 2:
        raise ValueError(f"need basis size N >= 2, got {N}")
    if params.omega0 <= 0:
        raise ValueError("number-basis operators require omega0 > 0")
    a = np.diag(np.sqrt(np.arange(1, N, dtype=float)), k=1).astype(complex)
    number = a.conj().T @ a
    H = params.hbar * params.omega0 * (number + 0.5 * np.eye(N))
    x = math.sqrt(params.hbar / (2.0 * params.m * params.omega0)) * (a + a.conj().T)
    return OperatorSet(hamiltonian=H, position=x, lowering=a, params=params)


def _comm(A, B):
    return A @ B - B @ A


def _anti_half(A, B):
    return 0.5 * (A @ B + B @ A)


def gibbs_state(beta: float, ops: OperatorSet) -> DensityMatrix:
    """Canonical Gibbs state exp(-beta H)/Z on the truncated basis."""
    if beta <= 0:
        raise ValueError(f"need beta > 0, got {beta}")
    if beta * ops.params.hbar * ops.params.omega0 > 700:
        raise OverflowError(
            f"beta*hbar*omega0 = {beta * ops.params.hbar * ops.params.omega0:.3g} "
            "exceeds the exp() range"
        )
    w, V = hermitian_eigendecompose(ops.hamiltonian)
    p = np.exp(-beta * (w - w.min()))
    p /= p.sum()
    rho = (V * p) @ V.conj().T
    return DensityMatrix(rho)


def displaced_thermal_state(beta: float, alpha: complex, ops: OperatorSet) -> DensityMatrix:
    """Thermal state displaced in phase space: D(alpha) rho_th D(alpha)^dag.

    Full rank, so it is an admissible initial state for the nonlinear kernel.
    The displacement unitary is built through the Hermitian generator
    K = -i (alpha a^dag - alpha* a) and the eigendecomposition route.
    """
    rho_th = gibbs_state(beta, ops).matrix
    a = ops.lowering
    gen = alpha * a.conj().T - np.conj(alpha) * a
    w, V = hermitian_eigendecompose(-1j * gen)
    D = (V * np.exp(1j * w)) @ V.conj().T
    rho = D @ rho_th @ D.conj().T
    rho = 0.5 * (rho + rho.conj().T)
    rho /= rho.trace().real
    return DensityMatrix(rho)


def rhs_caldeira_leggett(rho: DensityMatrix, ops: OperatorSet) -> np.ndarray:
    """High-temperature kernel:
    [H,rho]/i hbar + b [x, {rho, [x,H]/i hbar}/2 + k_B T [x,rho]/i hbar] / i hbar.
    """
    _check_dims(rho, ops)
    return _rhs_caldeira_leggett_raw(rho.matrix, ops)


def _rhs_caldeira_leggett_raw(r: np.ndarray, ops: OperatorSet) -> np.ndarray:
    p = ops.params
    ih = 1j * p.hbar
    x = ops.position
    inner = _anti_half(r, ops.velocity) + p.k_B * p.T * _comm(x, r) / ih
    return _comm(ops.hamiltonian, r) / ih + p.b * _comm(x, inner) / ih


def matrix_log_density(rho: DensityMatrix, floor: float = 1e-14) -> np.ndarray:
    """Hermitian logarithm of a density matrix with a relative spectral floor.

    Eigenvalues below floor * lambda_max are clamped up to that floor before
    taking the log; the nonlinear kernel is singular on rank-deficient states
    and the floor keeps nearly-pure states usable.
    """
    if floor <= 0:
        raise ValueError(f"need floor > 0, got {floor}")
    hermitian_eigendecompose(rho.matrix, tol=1e-10)  # contract check only
    return _matrix_log_raw(rho.matrix, floor)


def _matrix_log_raw(r: np.ndarray, floor: float) -> np.ndarray:
    w, V = np.linalg.eigh(0.5 * (r + r.conj().T))
    lam_max = w[-1]
    if lam_max <= 0:
        raise ValueError("degenerate state: no eigenvalue above zero")
    logm = (V * np.log(np.maximum(w, floor * lam_max))) @ V.conj().T
    return 0.5 * (logm + logm.conj().T)


def rhs_nonlinear(rho: DensityMatrix, ops: OperatorSet) -> np.ndarray:
    """Entropy-consistent kernel:
    [H,rho]/i hbar + b [x, {rho, [x, H + k_B T ln rho]/i hbar}/2] / i hbar.

    The Gibbs state is an exact fixed point: H + k_B T ln(rho_eq) is a
    multiple of the identity, which commutes with x.  At T = 0 the logarithm
    term vanishes with its k_B T prefactor, leaving pure friction.
    """
    _check_dims(rho, ops)
    return _rhs_nonlinear_raw(rho.matrix, ops)


def _rhs_nonlinear_raw(r: np.ndarray, ops: OperatorSet, floor: float = 1e-14) -> np.ndarray:
    p = ops.params
    ih = 1j * p.hbar
    x = ops.position
    drift = ops.velocity
    if p.T > 0:
        drift = drift + (p.k_B * p.T / ih) * _comm(x, _matrix_log_raw(r, floor))
    inner = _anti_half(r, drift)
    return _comm(ops.hamiltonian, r) / ih + p.b * _comm(x, inner) / ih


def _thermal_exponentials(ops: OperatorSet, beta: float):
    """exp(+-beta H) with a shifted spectrum; the shifts cancel exactly
    between the two factors inside the linearized kernel."""
    w, V = hermitian_eigendecompose(ops.hamiltonian)
    if beta * (w.max() - w.min()) > 700:
        raise OverflowError(
            f"beta*(E_max - E_min) = {beta * (w.max() - w.min()):.3g} "
            "exceeds the exp() range"
        )
    shift = 0.5 * (w.max() + w.min())
    e_plus = (V * np.exp(beta * (w - shift))) @ V.conj().T
    e_minus = (V * np.exp(-beta * (w - shift))) @ V.conj().T
    return e_plus, e_minus


def rhs_linearized(rho: DensityMatrix, ops: OperatorSet, beta: float) -> np.ndarray:
    """Linearization of the nonlinear kernel around the Gibbs state:
    [H,rho]/i hbar
      + b k_B T [x, {e^{-beta H}, [x, {e^{beta H}, rho}/2]/i hbar}/2] / i hbar.
    """
    _check_dims(rho, ops)
    if beta <= 0:
        raise ValueError(f"need beta > 0, got {beta}")
    e_plus, e_minus = _thermal_exponentials(ops, beta)
    return _rhs_linearized_raw(rho.matrix, ops, beta, e_plus, e_minus)


def _rhs_linearized_raw(r, ops, beta, e_plus, e_minus) -> np.ndarray:
    p = ops.params
    ih = 1j * p.hbar
    x = ops.position
    inner = _anti_half(e_minus, _comm(x, _anti_half(e_plus, r)) / ih)
    return _comm(ops.hamiltonian, r) / ih + (p.b / beta) * _comm(x, inner) / ih


def friction_scale(rho: DensityMatrix, ops: OperatorSet, block: int | None = None) -> float:
    """Frobenius norm of the friction half of the Caldeira-Leggett dissipator
    at the given state, used to normalize fixed-point residuals."""
    p = ops.params
    ih = 1j * p.hbar
    term = p.b * _comm(ops.position, _anti_half(rho.matrix, ops.velocity)) / ih
    if block is not None:
        term = term[:block, :block]
    return float(np.linalg.norm(term))


def _check_dims(rho: DensityMatrix, ops: OperatorSet):
    if rho.n != ops.n:
        raise ValueError(f"dimension mismatch: rho is {rho.n}, operators are {ops.n}")


def von_neumann_entropy(rho: DensityMatrix, floor: float = 1e-14) -> float:
    """-sum(lambda ln lambda) over eigenvalues above `floor`; in units of k_B."""
    w = np.linalg.eigvalsh(0.5 * (rho.matrix + rho.matrix.conj().T))
    w = w[w > floor]
    return max(float(-(w * np.log(w)).sum()), 0.0)


def trace_distance(rho1: DensityMatrix, rho2: DensityMatrix) -> float:
    """(1/2) sum |eigenvalues(rho1 - rho2)|, in [0, 1] for density matrices."""
    if rho1.n != rho2.n:
        raise ValueError(f"dimension mismatch: {rho1.n} vs {rho2.n}")
    diff = rho1.matrix - rho2.matrix
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return 0.5 * float(np.abs(w).sum())


@dataclass
class OperatorTrajectory:
    """Sampled diagnostics of a density-matrix evolution."""

    t: np.ndarray
    trace: np.ndarray
    min_eigenvalue: np.ndarray
    energy: np.ndarray
    entropy: np.ndarray
    trace_distance_to_gibbs: np.ndarray
    terminal: DensityMatrix

    def to_csv(self, path):
        from .output import write_csv

        write_csv(
            path,
            ["t", "trace", "min_eigenvalue", "energy", "entropy", "trace_distance_to_gibbs"],
            [self.t, self.trace, self.min_eigenvalue, self.energy, self.entropy,
             self.trace_distance_to_gibbs],
        )


def evolve(
    rho0: DensityMatrix,
    kernel: MasterEquation,
    ops: OperatorSet,
    t_end: float,
    dt: float,
    beta: float | None = None,
    stride: int = 10,
) -> OperatorTrajectory:
    """Fixed-step RK4 evolution of the chosen kernel with monitored state
    validity.  Raises InstabilityError naming the failing step if the trace
    drifts beyond 1e-6 or an eigenvalue falls below -1e-6."""
    rho0.validate()
    p = ops.params
    if dt <= 0 or t_end < 0:
        raise ValueError(f"need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}")
    if dt * (p.b / p.m + p.omega0) >= 0.1:
        raise ValueError(
            f"dt={dt} too large for stability: need dt*(b/m + omega0) < 0.1"
        )
    if beta is None and p.T > 0:
        beta = p.beta
    if kernel is MasterEquation.LINEARIZED and beta is None:
        raise ValueError("linearized kernel requires a temperature (beta)")

    if kernel is MasterEquation.CALDEIRA_LEGGETT:
        def rhs(t, r):
            return _rhs_caldeira_leggett_raw(r, ops)
    elif kernel is MasterEquation.NONLINEAR:
        def rhs(t, r):
            return _rhs_nonlinear_raw(r, ops)
    elif kernel is MasterEquation.LINEARIZED:
        # note: explicit stepping of this kernel is only practical when
        # beta * hbar * omega0 * N is moderate; its stiffness grows like
        # exp(beta * (E_max - E_min))
        e_plus, e_minus = _thermal_exponentials(ops, beta)

        def rhs(t, r):
            return _rhs_linearized_raw(r, ops, beta, e_plus, e_minus)
    else:
        raise ValueError(f"unknown kernel {kernel!r}")

    gibbs_ref = gibbs_state(beta, ops) if beta is not None else None

    n_steps = int(round(t_end / dt)) if t_end > 0 else 0
    r = rho0.matrix.copy()
    times, traces, mins, energies, entropies, dists = [], [], [], [], [], []

    def sample(step):
        dm = DensityMatrix(r)
        w = np.linalg.eigvalsh(0.5 * (r + r.conj().T))
        times.append(step * dt)
        traces.append(float(r.trace().real))
        mins.append(float(w.min()))
        energies.append(float((ops.hamiltonian @ r).trace().real))
        wpos = w[w > 1e-14]
        entropies.append(max(float(-(wpos * np.log(wpos)).sum()), 0.0))
        dists.append(trace_distance(dm, gibbs_ref) if gibbs_ref is not None else math.nan)
        return w

    sample(0)
    for step in range(1, n_steps + 1):
        r = rk4_step(rhs, (step - 1) * dt, r, dt)
        if step % stride == 0 or step == n_steps:
            w = sample(step)
            drift = abs(traces[-1] - 1.0)
            if drift > 1e-6:
                raise InstabilityError(
                    f"trace drift {drift:.3e} exceeds 1e-6 at step {step} "
                    f"(t={step * dt:.6g})"
                )
            if w.min() < -1e-6:
                raise InstabilityError(
                    f"eigenvalue {w.min():.3e} below -1e-6 at step {step} "
                    f"(t={step * dt:.6g})"
                )

    return OperatorTrajectory(
        t=np.array(times),
        trace=np.array(traces),
        min_eigenvalue=np.array(mins),
        energy=np.array(energies),
        entropy=np.array(entropies),
        trace_distance_to_gibbs=np.array(dists),
        terminal=DensityMatrix(r),
    )

"""Closed-form relaxation coefficients and Gaussian moment-closure ODEs.

The three harmonic-oscillator relaxation models share one linear
Fokker-Planck structure and differ only in their (friction, momentum
diffusion) pair:

    EFFECTIVE_TEMPERATURE   gamma = b/m,  D_p = b * (hbar w0/2) coth(s)
    QUANTUM_FRICTION        gamma = B/m,  D_p = b k_B T cosh(s)
    MAXWELL_HEISENBERG      gamma = b/m,  D_p = b (k_B T + hbar^2 / 4 m var_x)

with s = beta hbar w0 / 2 and the emergent friction B = b sinh(s)/s.
The moment equations below are the exact first/second-moment equations of
those flows; they are validated against the grid solvers rather than
trusted (Gaussian data stays Gaussian under these flows).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import PhysParams, rk4_step
from .errors import InstabilityError

__all__ = [
    "MomentState",
    "RelaxationModel",
    "effective_friction",
    "momentum_diffusion",
    "mean_energy_quantum",
    "mean_energy_maxwell_heisenberg",
    "model_coefficients",
    "rhs_moment_closure",
    "evolve_moments",
    "MomentTrajectory",
    "gibbs_helmholtz_residual",
    "quantum_fixed_point",
    "maxwell_heisenberg_fixed_point",
]

# below this value of s the hyperbolic ratios are evaluated by series to
# avoid 0/0 and cancellation in classical-limit scans
_SERIES_S = 1e-4


class RelaxationModel(Enum):
    """Relaxation kernels for the harmonic-oscillator phase-space models."""

    CLASSICAL = "classical"
    EFFECTIVE_TEMPERATURE = "effective-temperature"
    QUANTUM_FRICTION = "quantum-friction"
    MAXWELL_HEISENBERG = "maxwell-heisenberg"


@dataclass(frozen=True)
class MomentState:
    """First and second moments of a Gaussian phase-space state."""

    mean_x: float
    mean_p: float
    var_x: float
    var_p: float
    cov_xp: float = 0.0

    def validate(self):
        if self.var_x <= 0 or self.var_p <= 0:
            raise ValueError(
                f"variances must be positive: var_x={self.var_x}, var_p={self.var_p}"
            )
        if self.covariance_det <= 0:
            raise ValueError(
                f"covariance must be positive definite: det={self.covariance_det}"
            )
        return self

    @property
    def covariance_det(self) -> float:
        return self.var_x * self.var_p - self.cov_xp**2

    def to_array(self) -> np.ndarray:
        return np.array([self.mean_x, self.mean_p, self.var_x, self.var_p, self.cov_xp])

    @classmethod
    def from_array(cls, y) -> "MomentState":
        return cls(*(float(v) for v in y))


def _s_of(beta: float, params: PhysParams) -> float:
    if beta <= 0:
        raise ValueError(f"need beta > 0, got {beta}")
    return beta * params.hbar * params.omega0 / 2.0


def effective_friction(beta: float, params: PhysParams) -> float:
    """Emergent friction coefficient b sinh(s)/s; reduces to b classically
    and diverges monotonically as T -> 0."""
    s = _s_of(beta, params)
    if s < _SERIES_S:
        ratio = 1.0 + s * s / 6.0 + s**4 / 120.0
    else:
        ratio = math.sinh(s) / s
    return params.b * ratio


def momentum_diffusion(beta: float, params: PhysParams) -> float:
    """Momentum diffusion coefficient b k_B T cosh(s).

    Obeys the quantum fluctuation-dissipation relation
    D_p = B (hbar w0 / 2) coth(s) together with `effective_friction`.
    """
    s = _s_of(beta, params)
    return params.b * math.cosh(s) / beta


def mean_energy_quantum(beta: float, params: PhysParams) -> float:
    """Equilibrium mean energy (hbar w0 / 2) coth(s) of the quantum oscillator."""
    s = _s_of(beta, params)
    if s < _SERIES_S:
        # (1/beta) * s*coth(s) expanded about s = 0
        return (1.0 + s * s / 3.0 - s**4 / 45.0) / beta
    return s / math.tanh(s) / beta


def mean_energy_maxwell_heisenberg(beta: float, params: PhysParams) -> float:
    """Mean energy (k_B T / 2)[sqrt(1 + (beta hbar w0)^2) + 1] of the
    self-consistent Maxwell-Heisenberg closure.

    Slightly above `mean_energy_quantum` everywhere; the two coincide in the
    zero- and infinite-temperature limits.
    """
    if beta <= 0:
        raise ValueError(f"need beta > 0, got {beta}")
    x = beta * params.hbar * params.omega0
    return (math.sqrt(1.0 + x * x) + 1.0) / (2.0 * beta)


def model_coefficients(
    model: RelaxationModel,
    beta: float,
    params: PhysParams,
    var_x: float | None = None,
):
    """(gamma, D_p) pair for a relaxation model.

    `beta` may be numpy.inf for the T = 0 limit of the models that stay
    finite there (CLASSICAL, EFFECTIVE_TEMPERATURE, MAXWELL_HEISENBERG).
    MAXWELL_HEISENBERG requires the current position variance `var_x`.
    """
    if beta <= 0:
        raise ValueError(f"need beta > 0, got {beta}")
    k_T = 0.0 if math.isinf(beta) else 1.0 / beta
    if model is RelaxationModel.CLASSICAL:
        return params.b / params.m, params.b * k_T
    if model is RelaxationModel.EFFECTIVE_TEMPERATURE:
        if math.isinf(beta):
            eps = params.hbar * params.omega0 / 2.0
        else:
            eps = mean_energy_quantum(beta, params)
        return params.b / params.m, params.b * eps
    if model is RelaxationModel.QUANTUM_FRICTION:
        if math.isinf(beta):
            raise ValueError("quantum friction coefficients diverge at T = 0")
        return effective_friction(beta, params) / params.m, momentum_diffusion(beta, params)
    if model is RelaxationModel.MAXWELL_HEISENBERG:
        if var_x is None:
            raise ValueError("Maxwell-Heisenberg coefficients need the current var_x")
        if var_x <= 0:
            raise ValueError(f"need var_x > 0, got {var_x}")
        return params.b / params.m, params.b * (
            k_T + params.hbar**2 / (4.0 * params.m * var_x)
        )
    raise ValueError(f"unknown relaxation model {model!r}")


def rhs_moment_closure(
    state: MomentState,
    model: RelaxationModel,
    beta: float,
    params: PhysParams,
) -> np.ndarray:
    """Time derivative of (mean_x, mean_p, var_x, var_p, cov_xp).

    Exact moment equations of the linear Fokker-Planck flows; for
    MAXWELL_HEISENBERG the diffusion coefficient is evaluated at the
    state's own var_x, which makes the closure self-consistently nonlinear.
    """
    return _rhs_moment_array(state.to_array(), model, beta, params)


def _rhs_moment_array(y: np.ndarray, model, beta, params) -> np.ndarray:
    mean_x, mean_p, var_x, var_p, cov_xp = y
    gamma, d_p = model_coefficients(model, beta, params, var_x=var_x)
    m, w0 = params.m, params.omega0
    k = m * w0 * w0
    return np.array(
        [
            mean_p / m,
            -k * mean_x - gamma * mean_p,
            2.0 * cov_xp / m,
            -2.0 * k * cov_xp - 2.0 * gamma * var_p + 2.0 * d_p,
            var_p / m - k * var_x - gamma * cov_xp,
        ]
    )


def quantum_fixed_point(beta: float, params: PhysParams) -> MomentState:
    """Stationary moments of the quantum-friction model: the exact thermal
    dispersions var_p = m (hbar w0/2) coth(s), var_x = var_p / (m w0)^2."""
    var_p = params.m * mean_energy_quantum(beta, params)
    var_x = var_p / (params.m * params.omega0) ** 2
    return MomentState(0.0, 0.0, var_x, var_p, 0.0)


def maxwell_heisenberg_fixed_point(beta: float, params: PhysParams) -> MomentState:
    """Stationary moments of the Maxwell-Heisenberg closure,
    var_x = k_B T [1 + sqrt(1 + (beta hbar w0)^2)] / (2 m w0^2)."""
    var_x = mean_energy_maxwell_heisenberg(beta, params) / (params.m * params.omega0**2)
    var_p = (params.m * params.omega0) ** 2 * var_x
    return MomentState(0.0, 0.0, var_x, var_p, 0.0)


@dataclass
class MomentTrajectory:
    t: np.ndarray
    states: np.ndarray  # shape (n_samples, 5)
    terminal: MomentState

    def column(self, name: str) -> np.ndarray:
        idx = ["mean_x", "mean_p", "var_x", "var_p", "cov_xp"].index(name)
        return self.states[:, idx]


def evolve_moments(
    state0: MomentState,
    model: RelaxationModel,
    beta: float,
    t_end: float,
    dt: float,
    params: PhysParams,
    stride: int = 1,
) -> MomentTrajectory:
    """RK4 integration of the 5-dimensional closure ODE."""
    state0.validate()
    if t_end < 0:
        raise ValueError(f"need t_end >= 0, got {t_end}")
    if dt <= 0:
        raise ValueError(f"need dt > 0, got {dt}")
    gamma0, _ = model_coefficients(model, beta, params, var_x=state0.var_x)
    if dt * max(gamma0, params.omega0) >= 0.1:
        raise ValueError(
            f"dt={dt} too large: need dt*max(gamma, omega0) < 0.1 "
            f"(gamma={gamma0:.3g}, omega0={params.omega0:.3g})"
        )

    n_steps = int(round(t_end / dt)) if t_end > 0 else 0
    y = state0.to_array()
    times = [0.0]
    samples = [y.copy()]

    def rhs(t, yv):
        return _rhs_moment_array(yv, model, beta, params)

    for step in range(1, n_steps + 1):
        y = rk4_step(rhs, (step - 1) * dt, y, dt)
        if y[2] <= 0 or y[3] <= 0 or y[2] * y[3] - y[4] ** 2 <= 0:
            raise InstabilityError(
                f"covariance positivity lost at step {step} (t={step * dt:.6g}): "
                f"var_x={y[2]:.3g}, var_p={y[3]:.3g}, cov_xp={y[4]:.3g}"
            )
        if step % stride == 0 or step == n_steps:
            times.append(step * dt)
            samples.append(y.copy())

    return MomentTrajectory(
        t=np.array(times),
        states=np.array(samples),
        terminal=MomentState.from_array(y),
    )


def gibbs_helmholtz_residual(beta: float, params: PhysParams, h: float) -> float:
    """Relative residual of the thermodynamic identity
    d(beta B)/d(beta) = beta D_p, by 2nd-order central difference."""
    if not beta > h > 0:
        raise ValueError(f"need beta > h > 0, got beta={beta}, h={h}")
    lhs = (
        (beta + h) * effective_friction(beta + h, params)
        - (beta - h) * effective_friction(beta - h, params)
    ) / (2.0 * h)
    rhs = beta * momentum_diffusion(beta, params)
    return abs(lhs - rhs) / abs(rhs)

"""Finite-difference solvers on the (x, p) phase-space grid.

Covers the classical Klein-Kramers equation with arbitrary separable
Hamiltonian p^2/2m + U(x), the three harmonic-oscillator relaxation models
of the moments module, and the semiclassical equation for anharmonic
potentials with its cubic quantum streaming term and Gaussian-closure
quantum entropy term.

Conventions: fields are real arrays indexed [i_x, i_p]; boundaries are
zero-Dirichlet with the field held at 0 on the boundary ring during
evolution; domains must contain the solution out to several standard
deviations so that boundary flux is negligible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dataclass_field
from typing import Callable, NamedTuple

import numpy as np

from .core import PhaseGrid, PhysParams, trapezoid, trapezoid_2d, rk4_step
from .errors import InstabilityError
from .moments import MomentState, RelaxationModel, model_coefficients
from .stencils import diff1, diff2, diff3

__all__ = [
    "WignerField",
    "gaussian_field",
    "equilibrium_wigner",
    "equilibrium_variances",
    "rhs_klein_kramers",
    "check_onsager_form",
    "rhs_wigner_oscillator",
    "rhs_semiclassical",
    "evolve_wigner",
    "WignerTrajectory",
    "field_moments",
    "field_energy",
    "shannon_wigner_entropy",
    "WignerEntropy",
    "harmonic_potential",
]

Potential = Callable[[np.ndarray], np.ndarray]


@dataclass
class WignerField:
    """Real-valued quasi-probability density on a phase-space grid."""

    grid: PhaseGrid
    values: np.ndarray
    params: PhysParams

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        expected = (self.grid.x.n_x, self.grid.p.n_x)
        if self.values.shape != expected:
            raise ValueError(f"field shape {self.values.shape} != grid shape {expected}")

    def norm(self) -> float:
        return trapezoid_2d(self.values, self.grid.dx, self.grid.dp)

    def validate_classical(self, tol: float = 1e-10):
        """Classical phase-space densities must be nonnegative."""
        if self.values.min() < -tol:
            raise ValueError(
                f"classical density has negative values down to {self.values.min():.3e}"
            )
        return self

    def copy(self) -> "WignerField":
        return WignerField(self.grid, self.values.copy(), self.params)


def harmonic_potential(params: PhysParams) -> Potential:
    return lambda x: 0.5 * params.m * params.omega0**2 * x**2


def _potential_on_grid(potential, grid: PhaseGrid) -> np.ndarray:
    x = grid.x.x
    U = potential(x) if callable(potential) else np.asarray(potential, dtype=float)
    if U.shape != x.shape:
        raise ValueError(f"potential samples have shape {U.shape}, expected {x.shape}")
    return U


def gaussian_field(
    grid: PhaseGrid,
    params: PhysParams,
    moments: MomentState,
) -> WignerField:
    """Normalized bivariate Gaussian field with the given moments."""
    moments.validate()
    det = moments.covariance_det
    dx_ = grid.X - moments.mean_x
    dp_ = grid.P - moments.mean_p
    quad = (
        moments.var_p * dx_**2 - 2.0 * moments.cov_xp * dx_ * dp_ + moments.var_x * dp_**2
    ) / det
    vals = np.exp(-0.5 * quad) / (2.0 * math.pi * math.sqrt(det))
    return WignerField(grid, vals, params)


def equilibrium_variances(beta: float, params: PhysParams):
    """(var_x, var_p) of the exact oscillator equilibrium,
    var_x = (hbar/2 m w0) coth(s), var_p = (m hbar w0 / 2) coth(s).
    beta = inf gives the T = 0 ground state."""
    if params.omega0 <= 0:
        raise ValueError("equilibrium variances require omega0 > 0")
    s = beta * params.hbar * params.omega0 / 2.0
    coth = 1.0 if math.isinf(s) else 1.0 / math.tanh(s)
    var_x = params.hbar / (2.0 * params.m * params.omega0) * coth
    var_p = params.m * params.hbar * params.omega0 / 2.0 * coth
    return var_x, var_p


def equilibrium_wigner(beta: float, params: PhysParams, grid: PhaseGrid) -> WignerField:
    """Exact equilibrium field, Gaussian proportional to
    exp(-2 tanh(s) H / hbar w0); at T = 0 exactly exp(-2 H / hbar w0)/Z.

    Raises if the grid spans fewer than 6 thermal standard deviations in
    either axis.
    """
    var_x, var_p = equilibrium_variances(beta, params)
    if grid.x.span < 6.0 * math.sqrt(var_x) or grid.p.span < 6.0 * math.sqrt(var_p):
        raise ValueError(
            "grid smaller than 6 thermal widths: spans "
            f"({grid.x.span:.3g}, {grid.p.span:.3g}) vs sigma "
            f"({math.sqrt(var_x):.3g}, {math.sqrt(var_p):.3g})"
        )
    field = gaussian_field(grid, params, MomentState(0.0, 0.0, var_x, var_p, 0.0))
    field.values /= field.norm()
    return field


# ---------------------------------------------------------------------------
# right-hand sides


def rhs_klein_kramers(field: WignerField, potential) -> np.ndarray:
    """Classical phase-space relaxation:
    -(p/m) dW/dx + U'(x) dW/dp + (b/m) d(p W)/dp + b k_B T d^2W/dp^2."""
    g, p = field.grid, field.params
    U = _potential_on_grid(potential, g)
    U1 = diff1(U, g.dx)
    W = field.values
    return (
        -(g.P / p.m) * diff1(W, g.dx, axis=0)
        + U1[:, None] * diff1(W, g.dp, axis=1)
        + (p.b / p.m) * diff1(g.P * W, g.dp, axis=1)
        + p.b * p.k_B * p.T * diff2(W, g.dp, axis=1)
    )


def check_onsager_form(field: WignerField, potential) -> np.ndarray:
    """Residual between the free-energy-gradient form of the relaxation term,
    b d/dp (f d/dp [H + k_B T ln f]), and its expanded form
    b d/dp (f dH/dp + k_B T df/dp).  Vanishes to discretization error."""
    g, p = field.grid, field.params
    f = field.values
    if f.min() <= 0:
        raise ValueError("Onsager form requires a strictly positive density")
    U = _potential_on_grid(potential, g)
    H = g.P**2 / (2.0 * p.m) + U[:, None]
    kT = p.k_B * p.T
    dH = diff1(H, g.dp, axis=1)
    onsager = p.b * diff1(f * diff1(H + kT * np.log(f), g.dp, axis=1), g.dp, axis=1)
    direct = p.b * diff1(f * dH + kT * diff1(f, g.dp, axis=1), g.dp, axis=1)
    return onsager - direct


def rhs_wigner_oscillator(
    field: WignerField,
    model: RelaxationModel,
    beta: float,
    var_x: float | None = None,
) -> np.ndarray:
    """Harmonic-oscillator advection plus the model's relaxation term.

    For MAXWELL_HEISENBERG the caller supplies the current position variance
    `var_x` of the field, which sets the state-dependent diffusion.
    """
    g, p = field.grid, field.params
    if p.omega0 <= 0:
        raise ValueError("oscillator models require omega0 > 0")
    if model is RelaxationModel.MAXWELL_HEISENBERG and var_x is None:
        raise ValueError("Maxwell-Heisenberg model needs var_x from the caller")
    gamma, d_p = model_coefficients(model, beta, p, var_x=var_x)
    W = field.values
    force = p.m * p.omega0**2 * g.x.x
    return (
        -(g.P / p.m) * diff1(W, g.dx, axis=0)
        + force[:, None] * diff1(W, g.dp, axis=1)
        + gamma * diff1(g.P * W, g.dp, axis=1)
        + d_p * diff2(W, g.dp, axis=1)
    )


def rhs_semiclassical(
    field: WignerField,
    potential,
    moments: MomentState,
    beta: float | None = None,
) -> np.ndarray:
    """Semiclassical kernel for anharmonic potentials: the classical terms,
    the cubic quantum streaming correction -(hbar^2/24) U'''(x) d^3W/dp^3,
    and the quantum entropy term in Gaussian-closure form
    b k_B T hbar^2 d^2W/dp^2 / [4 (var_x var_p - cov_xp^2)].

    Both corrections vanish as hbar -> 0, recovering the classical kernel.
    """
    g, p = field.grid, field.params
    if beta is None:
        beta = p.beta
    kT = 1.0 / beta
    moments.validate()
    U = _potential_on_grid(potential, g)
    U1 = diff1(U, g.dx)
    U3 = diff3(U, g.dx)
    W = field.values
    classical = (
        -(g.P / p.m) * diff1(W, g.dx, axis=0)
        + U1[:, None] * diff1(W, g.dp, axis=1)
        + (p.b / p.m) * diff1(g.P * W, g.dp, axis=1)
        + p.b * kT * diff2(W, g.dp, axis=1)
    )
    cubic = -(p.hbar**2 / 24.0) * U3[:, None] * diff3(W, g.dp, axis=1)
    entropy_coeff = p.b * kT * p.hbar**2 / (4.0 * moments.covariance_det)
    return classical + cubic + entropy_coeff * diff2(W, g.dp, axis=1)


# ---------------------------------------------------------------------------
# diagnostics


class WignerEntropy(NamedTuple):
    value: float
    negative_fraction: float


def field_moments(field: WignerField) -> MomentState:
    """Quadrature first and second central moments of the field."""
    g = field.grid
    W = field.values
    norm = trapezoid_2d(W, g.dx, g.dp)
    mx = trapezoid_2d(g.X * W, g.dx, g.dp) / norm
    mp = trapezoid_2d(g.P * W, g.dx, g.dp) / norm
    dx_, dp_ = g.X - mx, g.P - mp
    vx = trapezoid_2d(dx_**2 * W, g.dx, g.dp) / norm
    vp = trapezoid_2d(dp_**2 * W, g.dx, g.dp) / norm
    cxp = trapezoid_2d(dx_ * dp_ * W, g.dx, g.dp) / norm
    return MomentState(mx, mp, vx, vp, cxp)


def field_energy(field: WignerField, potential=None) -> float:
    """Mean energy integral(H W) dx dp; defaults to the harmonic potential."""
    g, p = field.grid, field.params
    if potential is None:
        potential = harmonic_potential(p)
    U = _potential_on_grid(potential, g)
    H = g.P**2 / (2.0 * p.m) + U[:, None]
    return trapezoid_2d(H * field.values, g.dx, g.dp)


def shannon_wigner_entropy(field: WignerField) -> WignerEntropy:
    """-integral(W ln W); cells with W <= 0 are excluded and the negative
    volume fraction is reported alongside the value."""
    g = field.grid
    W = field.values
    positive = W > 0
    integrand = np.zeros_like(W)
    integrand[positive] = -W[positive] * np.log(W[positive])
    value = trapezoid_2d(integrand, g.dx, g.dp)
    total = trapezoid_2d(np.abs(W), g.dx, g.dp)
    negative = float(trapezoid_2d(np.where(W < 0, -W, 0.0), g.dx, g.dp))
    return WignerEntropy(float(value), negative / total if total > 0 else 0.0)


# ---------------------------------------------------------------------------
# time evolution


@dataclass
class WignerTrajectory:
    t: np.ndarray
    moments: list
    norm: np.ndarray
    energy: np.ndarray
    entropy: np.ndarray
    negative_fraction: np.ndarray
    terminal: WignerField
    snapshots: list = dataclass_field(default_factory=list)

    def moment_column(self, name: str) -> np.ndarray:
        return np.array([getattr(m, name) for m in self.moments])

    def to_csv(self, path):
        from .output import write_csv

        write_csv(
            path,
            ["t", "mean_x", "mean_p", "var_x", "var_p", "cov_xp", "norm", "energy",
             "entropy", "negative_fraction"],
            [self.t] + [self.moment_column(n) for n in
                        ("mean_x", "mean_p", "var_x", "var_p", "cov_xp")]
            + [self.norm, self.energy, self.entropy, self.negative_fraction],
        )


def _cfl_limit(field: WignerField, potential, d_p_max: float) -> float:
    g, p = field.grid, field.params
    p_max = max(abs(g.p.x_min), abs(g.p.x_max))
    bounds = []
    if p_max > 0:
        bounds.append(g.dx * p.m / p_max)
    U1 = diff1(_potential_on_grid(potential, g), g.dx)
    force_max = np.abs(U1).max()
    if force_max > 0:
        bounds.append(g.dp / force_max)
    if d_p_max > 0:
        bounds.append(g.dp**2 / (2.0 * d_p_max))
    return 0.4 * min(bounds) if bounds else math.inf


def _var_x_of(values: np.ndarray, grid: PhaseGrid) -> float:
    norm = trapezoid_2d(values, grid.dx, grid.dp)
    mx = trapezoid_2d(grid.X * values, grid.dx, grid.dp) / norm
    return trapezoid_2d((grid.X - mx) ** 2 * values, grid.dx, grid.dp) / norm


def evolve_wigner(
    field0: WignerField,
    t_end: float,
    dt: float,
    model: RelaxationModel | None = None,
    beta: float | None = None,
    potential=None,
    semiclassical: bool = False,
    stride: int = 10,
    snapshot_times=None,
) -> WignerTrajectory:
    """RK4 evolution of a phase-space field under a relaxation model, the
    classical kernel with an arbitrary potential, or the semiclassical
    kernel (`semiclassical=True` with a potential).

    The time step is validated against the CFL bound
    dt <= 0.4 min(dx m / p_max, dp / max|U'|, dp^2 / 2 D_p) before any
    stepping; norm drift beyond 1e-3 aborts with an instability error.
    For the Maxwell-Heisenberg model the diffusion coefficient is refreshed
    from the current field's var_x at every RK4 stage, which keeps the
    self-consistent nonlinearity explicit.
    """
    g, p = field0.grid, field0.params
    if beta is None:
        beta = math.inf if p.T == 0 else p.beta
    if dt <= 0 or t_end < 0:
        raise ValueError(f"need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}")

    if semiclassical:
        if potential is None:
            raise ValueError("semiclassical evolution needs a potential")
        U = _potential_on_grid(potential, g)
        U1 = diff1(U, g.dx)
        U3 = diff3(U, g.dx)
        kT = 0.0 if math.isinf(beta) else 1.0 / beta

        def rhs_values(t, W):
            m = _moments_of(W, g)
            det = m.var_x * m.var_p - m.cov_xp**2
            if det <= 0:
                raise InstabilityError(f"covariance degenerate at t={t:.6g}")
            diff_coeff = p.b * kT + p.b * kT * p.hbar**2 / (4.0 * det)
            return (
                -(g.P / p.m) * diff1(W, g.dx, axis=0)
                + U1[:, None] * diff1(W, g.dp, axis=1)
                + (p.b / p.m) * diff1(g.P * W, g.dp, axis=1)
                + diff_coeff * diff2(W, g.dp, axis=1)
                - (p.hbar**2 / 24.0) * U3[:, None] * diff3(W, g.dp, axis=1)
            )

        m0 = field_moments(field0)
        d_p_max = p.b * kT * (1.0 + p.hbar**2 / (4.0 * m0.covariance_det))
        pot_for_cfl = potential
    elif model is not None:
        if potential is not None and model is not RelaxationModel.CLASSICAL:
            raise ValueError("custom potentials are only supported for the classical model")
        if model is RelaxationModel.CLASSICAL and potential is not None:
            U = _potential_on_grid(potential, g)
            U1 = diff1(U, g.dx)
            pot_for_cfl = potential
        else:
            if p.omega0 <= 0:
                raise ValueError("oscillator models require omega0 > 0")
            U1 = p.m * p.omega0**2 * g.x.x
            pot_for_cfl = harmonic_potential(p)
        if model is RelaxationModel.MAXWELL_HEISENBERG:
            def rhs_values(t, W):
                gamma, d_p = model_coefficients(model, beta, p, var_x=_var_x_of(W, g))
                return _model_rhs(W, g, p, U1, gamma, d_p)

            _, d_p_max = model_coefficients(model, beta, p, var_x=_var_x_of(field0.values, g))
        else:
            gamma_c, d_p_c = model_coefficients(model, beta, p)

            def rhs_values(t, W):
                return _model_rhs(W, g, p, U1, gamma_c, d_p_c)

            d_p_max = d_p_c
    else:
        raise ValueError("either a relaxation model or semiclassical=True is required")

    dt_max = _cfl_limit(field0, pot_for_cfl, d_p_max)
    if dt > dt_max:
        raise ValueError(f"dt={dt:.3e} violates the CFL bound {dt_max:.3e}")

    n_steps = int(round(t_end / dt)) if t_end > 0 else 0
    W = field0.values.copy()
    _zero_ring(W)
    norm0 = trapezoid_2d(W, g.dx, g.dp)

    snapshot_steps = set()
    if snapshot_times:
        snapshot_steps = {min(max(int(round(ts / dt)), 0), n_steps) for ts in snapshot_times}

    times, moments_list, norms, energies, entropies, neg_fracs = [], [], [], [], [], []
    snapshots = []

    def sample(step):
        fld = WignerField(g, W, p)
        times.append(step * dt)
        moments_list.append(field_moments(fld))
        norms.append(fld.norm())
        energies.append(field_energy(fld, potential))
        ent = shannon_wigner_entropy(fld)
        entropies.append(ent.value)
        neg_fracs.append(ent.negative_fraction)

    sample(0)
    if 0 in snapshot_steps:
        snapshots.append((0.0, WignerField(g, W.copy(), p)))
    for step in range(1, n_steps + 1):
        W = rk4_step(rhs_values, (step - 1) * dt, W, dt)
        _zero_ring(W)
        if step in snapshot_steps:
            snapshots.append((step * dt, WignerField(g, W.copy(), p)))
        if step % stride == 0 or step == n_steps:
            sample(step)
            if abs(norms[-1] - norm0) > 1e-3:
                raise InstabilityError(
                    f"norm drift {norms[-1] - norm0:.3e} exceeds 1e-3 at step {step} "
                    f"(t={step * dt:.6g})"
                )

    return WignerTrajectory(
        t=np.array(times),
        moments=moments_list,
        norm=np.array(norms),
        energy=np.array(energies),
        entropy=np.array(entropies),
        negative_fraction=np.array(neg_fracs),
        terminal=WignerField(g, W, p),
        snapshots=snapshots,
    )


def _model_rhs(W, g, p, force, gamma, d_p):
    return (
        -(g.P / p.m) * diff1(W, g.dx, axis=0)
        + force[:, None] * diff1(W, g.dp, axis=1)
        + gamma * diff1(g.P * W, g.dp, axis=1)
        + d_p * diff2(W, g.dp, axis=1)
    )


def _moments_of(values: np.ndarray, grid: PhaseGrid) -> MomentState:
    norm = trapezoid_2d(values, grid.dx, grid.dp)
    mx = trapezoid_2d(grid.X * values, grid.dx, grid.dp) / norm
    mp = trapezoid_2d(grid.P * values, grid.dx, grid.dp) / norm
    dx_, dp_ = grid.X - mx, grid.P - mp
    return MomentState(
        mx,
        mp,
        trapezoid_2d(dx_**2 * values, grid.dx, grid.dp) / norm,
        trapezoid_2d(dp_**2 * values, grid.dx, grid.dp) / norm,
        trapezoid_2d(dx_ * dp_ * values, grid.dx, grid.dp) / norm,
    )


def _zero_ring(W: np.ndarray):
    W[0, :] = 0.0
    W[-1, :] = 0.0
    W[:, 0] = 0.0
    W[:, -1] = 0.0

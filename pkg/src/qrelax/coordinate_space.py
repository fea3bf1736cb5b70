"""Overdamped coordinate-space dynamics and free-particle dispersion laws.

The gradient-flow solver evolves a 1D probability density under the flux

    d(rho)/dt = d/dx [ rho d(U + Q)/dx / b + D d(rho)/dx ],

where Q = -hbar^2 (sqrt rho)'' / (2 m sqrt rho) is the quantum potential of
the density itself.  An imaginary-time propagator certifies the thermal
equilibrium against the eigenmode sum, and the free-particle dispersion
laws (classical Einstein, its quantum generalization, and the
quantum-bath-enhanced variant) are integrated and cross-checked against
their closed implicit form.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy import sparse
from scipy.optimize import brentq
from scipy.sparse.linalg import splu

from .core import CoordGrid, PhysParams, oscillator_eigenpair, rk4_step, trapezoid
from .errors import AccuracyWarning, InstabilityError
from .stencils import diff1, diff2

__all__ = [
    "CoordDensity",
    "DispersionLaw",
    "bohm_potential",
    "rhs_smoluchowski_bohm",
    "evolve_smoluchowski",
    "CoordTrajectory",
    "dispersion_t0_nonlinear",
    "dispersion_t0_classical",
    "bloch_propagate",
    "bloch_partition_estimate",
    "bloch_equilibrium_density",
    "gibbs_coordinate_density",
    "free_dispersion_evolve",
    "DispersionTrajectory",
    "einstein_law_time",
    "einstein_law_dispersion",
    "nelson_condition",
    "NelsonReport",
    "gaussian_density",
]


class DispersionLaw(Enum):
    CLASSICAL_EINSTEIN = "classical-einstein"
    QUANTUM_EINSTEIN = "quantum-einstein"
    QUANTUM_BATH = "quantum-bath"


@dataclass
class CoordDensity:
    """Nonnegative normalized density on a coordinate grid."""

    grid: CoordGrid
    values: np.ndarray
    params: PhysParams

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.grid.n_x,):
            raise ValueError(
                f"density shape {self.values.shape} != grid size {self.grid.n_x}"
            )

    def norm(self) -> float:
        return float(trapezoid(self.values, self.grid.dx))

    def validate(self, tol: float = 1e-8):
        if self.values.min() < -1e-10:
            raise ValueError(f"density has negative values down to {self.values.min():.3e}")
        if abs(self.norm() - 1.0) > tol:
            raise ValueError(f"density norm {self.norm()} differs from 1")
        return self

    def variance(self) -> float:
        n = self.norm()
        mean = float(trapezoid(self.grid.x * self.values, self.grid.dx)) / n
        return float(trapezoid((self.grid.x - mean) ** 2 * self.values, self.grid.dx)) / n


def gaussian_density(grid: CoordGrid, params: PhysParams, mean: float, var: float) -> CoordDensity:
    if var <= 0:
        raise ValueError(f"need var > 0, got {var}")
    vals = np.exp(-0.5 * (grid.x - mean) ** 2 / var) / math.sqrt(2.0 * math.pi * var)
    return CoordDensity(grid, vals, params)


def _potential_on_grid(potential, grid: CoordGrid) -> np.ndarray:
    U = potential(grid.x) if callable(potential) else np.asarray(potential, dtype=float)
    if U.shape != grid.x.shape:
        raise ValueError(f"potential samples have shape {U.shape}, expected {grid.x.shape}")
    return U


def bohm_potential(density: CoordDensity, floor: float = 1e-12) -> np.ndarray:
    """Quantum potential Q = -hbar^2 (sqrt rho)'' / (2 m sqrt rho).

    Q is 0/0 where the density vanishes; cells below floor * max(rho) are
    masked and carry the nearest unmasked value, which keeps the flux finite
    and the norm conserved near the support edge.
    """
    rho = density.values
    top = rho.max()
    if top <= 0:
        raise ValueError("degenerate density: no positive cells")
    mask = rho >= floor * top
    if mask.sum() < 5:
        raise ValueError(f"degenerate density: only {int(mask.sum())} cells above the floor")
    s = np.sqrt(np.clip(rho, 0.0, None))
    d2s = diff2(s, density.grid.dx)
    p = density.params
    Q = np.zeros_like(rho)
    np.divide(
        -p.hbar**2 * d2s, 2.0 * p.m * s, out=Q, where=mask & (s > 0)
    )
    # nearest-value extension into the masked region
    idx = np.flatnonzero(mask)
    pos = np.arange(rho.size)
    right = np.clip(np.searchsorted(idx, pos), 0, idx.size - 1)
    left = np.clip(right - 1, 0, idx.size - 1)
    nearest = np.where(np.abs(idx[right] - pos) < np.abs(pos - idx[left]), idx[right], idx[left])
    out = Q[nearest]
    out[mask] = Q[mask]
    return out


def rhs_smoluchowski_bohm(density: CoordDensity, potential) -> np.ndarray:
    """Flux-form divergence d/dx [rho d(U+Q)/dx / b + D d(rho)/dx]."""
    p = density.params
    if p.b <= 0:
        raise ValueError("overdamped dynamics requires b > 0")
    g = density.grid
    U = _potential_on_grid(potential, g)
    Q = bohm_potential(density)
    D = p.k_B * p.T / p.b
    flux = density.values * diff1(U + Q, g.dx) / p.b + D * diff1(density.values, g.dx)
    return diff1(flux, g.dx)


@dataclass
class CoordTrajectory:
    t: np.ndarray
    var_x: np.ndarray
    norm: np.ndarray
    free_energy: np.ndarray
    min_value: np.ndarray
    terminal: CoordDensity

    def to_csv(self, path, extra_columns=None):
        from .output import write_csv

        headers = ["t", "sigma_x2", "norm", "free_energy", "min_value"]
        cols = [self.t, self.var_x, self.norm, self.free_energy, self.min_value]
        if extra_columns:
            for name, col in extra_columns:
                headers.append(name)
                cols.append(col)
        write_csv(path, headers, cols)


class _LogDensityFlow:
    """The overdamped flow rewritten for w = ln(rho):

        dw/dt = [w' (U+Q)' + (U+Q)''] / b + D (w'' + w'^2),
        Q = -(hbar^2/2m) (w''/2 + w'^2/4).

    In w the Gaussian profiles are smooth low-order polynomials across the
    whole domain, so there is no vacuum singularity to regularize and the
    analytic Jacobian is a narrow banded matrix built from the stencil
    operators.
    """

    def __init__(self, grid: CoordGrid, params: PhysParams, U: np.ndarray):
        self.h = grid.dx
        self.p = params
        self.U = U
        self.kap = params.hbar**2 / (2.0 * params.m)
        self.D = params.k_B * params.T / params.b
        n = grid.n_x
        self.D1 = sparse.csr_matrix(diff1(np.eye(n), self.h, axis=0))
        self.D2 = sparse.csr_matrix(diff2(np.eye(n), self.h, axis=0))

    def rhs(self, w: np.ndarray) -> np.ndarray:
        h = self.h
        w1 = diff1(w, h)
        w2 = diff2(w, h)
        G = self.U - self.kap * (0.5 * w2 + 0.25 * w1 * w1)
        return (w1 * diff1(G, h) + diff2(G, h)) / self.p.b + self.D * (w2 + w1 * w1)

    def jac(self, w: np.ndarray):
        h = self.h
        w1 = diff1(w, h)
        w2 = diff2(w, h)
        G = self.U - self.kap * (0.5 * w2 + 0.25 * w1 * w1)
        G1 = diff1(G, h)
        dW1 = sparse.diags(w1)
        JG = -self.kap * (0.5 * self.D2 + 0.5 * dW1 @ self.D1)
        return (
            sparse.diags(G1) @ self.D1 + dW1 @ (self.D1 @ JG) + self.D2 @ JG
        ) / self.p.b + self.D * (self.D2 + 2.0 * dW1 @ self.D1)


def evolve_smoluchowski(
    density0: CoordDensity,
    potential,
    t_end: float,
    dt: float,
    stride: int = 10,
) -> CoordTrajectory:
    """Evolve the overdamped gradient flow by the Crank-Nicolson scheme in
    log-density, with modified Newton on the analytic banded Jacobian.

    The quantum-pressure flux linearizes to a fourth-derivative operator, so
    explicit stepping would need dt ~ dx^4; the implicit log-density form
    keeps the step limited only by accuracy.  Newton residuals bottom out at
    the linear-solve roundoff floor, which is accepted when below 1e-6 in
    log-density units.  Norm drift beyond 1e-3 aborts.
    """
    p = density0.params
    g = density0.grid
    if p.b <= 0:
        raise ValueError("overdamped dynamics requires b > 0")
    if dt <= 0 or t_end < 0:
        raise ValueError(f"need dt > 0 and t_end >= 0, got dt={dt}, t_end={t_end}")
    if density0.values.min() < 0:
        raise ValueError("initial density must be nonnegative")
    U = _potential_on_grid(potential, g)
    flow = _LogDensityFlow(g, p, U)
    w = np.log(np.maximum(density0.values, 1e-300))
    n_steps = int(round(t_end / dt)) if t_end > 0 else 0
    I = sparse.identity(w.size, format="csc")
    theta = 0.5
    lu = None

    times, variances, norms, free_energies, mins = [], [], [], [], []

    def sample(step, rho):
        d = CoordDensity(g, rho, p)
        times.append(step * dt)
        variances.append(d.variance())
        norms.append(d.norm())
        free_energies.append(float(trapezoid(rho * (U + bohm_potential(d)), g.dx)))
        mins.append(float(rho.min()))

    sample(0, np.exp(w))
    norm0 = norms[0]
    for step in range(1, n_steps + 1):
        f_n = flow.rhs(w)
        scale = max(1.0, np.abs(w).max())
        y_acc = None
        for _attempt in range(3):
            if lu is None:
                lu = splu((I - theta * dt * flow.jac(w)).tocsc())
            y = w.copy()
            r_best, y_best, r_prev = math.inf, None, math.inf
            for it in range(15):
                resid = y - w - dt * ((1 - theta) * f_n + theta * flow.rhs(y))
                rmax = float(np.abs(resid).max())
                if rmax < r_best:
                    r_best, y_best = rmax, y.copy()
                if rmax < 1e-10 * scale or (it > 1 and rmax > 0.5 * r_prev):
                    break
                r_prev = rmax
                y = y - lu.solve(resid)
            if r_best < 1e-6 * scale:
                y_acc = y_best
                break
            lu = None  # rebuild the Jacobian at the current state and retry
        if y_acc is None:
            raise InstabilityError(
                f"implicit solve failed to converge at step {step} "
                f"(t={step * dt:.6g}), residual {r_best:.3e}"
            )
        w = y_acc
        if step % stride == 0 or step == n_steps:
            rho = np.exp(w)
            sample(step, rho)
            if abs(norms[-1] - norm0) > 1e-3:
                raise InstabilityError(
                    f"norm drift {norms[-1] - norm0:.3e} exceeds 1e-3 at step {step} "
                    f"(t={step * dt:.6g})"
                )

    return CoordTrajectory(
        t=np.array(times),
        var_x=np.array(variances),
        norm=np.array(norms),
        free_energy=np.array(free_energies),
        min_value=np.array(mins),
        terminal=CoordDensity(g, np.exp(w), p),
    )


def dispersion_t0_nonlinear(t, params: PhysParams):
    """T = 0 position dispersion of the nonlinear overdamped flow,
    (hbar / 2 m w0) sqrt(1 - exp(-4 m w0^2 t / b))."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("need t >= 0")
    eq = params.hbar / (2.0 * params.m * params.omega0)
    return eq * np.sqrt(-np.expm1(-4.0 * params.m * params.omega0**2 * t / params.b))


def dispersion_t0_classical(t, params: PhysParams):
    """T = 0 position dispersion of the effective-temperature model,
    (hbar / 2 m w0) [1 - exp(-2 m w0^2 t / b)]."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("need t >= 0")
    eq = params.hbar / (2.0 * params.m * params.omega0)
    return eq * (-np.expm1(-2.0 * params.m * params.omega0**2 * t / params.b))


# ---------------------------------------------------------------------------
# imaginary-time (thermal equilibrium) machinery


def bloch_propagate(
    psi0: np.ndarray,
    beta_end: float,
    potential,
    dbeta: float,
    grid: CoordGrid,
    params: PhysParams,
) -> np.ndarray:
    """Integrate the imaginary-time equation 2 d(psi)/d(beta) = -H psi with
    H = -(hbar^2/2m) d^2/dx^2 + U, from a constant (infinite-temperature)
    start, by RK4 in beta with 4th-order spatial stencils.

    Returns the unnormalized psi(beta_end); the thermal density follows as
    psi^2 / integral(psi^2 dx).
    """
    psi0 = np.asarray(psi0, dtype=float)
    if psi0.shape != (grid.n_x,):
        raise ValueError(f"psi0 shape {psi0.shape} != grid size {grid.n_x}")
    if abs(psi0 - psi0[0]).max() > 1e-12 * max(abs(psi0[0]), 1e-300):
        raise ValueError("imaginary-time start must be a constant function")
    if beta_end <= 0 or dbeta <= 0:
        raise ValueError(f"need beta_end > 0 and dbeta > 0, got {beta_end}, {dbeta}")
    U = _potential_on_grid(potential, grid)
    # operator-norm estimate: stencil eigenvalue bound of -d^2/dx^2 is 16/(3 dx^2)
    h_norm = params.hbar**2 / (2.0 * params.m) * 16.0 / (3.0 * grid.dx**2) + np.abs(U).max()
    if dbeta * h_norm > 5.0:
        raise ValueError(
            f"dbeta={dbeta:.3e} unstable: dbeta * |H|_grid = {dbeta * h_norm:.3g} > 5"
        )

    def rhs(b, psi):
        return -0.5 * (
            -params.hbar**2 / (2.0 * params.m) * diff2(psi, grid.dx) + U * psi
        )

    n_steps = max(int(round(beta_end / dbeta)), 1)
    step = beta_end / n_steps
    psi = psi0.copy()
    for k in range(n_steps):
        psi = rk4_step(rhs, k * step, psi, step)
    return psi


def bloch_partition_estimate(
    psi_beta: np.ndarray,
    psi0: np.ndarray,
    grid: CoordGrid,
    params: PhysParams,
) -> float:
    """Partition function estimate from the overlap of the propagated state
    with its constant start.

    For the harmonic oscillator the half-temperature overlap obeys
    <1|e^{-beta H/2}|1>^2 = 2 pi hbar / (m w0) * Z(beta) exactly, so
    Z = overlap^2 * m w0 / (4 pi hbar) after removing the start amplitude.
    """
    c = float(psi0[0])
    if c == 0:
        raise ValueError("constant start amplitude must be nonzero")
    overlap = float(trapezoid(psi_beta * psi0, grid.dx)) / (c * c)
    return overlap**2 * params.m * params.omega0 / (4.0 * math.pi * params.hbar)


def bloch_equilibrium_density(
    beta: float,
    potential,
    grid: CoordGrid,
    params: PhysParams,
    dbeta: float,
):
    """Convenience wrapper: propagate a unit constant to beta and return
    (normalized CoordDensity, partition-function estimate)."""
    psi0 = np.ones(grid.n_x)
    psi = bloch_propagate(psi0, beta, potential, dbeta, grid, params)
    z = bloch_partition_estimate(psi, psi0, grid, params)
    rho = psi**2
    rho /= trapezoid(rho, grid.dx)
    return CoordDensity(grid, rho, params), z


def gibbs_coordinate_density(
    beta: float,
    params: PhysParams,
    grid: CoordGrid,
    n_modes: int,
) -> CoordDensity:
    """Thermal coordinate density as the truncated eigenmode sum
    sum_n e^{-beta E_n} phi_n^2 / Z, normalized on the grid.

    Warns (AccuracyWarning) when the truncated tail weight exceeds 1e-8.
    """
    if beta <= 0 or n_modes < 1:
        raise ValueError(f"need beta > 0 and n_modes >= 1, got {beta}, {n_modes}")
    if params.omega0 <= 0:
        raise ValueError("eigenmode sum requires omega0 > 0")
    tail = math.exp(-beta * params.hbar * params.omega0 * n_modes)
    if tail > 1e-8:
        warnings.warn(
            f"mode sum truncated with tail weight {tail:.3e} > 1e-8; "
            "increase n_modes",
            AccuracyWarning,
        )
    rho = np.zeros(grid.n_x)
    weight_sum = 0.0
    for n in range(n_modes):
        energy, phi = oscillator_eigenpair(n, params, grid)
        w = math.exp(-beta * params.hbar * params.omega0 * n)
        rho += w * phi**2
        weight_sum += w
    rho /= weight_sum
    rho /= trapezoid(rho, grid.dx)
    return CoordDensity(grid, rho, params)


# ---------------------------------------------------------------------------
# free-particle dispersion laws


@dataclass
class DispersionTrajectory:
    t: np.ndarray
    sigma2: np.ndarray
    law: DispersionLaw

    def to_csv(self, path, extra_columns=None):
        from .output import write_csv

        headers = ["t", "sigma_x2"]
        cols = [self.t, self.sigma2]
        if extra_columns:
            for name, col in extra_columns:
                headers.append(name)
                cols.append(col)
        write_csv(path, headers, cols)


def _dispersion_rate(law: DispersionLaw, sigma2: float, t: float, params: PhysParams) -> float:
    """d(sigma_x^2)/dt = 2 sigma_p^2 / (m b) for the law's momentum dispersion."""
    p = params
    if law is DispersionLaw.CLASSICAL_EINSTEIN:
        sp2 = p.m * p.k_B * p.T
    elif law is DispersionLaw.QUANTUM_EINSTEIN:
        sp2 = p.m * p.k_B * p.T + p.hbar**2 / (4.0 * sigma2)
    elif law is DispersionLaw.QUANTUM_BATH:
        sp2 = p.m * p.k_B * p.T + p.hbar * p.m / t + p.hbar**2 / (4.0 * sigma2)
    else:
        raise ValueError(f"unknown dispersion law {law!r}")
    return 2.0 * sp2 / (p.m * p.b)


def free_dispersion_evolve(
    sigma0_sq: float,
    t_end: float,
    law: DispersionLaw,
    dt: float,
    params: PhysParams,
    t_start: float | None = None,
    stride: int = 1,
) -> DispersionTrajectory:
    """Dispersion trajectory sigma_x^2(t) under the chosen law.

    The classical law is integrated by RK4 with uniform step `dt` (exact,
    since the rate is constant).  The quantum laws traverse many decades of
    time from nearly singular starts, so they are integrated by RK4 in
    u = ln(sigma_x^2): dt/du = sigma^2 / rate, with `dt` read as the step in
    u.  The quantum-bath law needs `t_start` > 0 (default 1e-3 m/b) because
    its bath term diverges at t = 0.
    """
    if sigma0_sq <= 0:
        raise ValueError(f"need sigma0_sq > 0, got {sigma0_sq}")
    if dt <= 0 or t_end <= 0:
        raise ValueError(f"need dt > 0 and t_end > 0, got dt={dt}, t_end={t_end}")
    p = params
    if p.b <= 0:
        raise ValueError("dispersion laws require b > 0")

    if law is DispersionLaw.CLASSICAL_EINSTEIN:
        rate = 2.0 * p.k_B * p.T / p.b
        n_steps = int(math.ceil(t_end / dt))
        t = np.minimum(np.arange(n_steps + 1) * dt, t_end)
        sigma2 = sigma0_sq + rate * t
        keep = np.unique(np.r_[np.arange(0, n_steps + 1, stride), n_steps])
        return DispersionTrajectory(t=t[keep], sigma2=sigma2[keep], law=law)

    if law is DispersionLaw.QUANTUM_BATH:
        t0 = t_start if t_start is not None else 1e-3 * p.m / p.b
        if t0 <= 0:
            raise ValueError("quantum-bath law needs t_start > 0")
    else:
        t0 = 0.0

    def dtdu(u, tval):
        s2 = math.exp(u)
        return s2 / _dispersion_rate(law, s2, max(tval, 1e-300), p)

    u = math.log(sigma0_sq)
    tval = t0
    times = [tval]
    sig = [sigma0_sq]
    max_steps = 10_000_000
    step = 0
    while tval < t_end:
        step += 1
        if step > max_steps:
            raise RuntimeError("dispersion integration exceeded the step budget")
        tval = float(rk4_step(lambda uu, tt: dtdu(uu, tt), u, np.float64(tval), dt))
        u += dt
        if step % stride == 0 or tval >= t_end:
            times.append(tval)
            sig.append(math.exp(u))
    t_arr = np.array(times)
    s_arr = np.array(sig)
    if np.any(np.diff(s_arr) < 0) or np.any(np.diff(t_arr) <= 0):
        raise RuntimeError("dispersion trajectory is not monotone")
    return DispersionTrajectory(t=t_arr, sigma2=s_arr, law=law)


def einstein_law_time(sigma_sq, params: PhysParams):
    """Time at which the quantum Einstein law reaches dispersion sigma_sq:
    t = [sigma^2 - lambda_T^2 ln(1 + sigma^2/lambda_T^2)] / (2 D)."""
    sigma_sq = np.asarray(sigma_sq, dtype=float)
    if np.any(sigma_sq < 0):
        raise ValueError("need sigma_sq >= 0")
    lam2 = params.thermal_wavelength**2
    D = params.einstein_D
    out = (sigma_sq - lam2 * np.log1p(sigma_sq / lam2)) / (2.0 * D)
    return float(out) if out.ndim == 0 else out


def einstein_law_dispersion(t: float, params: PhysParams) -> float:
    """Inverse of `einstein_law_time` by bracketed root finding (the forward
    map is strictly increasing, so brackets always exist)."""
    if t < 0:
        raise ValueError(f"need t >= 0, got {t}")
    if t == 0:
        return 0.0
    lam2 = params.thermal_wavelength**2
    D = params.einstein_D
    # the two asymptotic branches give the scale of the root at any t
    guess = max(2.0 * D * t, math.sqrt(4.0 * D * lam2 * t))
    hi = 2.0 * guess
    for _ in range(200):
        if einstein_law_time(hi, params) >= t:
            break
        hi *= 2.0
    else:
        raise RuntimeError("failed to bracket the dispersion root from above")
    lo = 0.5 * guess
    for _ in range(200):
        if einstein_law_time(lo, params) <= t:
            break
        lo *= 0.5
    else:
        raise RuntimeError("failed to bracket the dispersion root from below")
    return float(
        brentq(
            lambda s2: einstein_law_time(s2, params) - t,
            lo,
            hi,
            rtol=1e-14,
            xtol=1e-30 * guess + 5e-324,  # relative control across many decades
            maxiter=200,
        )
    )


@dataclass(frozen=True)
class NelsonReport:
    nelson_D: float
    einstein_D: float
    quantum_visible: bool


def nelson_condition(params: PhysParams) -> NelsonReport:
    """Quantum diffusion is observable when the Nelson constant hbar/2m
    exceeds the Einstein constant k_B T / b."""
    nelson = params.hbar / (2.0 * params.m)
    einstein = params.k_B * params.T / params.b
    return NelsonReport(nelson, einstein, nelson > einstein)

"""Shared parameter handling, grids and numerical primitives.

Everything downstream (operator kernels, phase-space solvers, moment
closures, coordinate-space diffusion) builds on the types and helpers
defined here.  All quantities carry explicit physical parameters; the
default parameter set is natural units m = omega0 = hbar = k_B = 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "PhysParams",
    "CoordGrid",
    "PhaseGrid",
    "trapezoid",
    "trapezoid_2d",
    "hermitian_eigendecompose",
    "oscillator_eigenpair",
    "oscillator_partition_function",
    "rk4_step",
]


@dataclass(frozen=True)
class PhysParams:
    """Physical constants and model parameters.

    m      particle mass
    omega0 oscillator angular frequency (0 for a free particle)
    b      friction coefficient (mass/time)
    T      bath temperature (energy / k_B; 0 allowed)
    hbar   reduced Planck constant
    k_B    Boltzmann constant
    """

    m: float = 1.0
    omega0: float = 1.0
    b: float = 1.0
    T: float = 1.0
    hbar: float = 1.0
    k_B: float = 1.0

    def __post_init__(self):
        if self.m <= 0:
            raise ValueError(f"mass must be positive, got m={self.m}")
        # b = 0 is admitted so the frictionless Liouville / von Neumann
        # reductions can be exercised; accessors that divide by b guard it.
        if self.b < 0:
            raise ValueError(f"friction must be nonnegative, got b={self.b}")
        if self.hbar <= 0:
            raise ValueError(f"hbar must be positive, got hbar={self.hbar}")
        if self.k_B <= 0:
            raise ValueError(f"k_B must be positive, got k_B={self.k_B}")
        if self.omega0 < 0:
            raise ValueError(f"omega0 must be nonnegative, got omega0={self.omega0}")
        if self.T < 0:
            raise ValueError(f"temperature must be nonnegative, got T={self.T}")

    @property
    def beta(self) -> float:
        """Inverse temperature 1/(k_B T); undefined at T = 0."""
        if self.T == 0:
            raise ValueError("beta is undefined at T = 0")
        return 1.0 / (self.k_B * self.T)

    @property
    def s(self) -> float:
        """Dimensionless quantum scale beta*hbar*omega0/2; undefined at T = 0."""
        return self.beta * self.hbar * self.omega0 / 2.0

    @property
    def einstein_D(self) -> float:
        """Classical Einstein diffusion constant k_B T / b (0 at T = 0)."""
        if self.b == 0:
            raise ValueError("Einstein diffusion constant is undefined at b = 0")
        return self.k_B * self.T / self.b

    @property
    def thermal_wavelength(self) -> float:
        """Thermal de Broglie wavelength hbar / (2 sqrt(m k_B T))."""
        if self.T == 0:
            raise ValueError("thermal wavelength diverges at T = 0")
        return self.hbar / (2.0 * math.sqrt(self.m * self.k_B * self.T))

    @property
    def quantum_time(self) -> float:
        """Crossover time lambda_T^2 / (2 D) below which diffusion is quantum."""
        return self.thermal_wavelength**2 / (2.0 * self.einstein_D)

    @property
    def matsubara2(self) -> float:
        """Second Matsubara frequency 2 k_B T / hbar."""
        return 2.0 * self.k_B * self.T / self.hbar


@dataclass(frozen=True)
class CoordGrid:
    """Uniform 1D coordinate grid with n_x points on [x_min, x_max]."""

    x_min: float
    x_max: float
    n_x: int

    def __post_init__(self):
        if not self.x_max > self.x_min:
            raise ValueError(f"need x_max > x_min, got [{self.x_min}, {self.x_max}]")
        if self.n_x < 8:
            raise ValueError(f"need n_x >= 8, got {self.n_x}")

    @property
    def dx(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @cached_property
    def x(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.n_x)

    @property
    def span(self) -> float:
        return self.x_max - self.x_min


@dataclass(frozen=True)
class PhaseGrid:
    """Uniform 2D phase-space grid; arrays are indexed [i_x, i_p]."""

    x: CoordGrid
    p: CoordGrid

    @property
    def dx(self) -> float:
        return self.x.dx

    @property
    def dp(self) -> float:
        return self.p.dx

    @cached_property
    def X(self) -> np.ndarray:
        return np.broadcast_to(self.x.x[:, None], (self.x.n_x, self.p.n_x))

    @cached_property
    def P(self) -> np.ndarray:
        return np.broadcast_to(self.p.x[None, :], (self.x.n_x, self.p.n_x))

    @classmethod
    def square(cls, lim: float, n: int) -> "PhaseGrid":
        """Symmetric grid [-lim, lim] x [-lim, lim] with n points per axis."""
        return cls(CoordGrid(-lim, lim, n), CoordGrid(-lim, lim, n))


def trapezoid(y: np.ndarray, dx: float, axis: int = -1) -> np.ndarray | float:
    """Trapezoid quadrature on a uniform grid (exact for linear data)."""
    y = np.asarray(y)
    edges = np.take(y, [0, -1], axis=axis).sum(axis=axis)
    return (y.sum(axis=axis) - 0.5 * edges) * dx


def trapezoid_2d(z: np.ndarray, dx: float, dp: float) -> float:
    """Trapezoid quadrature over both axes of a 2D field."""
    return float(trapezoid(trapezoid(z, dp, axis=1), dx, axis=0))


def hermitian_eigendecompose(M: np.ndarray, tol: float = 1e-12):
    """Eigendecomposition of a Hermitian matrix, the single sanctioned route
    to matrix functions (log, exp) in this package.

    Returns (eigenvalues ascending, unitary eigenvector matrix V) with
    M = V diag(w) V^dagger.  Raises if M is not Hermitian within `tol`
    relative Frobenius norm.
    """
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {M.shape}")
    scale = np.linalg.norm(M)
    dev = np.linalg.norm(M - M.conj().T)
    if dev > tol * max(scale, 1.0):
        raise ValueError(
            f"matrix is not Hermitian: |M - M^dag| = {dev:.3e} "
            f"exceeds {tol:.1e} * |M|"
        )
    w, V = np.linalg.eigh(M)
    return w, V


def oscillator_eigenpair(n: int, params: PhysParams, grid: CoordGrid):
    """Energy E_n = hbar*omega0*(n + 1/2) and the normalized Hermite-Gaussian
    eigenfunction phi_n sampled on `grid`.

    The eigenfunctions are built with the stable two-term recurrence for
    normalized Hermite functions, so high n does not overflow.  Raises if the
    grid is too small for level n (boundary amplitude above 1e-8 of max).
    """
    if n < 0:
        raise ValueError(f"need n >= 0, got {n}")
    if params.omega0 <= 0:
        raise ValueError("oscillator eigenfunctions require omega0 > 0")

    alpha = params.m * params.omega0 / params.hbar  # 1 / length^2
    xi = np.sqrt(alpha) * grid.x
    # normalized Hermite functions in xi: integral phi_tilde^2 dxi = 1
    phi_prev = np.zeros_like(xi)
    phi = math.pi ** (-0.25) * np.exp(-0.5 * xi**2)
    for k in range(1, n + 1):
        phi, phi_prev = (
            np.sqrt(2.0 / k) * xi * phi - np.sqrt((k - 1) / k) * phi_prev,
            phi,
        )
    phi = alpha**0.25 * phi  # rescale so integral phi^2 dx = 1

    amax = np.abs(phi).max()
    edge = max(abs(phi[0]), abs(phi[-1]))
    if amax == 0 or edge > 1e-8 * amax:
        raise ValueError(
            f"grid [{grid.x_min}, {grid.x_max}] too small for oscillator level "
            f"n={n}: boundary amplitude {edge:.3e} vs max {amax:.3e}"
        )
    energy = params.hbar * params.omega0 * (n + 0.5)
    return energy, phi


def oscillator_partition_function(beta: float, params: PhysParams, n_terms: int) -> float:
    """Truncated partition sum over oscillator levels Z = sum exp(-beta E_n).

    Converges monotonically from below to 1/(2 sinh(beta hbar omega0 / 2)).
    """
    if beta <= 0:
        raise ValueError(f"need beta > 0, got {beta}")
    if params.omega0 <= 0:
        raise ValueError("partition sum requires omega0 > 0")
    if n_terms < 1:
        raise ValueError(f"need n_terms >= 1, got {n_terms}")
    levels = np.arange(n_terms)
    return float(np.exp(-beta * params.hbar * params.omega0 * (levels + 0.5)).sum())


def rk4_step(f, t: float, y, dt: float):
    """One classical 4th-order Runge-Kutta step for array-valued state."""
    k1 = f(t, y)
    k2 = f(t + 0.5 * dt, y + 0.5 * dt * k1)
    k3 = f(t + 0.5 * dt, y + 0.5 * dt * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

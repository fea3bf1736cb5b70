"""Structural invariant suite.

These checks pin the algebraic identities every kernel must satisfy
regardless of parameters: tracelessness and Hermiticity of the operator
kernels, flux-form norm conservation of the PDE right-hand sides, the
frictionless Liouville / von Neumann reductions, the free-energy-gradient
identity of the classical relaxation term, the thermodynamic coefficient
identities, and the measured grid-convergence order of the stationarity
residuals.  The CLI exposes them as `qrelax check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import PhaseGrid, PhysParams, trapezoid, trapezoid_2d
from . import moments as mom
from . import operator_space as osp
from . import phase_space as ps
from . import coordinate_space as cs

__all__ = ["CheckResult", "run_invariant_suite"]


@dataclass
class CheckResult:
    name: str
    passed: bool
    value: float
    threshold: float
    comparison: str = "<"

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"[{status}] {self.name}: {self.value:.3e} "
            f"(required {self.comparison} {self.threshold:.3e})"
        )


def _less(name, value, threshold):
    return CheckResult(name, value < threshold, value, threshold, "<")


def _greater(name, value, threshold):
    return CheckResult(name, value > threshold, value, threshold, ">")


def _random_density(rng, n) -> osp.DensityMatrix:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    m = a @ a.conj().T + 1e-3 * np.eye(n)
    damp = np.diag(np.exp(-0.25 * np.arange(n)))
    m = damp @ m @ damp
    m /= m.trace().real
    return osp.DensityMatrix(m)


def _operator_kernel_checks(rng) -> list:
    params = PhysParams(T=1.0, b=0.3)
    ops = osp.build_oscillator_operators(24, params)
    rho = _random_density(rng, 24)
    results = []
    kernels = {
        "caldeira-leggett": lambda: osp.rhs_caldeira_leggett(rho, ops),
        "nonlinear": lambda: osp.rhs_nonlinear(rho, ops),
        "linearized": lambda: osp.rhs_linearized(rho, ops, params.beta),
    }
    for name, kern in kernels.items():
        out = kern()
        scale = max(np.abs(out).max(), 1e-300)
        results.append(_less(f"trace of {name} kernel", abs(out.trace()) / scale, 1e-12))
        results.append(
            _less(
                f"hermiticity of {name} kernel",
                np.linalg.norm(out - out.conj().T) / max(np.linalg.norm(out), 1e-300),
                1e-10,
            )
        )
    return results


def _gibbs_fixed_point_checks() -> list:
    params = PhysParams(T=1.0, b=0.2)
    ops = osp.build_oscillator_operators(40, params)
    rho_eq = osp.gibbs_state(1.0, ops)
    block = 20
    scale = osp.friction_scale(rho_eq, ops, block=block)
    res_nl = np.linalg.norm(osp.rhs_nonlinear(rho_eq, ops)[:block, :block]) / scale
    res_lin = np.linalg.norm(osp.rhs_linearized(rho_eq, ops, 1.0)[:block, :block]) / scale
    params2 = PhysParams(T=0.5, b=0.2)
    ops2 = osp.build_oscillator_operators(40, params2)
    rho_eq2 = osp.gibbs_state(2.0, ops2)
    res_cl = np.linalg.norm(
        osp.rhs_caldeira_leggett(rho_eq2, ops2)[:block, :block]
    ) / osp.friction_scale(rho_eq2, ops2, block=block)
    return [
        _less("Gibbs residual of nonlinear kernel", res_nl, 1e-6),
        _less("Gibbs residual of linearized kernel", res_lin, 1e-8),
        _greater("Gibbs residual of Caldeira-Leggett kernel (beta hw0 = 2)", res_cl, 1e-3),
    ]


def _frictionless_reduction_checks(rng) -> list:
    params = PhysParams(T=1.0, b=0.0)
    ops = osp.build_oscillator_operators(24, params)
    rho = _random_density(rng, 24)
    r_cl = osp.rhs_caldeira_leggett(rho, ops)
    r_nl = osp.rhs_nonlinear(rho, ops)
    r_lin = osp.rhs_linearized(rho, ops, 1.0)
    scale = max(np.abs(r_cl).max(), 1e-300)
    dev = max(np.abs(r_cl - r_nl).max(), np.abs(r_cl - r_lin).max()) / scale
    results = [_less("b = 0 operator kernels coincide", dev, 1e-12)]

    grid = PhaseGrid.square(8.0, 97)
    pp = PhysParams(T=1.0, b=0.0)
    field = ps.gaussian_field(grid, pp, mom.MomentState(0.4, -0.3, 1.2, 0.9, 0.2))
    advection = ps.rhs_wigner_oscillator(field, mom.RelaxationModel.CLASSICAL, 1.0)
    for model in (mom.RelaxationModel.EFFECTIVE_TEMPERATURE, mom.RelaxationModel.QUANTUM_FRICTION):
        dev = np.abs(
            ps.rhs_wigner_oscillator(field, model, 1.0) - advection
        ).max() / max(np.abs(advection).max(), 1e-300)
        results.append(_less(f"b = 0 {model.value} reduces to Liouville advection", dev, 1e-12))
    return results


def _norm_conservation_checks() -> list:
    params = PhysParams(T=1.0, b=0.7)
    grid = PhaseGrid.square(10.0, 129)
    field = ps.gaussian_field(grid, params, mom.MomentState(0.3, -0.2, 1.1, 0.9, 0.1))
    results = []
    candidates = {
        "classical kernel": ps.rhs_klein_kramers(field, lambda x: 0.25 * x**4),
        "quantum-friction kernel": ps.rhs_wigner_oscillator(
            field, mom.RelaxationModel.QUANTUM_FRICTION, 1.0
        ),
        "effective-temperature kernel": ps.rhs_wigner_oscillator(
            field, mom.RelaxationModel.EFFECTIVE_TEMPERATURE, 1.0
        ),
        "maxwell-heisenberg kernel": ps.rhs_wigner_oscillator(
            field, mom.RelaxationModel.MAXWELL_HEISENBERG, 1.0, var_x=1.1
        ),
        "semiclassical kernel": ps.rhs_semiclassical(
            field, lambda x: 0.25 * x**4, ps.field_moments(field), 1.0
        ),
    }
    for name, out in candidates.items():
        total = abs(trapezoid_2d(out, grid.dx, grid.dp))
        scale = np.abs(out).max()
        results.append(_less(f"norm conservation of {name}", total / scale, 1e-10))

    cgrid = cs.CoordGrid(-10.0, 10.0, 801)
    dens = cs.gaussian_density(cgrid, params, 0.0, 1.0)
    out = cs.rhs_smoluchowski_bohm(dens, lambda x: 0.5 * x**2)
    results.append(
        _less(
            "norm conservation of overdamped kernel",
            abs(trapezoid(out, cgrid.dx)) / np.abs(out).max(),
            1e-10,
        )
    )
    return results


def _onsager_identity_check() -> CheckResult:
    from .stencils import diff1

    params = PhysParams(T=1.0, b=0.5)
    grid = PhaseGrid.square(7.0, 1601)
    # momentum variance off equilibrium so the relaxation term itself is nonzero
    field = ps.gaussian_field(grid, params, mom.MomentState(0.0, 0.0, 1.0, 1.44, 0.0))
    resid = ps.check_onsager_form(field, ps.harmonic_potential(params))
    f = field.values
    H = grid.P**2 / (2.0 * params.m) + ps.harmonic_potential(params)(grid.x.x)[:, None]
    kT = params.k_B * params.T
    direct = params.b * diff1(
        f * diff1(H, grid.dp, axis=1) + kT * diff1(f, grid.dp, axis=1), grid.dp, axis=1
    )
    inner = np.abs(resid[6:-6, 6:-6]).max()
    return _less(
        "free-energy-gradient identity of the classical kernel",
        inner / np.abs(direct).max(),
        1e-8,
    )


def _coefficient_identity_checks() -> list:
    params = PhysParams()
    s_grid = np.logspace(-3, 1, 50)
    worst_fdt = 0.0
    worst_gh = 0.0
    adiabatic_ok = True
    for s in s_grid:
        beta = 2.0 * s / (params.hbar * params.omega0)
        B = mom.effective_friction(beta, params)
        Dp = mom.momentum_diffusion(beta, params)
        target = mom.mean_energy_quantum(beta, params)
        worst_fdt = max(worst_fdt, abs(Dp / (B * target) - 1.0))
        worst_gh = max(worst_gh, mom.gibbs_helmholtz_residual(beta, params, min(1e-4, beta / 10)))
        if beta * Dp < B:
            adiabatic_ok = False
    return [
        _less("fluctuation-dissipation identity over the s grid", worst_fdt, 1e-12),
        _less("Gibbs-Helmholtz identity over the s grid", worst_gh, 1e-6),
        CheckResult(
            "adiabatic friction exceeds isothermal friction", adiabatic_ok,
            float(adiabatic_ok), 1.0, ">="
        ),
    ]


def _convergence_order_checks() -> list:
    params = PhysParams(T=1.0, b=0.5)
    residuals = []
    sizes = (65, 129, 257)
    for n in sizes:
        grid = PhaseGrid.square(6.5, n)
        w_eq = ps.equilibrium_wigner(1.0, params, grid)
        r = ps.rhs_wigner_oscillator(w_eq, mom.RelaxationModel.QUANTUM_FRICTION, 1.0)
        residuals.append(np.abs(r[3:-3, 3:-3]).max())
    order_q = math.log2(residuals[0] / residuals[1])
    order_q2 = math.log2(residuals[1] / residuals[2])

    residuals_cl = []
    for n in sizes:
        grid = PhaseGrid.square(7.0, n)
        field = ps.gaussian_field(
            grid, params, mom.MomentState(0.0, 0.0, 1.0, 1.0, 0.0)
        )
        r = ps.rhs_klein_kramers(field, ps.harmonic_potential(params))
        residuals_cl.append(np.abs(r[3:-3, 3:-3]).max())
    order_c = math.log2(residuals_cl[1] / residuals_cl[2])
    return [
        _greater("convergence order of quantum stationarity residual (65->129)", order_q, 3.5),
        _greater("convergence order of quantum stationarity residual (129->257)", order_q2, 3.5),
        _greater("convergence order of classical stationarity residual (129->257)", order_c, 3.5),
    ]


def run_invariant_suite(seed: int = 0) -> list:
    """Run every structural check; returns the list of CheckResult."""
    rng = np.random.default_rng(seed)
    results = []
    results += _operator_kernel_checks(rng)
    results += _gibbs_fixed_point_checks()
    results += _frictionless_reduction_checks(rng)
    results += _norm_conservation_checks()
    results.append(_onsager_identity_check())
    results += _coefficient_identity_checks()
    results += _convergence_order_checks()
    return results

import math

import numpy as np
import pytest

from qrelax.core import PhaseGrid, PhysParams, trapezoid_2d
from qrelax.moments import (
    MomentState,
    RelaxationModel,
    evolve_moments,
    maxwell_heisenberg_fixed_point,
    model_coefficients,
    quantum_fixed_point,
)
from qrelax.phase_space import (
    WignerField,
    check_onsager_form,
    equilibrium_variances,
    equilibrium_wigner,
    evolve_wigner,
    field_energy,
    field_moments,
    gaussian_field,
    harmonic_potential,
    rhs_klein_kramers,
    rhs_semiclassical,
    rhs_wigner_oscillator,
    shannon_wigner_entropy,
)
from qrelax.stencils import diff1, diff2, diff3


def quartic(x):
    return 0.25 * x**4


def kk_reference(field, potential):
    """Independent pointwise transcription of the classical kernel, kept
    deliberately loop-based so it shares no code path with the library."""
    g, p = field.grid, field.params
    w = field.values
    u = potential(g.x.x)
    u1 = diff1(u, g.dx)
    out = np.empty_like(w)
    dwdx = diff1(w, g.dx, axis=0)
    dwdp = diff1(w, g.dp, axis=1)
    dpw = diff1(g.P * w, g.dp, axis=1)
    d2w = diff2(w, g.dp, axis=1)
    for i in range(w.shape[0]):
        for j in range(w.shape[1]):
            out[i, j] = (
                -(g.p.x[j] / p.m) * dwdx[i, j]
                + u1[i] * dwdp[i, j]
                + (p.b / p.m) * dpw[i, j]
                + p.b * p.k_B * p.T * d2w[i, j]
            )
    return out


def test_equilibrium_wigner_values():
    p = PhysParams()
    grid = PhaseGrid.square(6.5, 257)
    w = equilibrium_wigner(1.0, p, grid)
    assert w.values[128, 128] == pytest.approx(math.tanh(0.5) / math.pi, abs=1e-5)
    m = field_moments(w)
    coth = 1.0 / math.tanh(0.5)
    assert m.var_x == pytest.approx(coth / 2.0, abs=1e-6)
    assert m.var_p == pytest.approx(coth / 2.0, abs=1e-6)


def test_equilibrium_wigner_ground_state():
    p = PhysParams(T=0.0)
    grid = PhaseGrid.square(5.0, 201)
    w = equilibrium_wigner(math.inf, p, grid)
    assert w.values[100, 100] == pytest.approx(1.0 / math.pi, abs=1e-6)
    assert field_moments(w).var_x == pytest.approx(0.5, abs=1e-8)
    # large but finite beta agrees with the strict limit
    w100 = equilibrium_wigner(100.0, PhysParams(), grid)
    assert np.abs(w100.values - w.values).max() < 1e-10


def test_equilibrium_wigner_classical_limit():
    p = PhysParams(T=100.0)
    grid = PhaseGrid.square(80.0, 201)
    w = equilibrium_wigner(0.01, p, grid)
    m = field_moments(w)
    assert m.var_x == pytest.approx(100.0, rel=1e-3)  # k_B T / m w0^2


def test_equilibrium_wigner_grid_guard():
    p = PhysParams()
    with pytest.raises(ValueError):
        equilibrium_wigner(1.0, p, PhaseGrid.square(2.0, 65))


def test_klein_kramers_gibbs_residual_converges():
    p = PhysParams(T=1.0, b=0.5)
    residuals = []
    for n in (129, 257):
        grid = PhaseGrid.square(7.0, n)
        f_eq = gaussian_field(grid, p, MomentState(0.0, 0.0, 1.0, 1.0, 0.0))
        r = rhs_klein_kramers(f_eq, harmonic_potential(p))
        residuals.append(np.abs(r[3:-3, 3:-3]).max())
    scale = 1.0 / (2.0 * math.pi)
    assert residuals[-1] < 1e-3 * scale
    assert residuals[0] / residuals[1] > 12.0


def test_klein_kramers_frictionless_is_advection():
    p = PhysParams(T=1.0, b=0.0)
    grid = PhaseGrid.square(7.0, 129)
    f = gaussian_field(grid, p, MomentState(0.5, -0.4, 1.2, 0.8, 0.1))
    out = rhs_klein_kramers(f, harmonic_potential(p))
    advection = (
        -(grid.P / p.m) * diff1(f.values, grid.dx, axis=0)
        + (p.m * p.omega0**2 * grid.x.x)[:, None] * diff1(f.values, grid.dp, axis=1)
    )
    np.testing.assert_allclose(out, advection, atol=1e-15)


def test_klein_kramers_matches_independent_transcription():
    p = PhysParams(T=0.7, b=0.4)
    grid = PhaseGrid.square(6.0, 65)
    f = gaussian_field(grid, p, MomentState(0.2, 0.1, 0.9, 1.1, -0.1))
    out = rhs_klein_kramers(f, quartic)
    ref = kk_reference(f, quartic)
    assert np.abs(out - ref).max() < 1e-12


def test_onsager_identity_on_gaussian():
    p = PhysParams(T=1.0, b=0.5)
    grid = PhaseGrid.square(7.0, 1601)
    f = gaussian_field(grid, p, MomentState(0.0, 0.0, 1.0, 1.44, 0.0))
    resid = check_onsager_form(f, harmonic_potential(p))
    direct = p.b * diff1(
        f.values * diff1(grid.P**2 / (2 * p.m) + harmonic_potential(p)(grid.x.x)[:, None],
                         grid.dp, axis=1)
        + p.k_B * p.T * diff1(f.values, grid.dp, axis=1),
        grid.dp, axis=1,
    )
    assert np.abs(resid[6:-6, 6:-6]).max() < 1e-8 * np.abs(direct).max()


def test_onsager_identity_grid_convergence():
    p = PhysParams(T=1.0, b=0.5)
    residuals = []
    for n in (201, 401):
        grid = PhaseGrid.square(6.0, n)
        f = gaussian_field(grid, p, MomentState(0.0, 0.0, 1.0, 1.2, 0.0))
        resid = check_onsager_form(f, harmonic_potential(p))
        residuals.append(np.abs(resid[8:-8, 8:-8]).max())
    assert residuals[0] / residuals[1] > 12.0


def test_onsager_requires_positive_density():
    p = PhysParams()
    grid = PhaseGrid.square(5.0, 65)
    f = gaussian_field(grid, p, MomentState(0.0, 0.0, 1.0, 1.0, 0.0))
    f.values[3, 4] = -1e-4
    with pytest.raises(ValueError):
        check_onsager_form(f, harmonic_potential(p))


def test_quantum_friction_stationarity_converges():
    p = PhysParams(b=0.5)
    residuals = []
    for n in (65, 129, 257):
        grid = PhaseGrid.square(6.5, n)
        w_eq = equilibrium_wigner(1.0, p, grid)
        r = rhs_wigner_oscillator(w_eq, RelaxationModel.QUANTUM_FRICTION, 1.0)
        residuals.append(np.abs(r[3:-3, 3:-3]).max())
    assert residuals[0] / residuals[1] > 12.0
    assert residuals[1] / residuals[2] > 12.0


def test_effective_temperature_classical_reduction():
    # coefficients reduce to (b/m, b k_B T) as beta -> 0
    p = PhysParams(T=1e6, b=0.7)
    gamma, dp = model_coefficients(RelaxationModel.EFFECTIVE_TEMPERATURE, 1e-6, p)
    assert gamma == pytest.approx(p.b / p.m, rel=1e-12)
    assert dp == pytest.approx(p.b * 1e6, rel=1e-6)


def test_maxwell_heisenberg_self_consistent_stationarity():
    p = PhysParams(b=0.5)
    fp = maxwell_heisenberg_fixed_point(1.0, p)
    grid = PhaseGrid.square(8.0, 257)
    w = gaussian_field(grid, p, fp)
    r = rhs_wigner_oscillator(w, RelaxationModel.MAXWELL_HEISENBERG, 1.0, var_x=fp.var_x)
    scale = np.abs(w.values).max() * p.b
    assert np.abs(r[3:-3, 3:-3]).max() < 1e-5 * scale


def test_maxwell_heisenberg_requires_var_x():
    p = PhysParams(b=0.5)
    grid = PhaseGrid.square(6.0, 65)
    w = gaussian_field(grid, p, MomentState(0.0, 0.0, 1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        rhs_wigner_oscillator(w, RelaxationModel.MAXWELL_HEISENBERG, 1.0)


def test_semiclassical_cubic_vanishes_for_harmonic():
    p = PhysParams(T=1.0, b=0.5)
    grid = PhaseGrid.square(6.0, 129)
    state = MomentState(0.0, 0.0, 0.8, 1.1, 0.0)
    w = gaussian_field(grid, p, state)
    out = rhs_semiclassical(w, harmonic_potential(p), state, 1.0)
    classical = rhs_klein_kramers(w, harmonic_potential(p))
    entropy = p.b * 1.0 * p.hbar**2 / (4.0 * state.covariance_det) * diff2(
        w.values, grid.dp, axis=1
    )
    assert np.abs(out - classical - entropy).max() < 1e-14


def test_semiclassical_cubic_matches_gaussian_oracle():
    p = PhysParams(T=1.0, b=0.5)
    grid = PhaseGrid.square(6.0, 257)
    state = MomentState(0.0, 0.0, 0.8, 1.1, 0.0)
    w = gaussian_field(grid, p, state)
    out = rhs_semiclassical(w, quartic, state, 1.0)
    classical = rhs_klein_kramers(w, quartic)
    entropy = p.b * 1.0 * p.hbar**2 / (4.0 * state.covariance_det) * diff2(
        w.values, grid.dp, axis=1
    )
    cubic = out - classical - entropy
    vp = state.var_p
    d3_analytic = (3.0 * grid.P / vp**2 - grid.P**3 / vp**3) * w.values
    cubic_analytic = -(p.hbar**2 / 24.0) * (6.0 * grid.X) * d3_analytic
    err = np.abs(cubic - cubic_analytic)[4:-4, 4:-4].max()
    assert err < 1e-4 * np.abs(cubic_analytic).max()


def test_semiclassical_classical_limit():
    p = PhysParams(T=1.0, b=0.5, hbar=1e-12)
    grid = PhaseGrid.square(6.0, 129)
    state = MomentState(0.0, 0.0, 0.9, 1.0, 0.0)
    w = gaussian_field(grid, p, state)
    out = rhs_semiclassical(w, quartic, state, 1.0)
    classical = rhs_klein_kramers(w, quartic)
    # hbar^2 prefactors push both corrections below double precision
    assert np.abs(out - classical).max() < 1e-20


def test_semiclassical_rejects_degenerate_covariance():
    p = PhysParams()
    grid = PhaseGrid.square(6.0, 65)
    w = gaussian_field(grid, p, MomentState(0.0, 0.0, 1.0, 1.0, 0.0))
    with pytest.raises(ValueError):
        rhs_semiclassical(w, quartic, MomentState(0, 0, 1.0, 1.0, 1.0000001), 1.0)


def test_norm_conservation_of_kernels():
    p = PhysParams(T=1.0, b=0.7)
    grid = PhaseGrid.square(10.0, 129)
    f = gaussian_field(grid, p, MomentState(0.3, -0.2, 1.1, 0.9, 0.1))
    kernels = [
        rhs_klein_kramers(f, quartic),
        rhs_wigner_oscillator(f, RelaxationModel.QUANTUM_FRICTION, 1.0),
        rhs_semiclassical(f, quartic, field_moments(f), 1.0),
    ]
    for out in kernels:
        assert abs(trapezoid_2d(out, grid.dx, grid.dp)) < 1e-10 * np.abs(out).max()


def test_field_diagnostics():
    p = PhysParams()
    grid = PhaseGrid.square(8.0, 257)
    w = gaussian_field(grid, p, MomentState(0.0, 0.0, 1.0, 1.0, 0.0))
    ent = shannon_wigner_entropy(w)
    assert ent.value == pytest.approx(1.0 + math.log(2.0 * math.pi), abs=1e-4)
    assert ent.negative_fraction == 0.0

    w_eq = equilibrium_wigner(1.0, p, PhaseGrid.square(6.5, 257))
    assert field_energy(w_eq) == pytest.approx(0.5 / math.tanh(0.5), abs=1e-4)

    shifted = gaussian_field(grid, p, MomentState(1.25, 0.0, 1.0, 1.0, 0.0))
    assert field_moments(shifted).mean_x == pytest.approx(1.25, abs=1e-9)


def test_entropy_flags_negative_volume():
    p = PhysParams()
    grid = PhaseGrid.square(6.0, 65)
    w = gaussian_field(grid, p, MomentState(0.0, 0.0, 1.0, 1.0, 0.0))
    w.values[30:33, 30:33] = -0.01
    ent = shannon_wigner_entropy(w)
    assert ent.negative_fraction > 0.0


def test_frictionless_oscillation_conserves_energy():
    p = PhysParams(T=1.0, b=0.0)
    grid = PhaseGrid.square(8.0, 129)
    w0 = gaussian_field(grid, p, MomentState(1.5, 0.0, 0.5, 0.5, 0.0))
    dt = 0.9 * 0.4 * grid.dx / 8.0
    traj = evolve_wigner(w0, 5 * 2 * math.pi, dt, model=RelaxationModel.CLASSICAL,
                         beta=1.0, stride=200)
    assert abs(traj.energy[-1] / traj.energy[0] - 1.0) < 1e-5
    # the mean oscillates at omega0: back near the start after 5 periods
    assert traj.moment_column("mean_x")[-1] == pytest.approx(1.5, abs=1e-3)


def test_quantum_friction_terminal_dispersion_on_grid():
    p = PhysParams(b=0.5)
    grid = PhaseGrid.square(6.3, 129)
    fp = quantum_fixed_point(1.0, p)
    start = MomentState(0.0, 0.0, 1.2 * fp.var_x, 0.8 * fp.var_p, 0.0)
    w0 = gaussian_field(grid, p, start)
    gamma, d_p = model_coefficients(RelaxationModel.QUANTUM_FRICTION, 1.0, p)
    dt = 0.9 * 0.4 * grid.dp**2 / (2.0 * d_p)
    traj = evolve_wigner(w0, 6.5 / gamma, dt, model=RelaxationModel.QUANTUM_FRICTION,
                         beta=1.0, stride=200)
    assert traj.moments[-1].var_p == pytest.approx(fp.var_p, rel=1e-3)
    assert abs(traj.norm[-1] - 1.0) < 1e-5


def test_maxwell_heisenberg_grid_matches_closure():
    p = PhysParams(b=0.5)
    grid = PhaseGrid.square(6.5, 129)
    fp = maxwell_heisenberg_fixed_point(1.0, p)
    start = MomentState(0.0, 0.0, 0.75 * fp.var_x, 1.25 * fp.var_p, 0.0)
    w0 = gaussian_field(grid, p, start)
    _, d_p = model_coefficients(RelaxationModel.MAXWELL_HEISENBERG, 1.0, p,
                                var_x=start.var_x)
    dt = 0.9 * 0.4 * grid.dp**2 / (2.0 * d_p)
    traj = evolve_wigner(w0, 8.0, dt, model=RelaxationModel.MAXWELL_HEISENBERG,
                         beta=1.0, stride=50)
    ode = evolve_moments(start, RelaxationModel.MAXWELL_HEISENBERG, 1.0, 8.0, 1e-3, p)
    var_ode = np.interp(traj.t, ode.t, ode.column("var_x"))
    assert np.abs(traj.moment_column("var_x") / var_ode - 1.0).max() < 1e-3


def test_paired_models_identical_terminal_fields():
    p = PhysParams(b=0.5)
    grid = PhaseGrid.square(6.5, 97)
    fp = quantum_fixed_point(1.0, p)
    start = MomentState(0.0, 0.0, 1.3 * fp.var_x, 0.7 * fp.var_p, 0.0)
    _, d5 = model_coefficients(RelaxationModel.EFFECTIVE_TEMPERATURE, 1.0, p)
    _, d10 = model_coefficients(RelaxationModel.QUANTUM_FRICTION, 1.0, p)
    dt = 0.9 * 0.4 * grid.dp**2 / (2.0 * max(d5, d10))
    tr5 = evolve_wigner(gaussian_field(grid, p, start), 12.0, dt,
                        model=RelaxationModel.EFFECTIVE_TEMPERATURE, beta=1.0, stride=500)
    tr10 = evolve_wigner(gaussian_field(grid, p, start), 12.0, dt,
                         model=RelaxationModel.QUANTUM_FRICTION, beta=1.0, stride=500)
    l1 = trapezoid_2d(np.abs(tr5.terminal.values - tr10.terminal.values),
                      grid.dx, grid.dp)
    assert l1 < 1e-3


def test_cfl_guard():
    p = PhysParams(b=0.5)
    grid = PhaseGrid.square(6.3, 65)
    w0 = equilibrium_wigner(1.0, p, grid)
    with pytest.raises(ValueError):
        evolve_wigner(w0, 1.0, 1.0, model=RelaxationModel.QUANTUM_FRICTION, beta=1.0)


def test_classical_density_negativity_guard():
    p = PhysParams()
    grid = PhaseGrid.square(5.0, 65)
    w = gaussian_field(grid, p, MomentState(0.0, 0.0, 1.0, 1.0, 0.0))
    w.values[2, 2] = -1e-3
    with pytest.raises(ValueError):
        w.validate_classical()


def test_snapshots_and_csv(tmp_path):
    p = PhysParams(b=0.5)
    grid = PhaseGrid.square(6.3, 65)
    w0 = equilibrium_wigner(1.0, p, grid)
    _, d_p = model_coefficients(RelaxationModel.QUANTUM_FRICTION, 1.0, p)
    dt = 0.9 * 0.4 * grid.dp**2 / (2.0 * d_p)
    traj = evolve_wigner(w0, 20 * dt, dt, model=RelaxationModel.QUANTUM_FRICTION,
                         beta=1.0, stride=5, snapshot_times=[0.0, 10 * dt])
    assert len(traj.snapshots) == 2
    path = tmp_path / "traj.csv"
    traj.to_csv(path)
    assert path.read_text().startswith("t,mean_x,mean_p,var_x,var_p,cov_xp,norm,")

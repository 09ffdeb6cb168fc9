import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from supsharp.discretization import assemble, build_grid, energy
from supsharp.inner import (
    InvalidPotentialError,
    MethodInapplicableError,
    _piece_scan,
    make_inner_problem,
    positivity_and_ode_check,
    solve_linear,
    solve_obstacle,
    solve_transfer,
    transfer_value,
)
from supsharp.potential import Potential, StepFunction, delta_potential

# Derived by hand, cross-checked against the discrete solvers below:
# step 1|4 at a=0: decaying fluxes sqrt(1) + sqrt(4) = 3.
F_STEP_AT_ZERO = 3.0
# symmetric well alpha=1, beta=4 on (-1,1): the minimizer is 1 on a centered
# contact interval, trig transition of width d = atan(sqrt(alpha/beta))/
# sqrt(beta) on each side (transition+tail energies cancel exactly), so
# F = -beta * (c - b - 2 d).
WELL_D = math.atan(0.5) / 2.0
WELL_M = -4.0 * (2.0 - 2.0 * WELL_D)


# --- transfer: closed forms and applicability gates ------------------------

def test_transfer_constant_exact():
    for alpha in (0.25, 1.0, 4.0):
        for a in (-2.0, 0.0, 1.7):
            v, _, _ = transfer_value(Potential.constant(alpha), a)
            assert v == 2.0 * math.sqrt(alpha)


def test_transfer_delta_at_peak_exact():
    for alpha, beta in ((1.0, 1.0), (1.0, -1.0), (4.0, 9.0), (0.5, -0.5)):
        v, _, _ = transfer_value(delta_potential(alpha, beta), 0.0)
        assert v == 2.0 * math.sqrt(alpha) + beta


def test_transfer_step_value():
    v, _, _ = transfer_value(Potential.step(0.0, 1.0, 4.0), 0.0)
    assert math.isclose(v, F_STEP_AT_ZERO, rel_tol=1e-14)


def test_transfer_rejects_nonpositive_tail():
    with pytest.raises(InvalidPotentialError):
        transfer_value(Potential.constant(0.0), 0.0)
    with pytest.raises(InvalidPotentialError):
        transfer_value(Potential.step(0.0, -1.0, 4.0), 1.0)


def test_transfer_rejects_trapped_well():
    p = Potential.square_well(1.0, 4.0, -1.0, 1.0)
    with pytest.raises(MethodInapplicableError):
        transfer_value(p, 0.0)
    with pytest.raises(MethodInapplicableError):
        transfer_value(p, 3.0)   # the well is crossed even for far peaks


def test_transfer_profile_matches_exponential():
    p = Potential.constant(1.0)
    sol = solve_transfer(p, 0.0)
    exact = np.exp(-np.abs(sol.x))
    exact[0] = exact[-1] = 0.0
    assert np.max(np.abs(sol.u - exact)) < 1e-12


def test_transfer_value_matches_energy_quadrature():
    # independent oracle: assembled energy of the sampled closed form must
    # sit just above the flux-formula value, within O(h^2)
    p = Potential(StepFunction((-1.0, 0.5), (2.0,), 1.0, 1.5),
                  StepFunction((0.0, 0.5), (0.75,), 0.0, 0.0),
                  ((-0.25, 0.5),))
    a = 0.2
    grid = build_grid(p, a, h_target=0.004)
    sol = solve_transfer(p, a, grid=grid)
    e = energy(assemble(p, grid), sol.u)
    assert e >= sol.value - 1e-9
    assert e - sol.value < 2e-4


# --- piece scan: brute-force oracle ----------------------------------------

@given(st.floats(-6.0, 6.0), st.floats(0.05, 4.0),
       st.floats(-2.0, 2.0), st.floats(-3.0, 3.0))
@settings(max_examples=200, deadline=None)
def test_piece_scan_against_dense_sampling(c, length, u0, du0):
    # propagated states are never both ~0, and zeros within float-eps of a
    # piece edge are tangencies handled by the sign checks of the caller
    assume(u0 == 0.0 or abs(u0) > 1e-9)
    assume(du0 == 0.0 or abs(du0) > 1e-9)
    assume(abs(u0) + abs(du0) > 1e-6)
    assume(c == 0.0 or abs(c) > 1e-5)
    lo, hi, zeros = _piece_scan(c, length, u0, du0)
    ts = np.linspace(0.0, length, 4001)
    if c > 0:
        s = math.sqrt(c)
        vals = u0 * np.cosh(s * ts) + du0 / s * np.sinh(s * ts)
    elif c < 0:
        w = math.sqrt(-c)
        vals = u0 * np.cos(w * ts) + du0 / w * np.sin(w * ts)
    else:
        vals = u0 + du0 * ts
    scale = np.max(np.abs(vals)) + 1e-30
    assert lo <= vals.min() + 1e-9 * scale
    assert hi >= vals.max() - 1e-9 * scale
    sampled_zeros = int(np.sum(vals[:-1] * vals[1:] < 0.0)
                        + np.sum(vals[1:-1] == 0.0))
    # dense sampling can miss tangential zeros but never finds extra ones
    assert zeros >= sampled_zeros - 1
    if min(abs(vals.min()), abs(vals.max())) > 1e-6 * scale:
        assert zeros == sampled_zeros


# --- linear solve -----------------------------------------------------------

def test_linear_constant_profile_and_value():
    pr = make_inner_problem(Potential.constant(1.0), 0.0)
    sol = solve_linear(pr)
    assert abs(sol.value - 2.0) < 1e-4
    exact = np.exp(-np.abs(pr.grid.nodes))
    exact[0] = exact[-1] = 0.0
    assert np.max(np.abs(sol.u - exact)) < 1e-4
    assert sol.certificate == "global-spd"


def test_linear_constant_four_any_peak():
    pr = make_inner_problem(Potential.constant(4.0), 1.3)
    sol = solve_linear(pr)
    assert abs(sol.value - 4.0) < 1e-3
    exact = np.exp(-2.0 * np.abs(pr.grid.nodes - 1.3))
    exact[0] = exact[-1] = 0.0
    assert np.max(np.abs(sol.u - exact)) < 1e-4


def test_linear_delta_value_against_transfer_oracle():
    p = delta_potential(1.0, 1.0)
    oracle, _, _ = transfer_value(p, 0.0)
    assert oracle == 3.0
    sol = solve_linear(make_inner_problem(p, 0.0))
    assert abs(sol.value - oracle) < 1e-4


def test_linear_refuses_trapped_well():
    pr = make_inner_problem(Potential.square_well(1.0, 4.0, -1.0, 1.0), 0.0)
    with pytest.raises(MethodInapplicableError):
        solve_linear(pr)


# --- obstacle solve ---------------------------------------------------------

def test_obstacle_agrees_with_linear():
    p = Potential.step(0.0, 1.0, 2.0)
    pr = make_inner_problem(p, 0.4)
    lin = solve_linear(pr)
    obs = solve_obstacle(pr)
    assert obs.converged
    assert abs(obs.value - lin.value) < 1e-7
    assert np.max(np.abs(obs.u - lin.u)) < 1e-6


def test_obstacle_warm_start_converges_immediately():
    pr = make_inner_problem(Potential.constant(1.0), 0.0)
    sol = solve_obstacle(pr)
    assert sol.converged
    assert sol.iterations <= 4
    assert abs(sol.value - 2.0) < 1e-4


def test_obstacle_well_contact_structure():
    p = Potential.square_well(1.0, 4.0, -1.0, 1.0)
    pr = make_inner_problem(p, 0.0)
    sol = solve_obstacle(pr)
    assert sol.converged
    assert abs(sol.value - WELL_M) < 5e-4
    assert len(sol.contact_set) > 0
    xs = sol.x[sol.contact_set]
    h = pr.grid.widths().max()
    edge = 1.0 - WELL_D
    assert abs(xs.min() + edge) < 3 * h
    assert abs(xs.max() - edge) < 3 * h
    assert abs(xs.min() + xs.max()) < 2 * h          # symmetric interval
    assert np.max(np.abs(sol.u)) <= 1.0 + 1e-12
    rep = positivity_and_ode_check(sol, pr, tol=16.0 * h ** 2 * 3)
    assert rep.passed


def test_obstacle_nonconvergence_is_flagged_upper_bound():
    p = Potential.square_well(1.0, 4.0, -1.0, 1.0)
    pr = make_inner_problem(p, 0.5)
    rough = solve_obstacle(pr, tol=1e-15, max_iter=8)
    assert not rough.converged
    assert rough.certificate == "not-converged"
    good = solve_obstacle(pr)
    assert good.converged
    assert rough.value >= good.value - 1e-9


def test_obstacle_projected_gradient_fallback():
    # depth 20 on a 0.5-width mesh makes a diagonal entry nonpositive
    p = Potential.square_well(1.0, 20.0, -2.0, 2.0)
    pr = make_inner_problem(p, 0.0, margin=5.0, h_target=0.5)
    diag, _ = pr.form.matrix()
    assert np.any(diag[1:-1] <= 0.0)
    sol = solve_obstacle(pr, tol=1e-4, max_iter=200_000)
    assert sol.method == "obstacle"
    assert sol.u[pr.peak_index] == 1.0
    assert np.max(np.abs(sol.u)) <= 1.0 + 1e-12
    assert sol.converged


# --- cross-method agreement -------------------------------------------------

def _random_positive_potential(rng):
    n_bp = rng.integers(1, 4)
    bps = np.sort(rng.uniform(-2.0, 2.0, n_bp))
    while len(np.unique(bps)) != n_bp or np.min(np.diff(bps), initial=1) < 0.05:
        bps = np.sort(rng.uniform(-2.0, 2.0, n_bp))
    vals = rng.uniform(0.5, 1.8, max(0, n_bp - 1))
    lt, rt = rng.uniform(0.5, 1.8, 2)
    if n_bp == 0:
        rt = lt
    atoms = []
    if rng.random() < 0.6:
        atoms.append((rng.uniform(-2.0, 2.0), rng.uniform(0.0, 1.0)))
    return Potential(StepFunction(tuple(bps), tuple(vals), lt, rt),
                     atoms=tuple(atoms))


def test_methods_agree_on_positive_potentials():
    rng = np.random.default_rng(11)
    for _ in range(4):
        p = _random_positive_potential(rng)
        a = float(rng.uniform(-2.5, 2.5))
        ft, _, _ = transfer_value(p, a)
        pr = make_inner_problem(p, a)
        lin = solve_linear(pr)
        obs = solve_obstacle(pr)
        assert abs(lin.value - ft) < 1e-4
        assert abs(obs.value - ft) < 1e-4
        # converged minimizers are nonnegative on this class
        assert lin.u.min() > -1e-12
        assert obs.u.min() > -1e-12


# --- envelopes (two-sided exponential bounds) -------------------------------

def _envelope_violations(p, a, sol, grid):
    v0, v1 = p.essential_bounds()
    s0, s1 = math.sqrt(v0), math.sqrt(v1)
    xs = grid.nodes
    h = grid.widths().max()
    d = np.abs(xs - a)
    keep = (xs - xs[0] >= 0.5 * grid.margin) & (xs[-1] - xs >= 0.5 * grid.margin)
    up = np.exp(-s0 * d)
    lo = np.exp(-s1 * d)
    slack = v1 ** 1.5 * h ** 2 * (1.0 + s1 * d) * up + 1e-12
    over = np.max((sol.u - up - slack)[keep], initial=-1.0)
    under = np.max((lo - slack - sol.u)[keep], initial=-1.0)
    return over, under


def test_envelopes_on_random_positive_potentials():
    rng = np.random.default_rng(23)
    for _ in range(4):
        p = _random_positive_potential(rng)
        p = Potential(p.bounded)           # pure bounded part
        a = float(rng.uniform(-2.0, 2.0))
        pr = make_inner_problem(p, a)
        sol = solve_linear(pr)
        over, under = _envelope_violations(p, a, sol, pr.grid)
        assert over <= 0.0
        assert under <= 0.0


def test_derivative_envelope_on_random_potentials():
    rng = np.random.default_rng(37)
    for _ in range(2):
        p = Potential(_random_positive_potential(rng).bounded)
        a = float(rng.uniform(-1.5, 1.5))
        _check_derivative_envelope(p, a)


def test_derivative_envelope_on_step_potential():
    _check_derivative_envelope(Potential.step(0.0, 1.0, 2.25), 0.6)


def _check_derivative_envelope(p, a):
    pr = make_inner_problem(p, a)
    sol = solve_linear(pr)
    v0, v1 = p.essential_bounds()
    s0, s1 = math.sqrt(v0), math.sqrt(v1)
    xs, u = pr.grid.nodes, sol.u
    h = pr.grid.widths().max()
    w = np.diff(xs)
    dq = np.diff(u) / w
    keep = (xs[:-1] - xs[0] >= 0.5 * pr.grid.margin) \
        & (xs[-1] - xs[1:] >= 0.5 * pr.grid.margin)
    right = keep & (xs[:-1] >= a)
    left = keep & (xs[1:] <= a)
    for mask, signed, x_near, x_far in (
            (right, -dq, xs[:-1], xs[1:]),
            (left, dq, xs[1:], xs[:-1])):
        d_near = np.abs(x_near - a)
        d_far = np.abs(x_far - a)
        slack = v1 ** 2 * h ** 2 * (1.0 + s1 * d_near) * np.exp(-s0 * d_near) \
            + 1e-12
        lo_bound = (v0 / s1) * np.exp(-s1 * d_far) - slack
        hi_bound = (v1 / s0) * np.exp(-s0 * d_near) + slack
        assert np.all(signed[mask] >= lo_bound[mask])
        assert np.all(signed[mask] <= hi_bound[mask])


# --- solution checks ---------------------------------------------------------

def test_ode_check_passes_on_constant():
    pr = make_inner_problem(Potential.constant(1.0), 0.0)
    sol = solve_linear(pr)
    h = pr.grid.widths().max()
    rep = positivity_and_ode_check(sol, pr, tol=3.0 * h ** 2)
    assert rep.applicable and rep.passed
    assert rep.max_ode_residual < 3.0 * h ** 2


def test_ode_check_detects_injected_negative_value():
    pr = make_inner_problem(Potential.constant(1.0), 0.0)
    sol = solve_linear(pr)
    sol.u[pr.peak_index + 5] = -0.1
    rep = positivity_and_ode_check(sol, pr, tol=1.0)
    assert not rep.positivity_pass
    assert not rep.passed


def test_ode_check_not_applicable_for_negative_offpeak_atom():
    p = delta_potential(1.0, -1.0)
    pr = make_inner_problem(p, 1.0)
    sol = solve_obstacle(pr)
    rep = positivity_and_ode_check(sol, pr, tol=1e-2)
    assert not rep.applicable
    assert "negative atom" in rep.reason

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from supsharp.discretization import (
    AssemblyContractError,
    Grid,
    assemble,
    build_grid,
    embedding_check,
    energy,
)
from supsharp.potential import Potential, StepFunction


def test_build_grid_uniform_constant():
    g = build_grid(Potential.constant(1.0), 0.0, margin=20.0, h_target=0.1)
    assert (g.left, g.right) == (-20.0, 20.0)
    assert len(g) == 401
    assert g.peak_index == 200
    assert g.nodes[200] == 0.0


def test_build_grid_inserts_atom_node():
    p = Potential.constant(1.0, atoms=((0.05, 1.0),))
    g = build_grid(p, 0.0, margin=2.0, h_target=0.1)
    assert 0.05 in g.nodes


def test_build_grid_inserts_breakpoints_and_peak():
    p = Potential.square_well(1.0, 4.0, -1.0, 1.0)
    g = build_grid(p, 0.3, margin=2.0, h_target=0.1)
    for x in (-1.0, 0.3, 1.0):
        assert x in g.nodes
    assert g.widths().max() <= 0.1 + 1e-12


def test_build_grid_rejects_bad_inputs():
    p = Potential.constant(1.0)
    with pytest.raises(ValueError):
        build_grid(p, 0.0, margin=-1.0)
    with pytest.raises(ValueError):
        build_grid(p, 0.0, margin=1.0, h_target=0.0)
    with pytest.raises(ValueError):
        build_grid(p, math.inf)


def test_stiffness_interior_entry():
    # two unit elements, V = 0: interior diagonal is 1/h + 1/h = 2
    g = Grid(np.array([0.0, 1.0, 2.0]), 1, 1.0)
    f = assemble(Potential.constant(0.0), g)
    assert f.k_diag[1] == 2.0
    assert np.all(f.m_diag == 0.0)


def test_mass_diagonal_exact_hat_integral():
    alpha, h = 3.0, 0.25
    g = Grid(np.array([0.0, h, 2 * h]), 1, 1.0)
    f = assemble(Potential.constant(alpha), g)
    # each adjacent element contributes alpha*h/3 to the diagonal
    assert math.isclose(f.m_diag[1], 2 * alpha * h / 3.0, rel_tol=1e-15)
    assert math.isclose(f.m_off[0], alpha * h / 6.0, rel_tol=1e-15)


def test_atom_adds_weight_to_hat_energy():
    beta = 0.7
    p = Potential.constant(0.0, atoms=((1.0, beta),))
    g = Grid(np.array([0.0, 1.0, 2.0]), 1, 1.0)
    f = assemble(p, g)
    hat = np.array([0.0, 1.0, 0.0])
    assert math.isclose(energy(f, hat), 2.0 + beta, rel_tol=1e-15)


def test_stiffness_rows_sum_to_zero_interior():
    p = Potential.square_well(1.0, 2.0, -1.0, 1.0)
    g = build_grid(p, 0.2, margin=3.0, h_target=0.07)
    f = assemble(p, g)
    n = len(g)
    row_sums = f.k_diag.copy()
    row_sums[:-1] += f.k_off
    row_sums[1:] += f.k_off
    assert np.max(np.abs(row_sums[1:-1])) < 1e-10


def test_energy_zero_vector():
    g = build_grid(Potential.constant(1.0), 0.0, margin=2.0, h_target=0.5)
    f = assemble(Potential.constant(1.0), g)
    assert energy(f, np.zeros(len(g))) == 0.0


def test_energy_single_hat():
    h = 0.25
    g = Grid(np.array([0.0, h, 2 * h]), 1, 1.0)
    f = assemble(Potential.constant(0.0), g)
    assert math.isclose(energy(f, np.array([0.0, 1.0, 0.0])), 2.0 / h,
                        rel_tol=1e-15)


def test_energy_of_sampled_exponential():
    # known value 2 for the extremal profile of the unit constant potential
    p = Potential.constant(1.0)
    g = build_grid(p, 0.0, margin=20.0, h_target=0.01)
    f = assemble(p, g)
    u = np.exp(-np.abs(g.nodes))
    u[0] = u[-1] = 0.0
    assert abs(energy(f, u) - 2.0) < 5e-4


def test_energy_rejects_length_mismatch():
    g = build_grid(Potential.constant(1.0), 0.0, margin=2.0, h_target=0.5)
    f = assemble(Potential.constant(1.0), g)
    with pytest.raises(ValueError):
        energy(f, np.zeros(len(g) + 1))


def test_assemble_rejects_atom_off_grid():
    grid = build_grid(Potential.constant(1.0), 0.0, margin=2.0, h_target=0.5)
    p = Potential.constant(1.0, atoms=((0.123, 1.0),))
    with pytest.raises(AssemblyContractError):
        assemble(p, grid)


def test_embedding_check_extremal_and_random():
    g = build_grid(Potential.constant(1.0), 0.0, margin=15.0, h_target=0.02)
    u = np.exp(-np.abs(g.nodes))
    u[0] = u[-1] = 0.0
    assert embedding_check(u, g)
    # the exponential is the extremal: near-equality up to O(h^2)
    w = g.widths()
    h1_sq = float(np.sum(np.diff(u) ** 2 / w)) + float(
        np.sum(w / 3.0 * (u[:-1] ** 2 + u[:-1] * u[1:] + u[1:] ** 2)))
    assert abs(math.sqrt(0.5 * h1_sq) - 1.0) < 1e-3
    assert embedding_check(np.zeros(len(g)), g)
    rng = np.random.default_rng(7)
    for _ in range(5):
        v = rng.standard_normal(len(g))
        v[0] = v[-1] = 0.0
        assert embedding_check(v, g)


def test_energy_matches_quadrature_oracle():
    # independent check: dense trapezoid quadrature of the interpolant
    p = Potential(StepFunction((-0.5, 0.25), (2.0,), 1.0, 0.5),
                  StepFunction((0.0, 0.25), (-1.5,), 0.0, 0.0),
                  ((0.25, 0.8),))
    g = build_grid(p, 0.0, margin=3.0, h_target=0.05)
    f = assemble(p, g)
    rng = np.random.default_rng(3)
    u = rng.uniform(-1.0, 1.0, len(g))
    u[0] = u[-1] = 0.0

    step = p.step_part()
    total = 0.0
    for i in range(len(g) - 1):
        x0, x1 = g.nodes[i], g.nodes[i + 1]
        w = x1 - x0
        slope = (u[i + 1] - u[i]) / w
        xs = np.linspace(x0, x1, 201)
        vals = u[i] + slope * (xs - x0)
        total += slope ** 2 * w
        total += np.trapezoid(step.values_at((x0 + x1) / 2.0
                                             * np.ones_like(xs)) * vals ** 2,
                              xs)
    for atom in p.atoms:
        total += atom.weight * u[g.index_of(atom.location)] ** 2
    assert math.isclose(energy(f, u), total, rel_tol=1e-5)


def test_translation_invariance_exact_on_dyadic_grid():
    # dyadic nodes and shift keep float arithmetic exact end to end
    p = Potential(StepFunction((-1.0, 0.5), (2.5,), 1.0, 2.0),
                  StepFunction((0.0, 0.5), (1.5,), 0.0, 0.0),
                  ((0.5, 0.75),))
    nodes = -4.0 + 0.25 * np.arange(33)
    g = Grid(nodes, 16, 1.0)
    h = 2.5
    g_shift = Grid(nodes + h, 16, 1.0)
    f = assemble(p, g)
    f_shift = assemble(p.shift(h), g_shift)
    for name in ("k_diag", "k_off", "m_diag", "m_off", "atom_diag"):
        np.testing.assert_array_equal(getattr(f, name), getattr(f_shift, name))


def test_richardson_consistency_order_two():
    # energy of the interpolated extremal converges at observed order ~h^2
    alpha = 2.0
    errors = []
    for h in (0.04, 0.02):
        p = Potential.constant(alpha)
        g = build_grid(p, 0.0, margin=18.0, h_target=h)
        f = assemble(p, g)
        u = np.exp(-math.sqrt(alpha) * np.abs(g.nodes))
        u[0] = u[-1] = 0.0
        errors.append(abs(energy(f, u) - 2.0 * math.sqrt(alpha)))
    assert errors[0] / errors[1] > 3.5


@st.composite
def feasible_vectors(draw):
    n = draw(st.integers(8, 40))
    vals = draw(st.lists(st.floats(-1.0, 1.0, allow_nan=False),
                         min_size=n, max_size=n))
    u = np.array(vals)
    u[0] = u[-1] = 0.0
    return u


@given(feasible_vectors(), st.floats(0.25, 3.0), st.floats(0.0, 2.0))
@settings(max_examples=40, deadline=None)
def test_coercivity_bound(u, alpha, atom_weight):
    # H1 norm of the interpolant is controlled by the energy plus the
    # total variation of the measure part, with explicit constants
    n = len(u)
    nodes = np.linspace(-3.0, 3.0, n)
    mid = nodes[n // 2]
    p = Potential(StepFunction.constant(alpha),
                  StepFunction((-1.0, 1.0), (-0.5,), 0.0, 0.0),
                  ((float(mid), -atom_weight),))
    g = Grid(nodes, n // 2, 1.0)
    f = assemble(p, g)
    w = np.diff(nodes)
    du = np.diff(u)
    h1_sq = float(np.sum(du * du / w)) + float(
        np.sum(w / 3.0 * (u[:-1] ** 2 + u[:-1] * u[1:] + u[1:] ** 2)))
    tv, _, _ = p.total_variation()
    c1 = 1.0 / min(1.0, alpha)
    c2 = tv / min(1.0, alpha)
    assert h1_sq <= c1 * energy(f, u) + c2 + 1e-9

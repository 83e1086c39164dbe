"""Operator, cone, and linearization tests with independent oracles."""

import numpy as np
import pytest
import scipy.sparse as sps

import torusgeo as tg
from torusgeo.mesh import GridSpec, ScalarField, SpaceField, sample_scalar, sample_space
from torusgeo.operator import (
    InvalidProblem,
    ProblemSpec,
    apply_Q,
    assemble_dQ,
    compute_B,
    cone_quantities,
    ellipticity_check,
    first_order_data,
    q_form,
    residual,
    symbol_matrix,
)

from conftest import random_admissible_field


def _basic_spec(n=16, nt=9, b=0.3):
    grid = GridSpec(spatial_dim=1, nodes_per_axis=n, time_nodes=nt)
    x, = grid.spatial_meshes()
    a = SpaceField(grid, 1.0 + 0.2 * np.cos(x))
    u0 = SpaceField(grid, 0.1 * np.sin(x))
    u1 = SpaceField(grid, 0.1 * np.cos(x))
    f = ScalarField(grid, np.ones(grid.field_shape))
    return ProblemSpec(grid=grid, a=a, b=b, f=f, u0=u0, u1=u1)


def test_spec_validation_errors():
    grid = GridSpec(spatial_dim=1, nodes_per_axis=16, time_nodes=9)
    ones = SpaceField(grid, np.ones(grid.spatial_shape))
    zero = SpaceField(grid, np.zeros(grid.spatial_shape))
    f = ScalarField(grid, np.ones(grid.field_shape))
    with pytest.raises(InvalidProblem):
        ProblemSpec(grid=grid, a=SpaceField(grid, -np.ones(grid.spatial_shape)), b=0.0, f=f, u0=zero, u1=zero)
    with pytest.raises(InvalidProblem):
        ProblemSpec(grid=grid, a=ones, b=-0.5, f=f, u0=zero, u1=zero)
    with pytest.raises(InvalidProblem):
        bad_f = ScalarField(grid, -np.ones(grid.field_shape))
        ProblemSpec(grid=grid, a=ones, b=0.0, f=bad_f, u0=zero, u1=zero)
    with pytest.raises(InvalidProblem):
        # boundary slice with lap u0 + a dipping below zero
        x, = grid.spatial_meshes()
        steep = SpaceField(grid, 3.0 * np.sin(x))
        ProblemSpec(grid=grid, a=ones, b=0.0, f=f, u0=steep, u1=zero)
    other = GridSpec(spatial_dim=1, nodes_per_axis=8, time_nodes=9)
    with pytest.raises(InvalidProblem):
        ProblemSpec(grid=grid, a=SpaceField(other, np.ones(other.spatial_shape)), b=0.0, f=f, u0=zero, u1=zero)


def test_nondegenerate_flag():
    spec = _basic_spec()
    assert spec.nondegenerate
    grid = spec.grid
    f0 = ScalarField(grid, np.zeros(grid.field_shape))
    spec0 = ProblemSpec(grid=grid, a=spec.a, b=spec.b, f=f0, u0=spec.u0, u1=spec.u1)
    assert not spec0.nondegenerate


def _roll_lap(vals, hx):
    return (np.roll(vals, -1, -1) - 2.0 * vals + np.roll(vals, 1, -1)) / hx**2


def _roll_grad(vals, hx):
    return (np.roll(vals, -1, -1) - np.roll(vals, 1, -1)) / (2.0 * hx)


def test_compute_B_against_direct_rolls():
    spec = _basic_spec(b=0.4)
    grid = spec.grid
    u = sample_scalar(grid, lambda t, x: (t * t - t) * np.cos(x) * 0.2 + 0.1 * np.sin(x))
    got = compute_B(u, spec).values
    want = (
        _roll_lap(u.values, grid.hx)
        - 0.4 * _roll_grad(u.values, grid.hx) ** 2
        + spec.a.values[None, :]
    )
    assert np.max(np.abs(got - want)) <= 1e-12


def test_apply_Q_against_direct_rolls():
    spec = _basic_spec(b=0.25)
    grid = spec.grid
    u = sample_scalar(grid, lambda t, x: -1.3 * t * (1 - t) + 0.1 * np.sin(x) * t)
    got = apply_Q(u, spec).values[1:-1]
    vals = u.values
    utt = (vals[2:] - 2.0 * vals[1:-1] + vals[:-2]) / grid.ht**2
    bu = (
        _roll_lap(vals, grid.hx)
        - 0.25 * _roll_grad(vals, grid.hx) ** 2
        + spec.a.values[None, :]
    )[1:-1]
    ut = (vals[2:] - vals[:-2]) / (2.0 * grid.ht)
    grad_ut = _roll_grad(ut, grid.hx)
    want = utt * bu - grad_ut**2
    assert np.max(np.abs(got - want)) <= 1e-12


def test_apply_Q_matches_analytic_for_quadratic_profile():
    # u = t^2 - t is spatially flat: Q(u) = 2 a(x) exactly on the grid
    spec = _basic_spec(b=0.7)
    u = sample_scalar(spec.grid, lambda t, x: t * t - t)
    got = apply_Q(u, spec).values[1:-1]
    assert np.max(np.abs(got - 2.0 * spec.a.values[None, :])) <= 1e-12


def test_residual_sup():
    spec = _basic_spec()
    u = sample_scalar(spec.grid, lambda t, x: t * t - t)
    field, sup_val = residual(u, spec, spec.f)
    inner = apply_Q(u, spec).values[1:-1] - spec.f.values[1:-1]
    assert sup_val == pytest.approx(np.max(np.abs(inner)), rel=0, abs=0)
    assert np.max(np.abs(field.values[1:-1] - inner)) == 0.0


def test_cone_quantities_and_admissibility():
    field, spec = random_admissible_field(3)
    cone = cone_quantities(field.values, spec)
    assert cone.admissible()
    report, verdict = ellipticity_check(field, spec)
    assert report.admissible
    assert verdict.all()
    # flipping time convexity breaks the cone
    flipped = ScalarField(spec.grid, -field.values)
    report2, verdict2 = ellipticity_check(flipped, spec)
    assert not report2.admissible
    assert not verdict2.all()


def test_admissibility_report_locations():
    field, spec = random_admissible_field(4)
    report, _ = ellipticity_check(field, spec)
    k = report.loc_utt[0]
    assert 1 <= k <= spec.grid.time_nodes - 2
    cone = cone_quantities(field.values, spec)
    assert report.min_utt == pytest.approx(float(np.min(cone.utt)))
    assert report.min_q == pytest.approx(float(np.min(cone.q)))


def test_symbol_matrix_definiteness_matches_margins():
    rng = np.random.default_rng(17)
    for _ in range(200):
        utt = rng.uniform(-1.0, 2.0)
        bval = rng.uniform(-1.0, 2.0)
        g = rng.standard_normal(2)
        m = symbol_matrix(utt, bval, g)
        assert np.max(np.abs(m - m.T)) == 0.0
        eigs = np.linalg.eigvalsh(m)
        pd = bool(np.all(eigs > 0.0))
        q = utt * bval - float(g @ g)
        assert pd == (utt > 0.0 and q > 0.0)


def test_q_form_psd_and_polarization():
    field, spec = random_admissible_field(5)
    rng = np.random.default_rng(55)
    phi = ScalarField(spec.grid, rng.standard_normal(spec.grid.field_shape))
    psi = ScalarField(spec.grid, rng.standard_normal(spec.grid.field_shape))
    dphi = first_order_data(phi)
    dpsi = first_order_data(psi)
    diag = q_form(field, spec, dphi, dphi).values
    assert np.min(diag) >= -1e-12
    ab = q_form(field, spec, dphi, dpsi).values
    ba = q_form(field, spec, dpsi, dphi).values
    assert np.max(np.abs(ab - ba)) <= 1e-12
    # polarization: 4 q(phi, psi) = q(phi+psi) - q(phi-psi)
    plus = ScalarField(spec.grid, phi.values + psi.values)
    minus = ScalarField(spec.grid, phi.values - psi.values)
    lhs = 4.0 * ab
    rhs = (
        q_form(field, spec, first_order_data(plus), first_order_data(plus)).values
        - q_form(field, spec, first_order_data(minus), first_order_data(minus)).values
    )
    assert np.max(np.abs(lhs - rhs)) <= 1e-10


@pytest.mark.parametrize("dim,n,nt", [(1, 10, 7), (2, 8, 7)])
def test_jacobian_matches_finite_differences(dim, n, nt):
    field, spec = random_admissible_field(20 + dim, dim=dim, n=n, nt=nt)
    system = assemble_dQ(field, spec)
    rng = np.random.default_rng(77)
    for _ in range(4):
        h = np.zeros(spec.grid.field_shape)
        h[1:-1] = rng.standard_normal((spec.grid.interior_layers,) + spec.grid.spatial_shape)
        eps = 1e-6
        up = ScalarField(spec.grid, field.values + eps * h)
        um = ScalarField(spec.grid, field.values - eps * h)
        fd = (apply_Q(up, spec).values[1:-1] - apply_Q(um, spec).values[1:-1]) / (2.0 * eps)
        an = system.apply(h)
        rel = np.max(np.abs(fd - an)) / max(1.0, np.max(np.abs(an)))
        assert rel <= 1e-6


def test_jacobian_boundary_blocks():
    # entries reaching the Dirichlet layers act through the boundary blocks
    field, spec = random_admissible_field(30)
    system = assemble_dQ(field, spec)
    rng = np.random.default_rng(78)
    h = np.zeros(spec.grid.field_shape)
    h[0] = rng.standard_normal(spec.grid.spatial_shape)
    h[-1] = rng.standard_normal(spec.grid.spatial_shape)
    eps = 1e-6
    up = field.values + eps * h
    um = field.values - eps * h
    qp = apply_Q(ScalarField(spec.grid, up), spec).values[1:-1]
    qm = apply_Q(ScalarField(spec.grid, um), spec).values[1:-1]
    fd = (qp - qm) / (2.0 * eps)
    an = system.apply(h)
    rel = np.max(np.abs(fd - an)) / max(1.0, np.max(np.abs(an)))
    assert rel <= 1e-6


def test_exact_identities_at_rounding_floor():
    for seed in (1, 2, 3):
        field, spec = random_admissible_field(seed, n=12, nt=9)
        grid = spec.grid
        system = assemble_dQ(field, spec)
        scale = 1.0 + float(np.max(np.abs(apply_Q(field, spec).values)))
        t = grid.time_column()
        ht = ScalarField(grid, np.broadcast_to(t, grid.field_shape).copy())
        assert np.max(np.abs(system.apply(ht))) <= 1e-10 * scale
        ht2 = ScalarField(grid, np.broadcast_to(t * t, grid.field_shape).copy())
        cone = cone_quantities(field.values, spec)
        want = 2.0 * cone.b_interior
        assert np.max(np.abs(system.apply(ht2) - want)) <= 1e-10 * scale


def test_solve_interior_solves():
    field, spec = random_admissible_field(6)
    system = assemble_dQ(field, spec)
    rng = np.random.default_rng(60)
    g = rng.standard_normal((spec.grid.interior_layers,) + spec.grid.spatial_shape)
    h = system.solve_interior(g)
    assert h[0].max() == 0.0 and h[-1].max() == 0.0
    back = system.apply(h)
    assert np.max(np.abs(back - g)) <= 1e-8 * max(1.0, np.max(np.abs(g)))


def test_triplet_export_round_trip(tmp_path):
    field, spec = random_admissible_field(7, n=8, nt=6)
    system = assemble_dQ(field, spec)
    path = tmp_path / "matrix.txt"
    system.export_triplets(path)
    rows, cols, vals = [], [], []
    with open(path) as fh:
        assert fh.readline().strip() == "row,col,value"
        for line in fh:
            r, c, v = line.strip().split(",")
            rows.append(int(r))
            cols.append(int(c))
            vals.append(float(v))
    rebuilt = sps.coo_matrix((vals, (rows, cols)), shape=system.matrix.shape).tocsr()
    diff = (rebuilt - system.matrix).tocoo()
    assert np.max(np.abs(diff.data)) <= 1e-16 if diff.nnz else True


def test_matrix_pattern_symmetric():
    field, spec = random_admissible_field(8, n=8, nt=6)
    system = assemble_dQ(field, spec)
    pattern = (system.matrix != 0).astype(int)
    assert (pattern != pattern.T).nnz == 0


def test_apply_requires_full_shape():
    field, spec = random_admissible_field(9, n=8, nt=6)
    system = assemble_dQ(field, spec)
    with pytest.raises(ValueError):
        system.apply(np.zeros((2, 2)))

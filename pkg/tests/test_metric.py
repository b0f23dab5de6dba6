"""Metric operator assembly, duality maps, and their invariances."""

import numpy as np
import pytest
import scipy.sparse as sp

from innershape import (
    Immersion,
    MeshMismatchError,
    SolverError,
    Topology,
    assemble,
    build_grid,
    cylinder_surface,
    flat,
    inner_product,
    parameter_mass_matrix,
    sharp,
    torus_surface,
)
from innershape.fixtures import rotation_matrix

from .conftest import random_field
from .oracles import flat_mass_matrix, flat_stiffness_matrix, metric_inner_quadrature
from .test_geometry import flat_immersion

ALPHA = 0.6


def perturbed_torus(rng, nx=4, ny=4, scale=0.02):
    mesh = build_grid(Topology.TORUS, nx, ny)
    base = torus_surface(mesh, 0.35, 0.15)
    return Immersion(mesh, base.coords + scale * rng.standard_normal((mesh.n_nodes, 3)))


class TestAssembly:
    def test_flat_reduction_to_mass_plus_stiffness(self, plane_mesh):
        q = flat_immersion(plane_mesh)
        op = assemble(q, ALPHA)
        expected = flat_mass_matrix(plane_mesh) + ALPHA**2 * flat_stiffness_matrix(plane_mesh)
        err = np.max(np.abs(op.block.toarray() - expected))
        assert err <= 1e-12

    def test_alpha_zero_is_mass_only(self, plane_mesh):
        q = flat_immersion(plane_mesh)
        op = assemble(q, 0.0)
        err = np.max(np.abs(op.block.toarray() - flat_mass_matrix(plane_mesh)))
        assert err <= 1e-12

    def test_matrix_bitwise_symmetric(self, rng):
        q = perturbed_torus(rng)
        mat = assemble(q, ALPHA).block
        diff = (mat - mat.T).tocoo()
        assert diff.nnz == 0 or np.all(diff.data == 0.0)

    def test_full_matrix_is_three_block_copies(self, flat_square):
        op = assemble(flat_square, ALPHA)
        full = op.full_matrix()
        n = op.n_nodes
        assert full.shape == (3 * n, 3 * n)
        block = op.block.toarray()
        dense = full.toarray()
        for k in range(3):
            sl = slice(k * n, (k + 1) * n)
            assert np.array_equal(dense[sl, sl], block)

    def test_quadrature_oracle_random_instances(self, rng):
        worst = 0.0
        for _ in range(20):
            q = perturbed_torus(rng)
            u = random_field(rng, q.mesh)
            v = random_field(rng, q.mesh)
            got = inner_product(assemble(q, ALPHA), u, v)
            want = metric_inner_quadrature(q, ALPHA, u, v)
            worst = max(worst, abs(got - want) / max(abs(want), 1e-30))
        assert worst <= 1e-12

    def test_positive_definite(self, rng, cylinder_shape):
        op = assemble(cylinder_shape, ALPHA)
        for _ in range(5):
            u = random_field(rng, cylinder_shape.mesh)
            assert inner_product(op, u, u) > 0.0

    def test_alpha_monotonicity(self, rng, cylinder_shape):
        u = random_field(rng, cylinder_shape.mesh)
        values = [inner_product(assemble(cylinder_shape, a), u, u)
                  for a in (0.0, 0.3, 0.6, 1.2)]
        assert all(b >= a for a, b in zip(values, values[1:]))


class TestInnerProduct:
    def test_constant_field_on_flat_square(self, flat_square):
        u = np.zeros((flat_square.mesh.n_nodes, 3))
        u[:, 0] = 1.0
        assert inner_product(assemble(flat_square, ALPHA), u, u) == pytest.approx(1.0, abs=1e-14)

    def test_linear_field_on_flat_square(self, flat_square):
        # u = (x1, 0, 0): integral of (x1)^2 is 1/3, gradient contributes alpha^2
        u = np.zeros((flat_square.mesh.n_nodes, 3))
        u[:, 0] = flat_square.mesh.nodes[:, 0]
        value = inner_product(assemble(flat_square, ALPHA), u, u)
        assert value == pytest.approx(1.0 / 3.0 + ALPHA**2, abs=1e-14)

    def test_exact_symmetry(self, rng):
        q = perturbed_torus(rng)
        op = assemble(q, ALPHA)
        for _ in range(10):
            u = random_field(rng, q.mesh)
            v = random_field(rng, q.mesh)
            assert inner_product(op, u, v) - inner_product(op, v, u) == 0.0

    def test_dimension_mismatch_rejected(self, flat_square, cylinder_shape):
        op = assemble(flat_square, ALPHA)
        u = np.zeros((cylinder_shape.mesh.n_nodes, 3))
        with pytest.raises((ValueError, MeshMismatchError)):
            inner_product(op, u, u)


class TestFlatSharp:
    def test_sharp_of_flat_is_identity(self, rng, cylinder_shape):
        op = assemble(cylinder_shape, ALPHA)
        u = random_field(rng, cylinder_shape.mesh)
        back = sharp(op, flat(op, u))
        rel = np.linalg.norm(back - u) / np.linalg.norm(u)
        assert rel <= 1e-10

    def test_flat_of_zero_is_zero(self, cylinder_shape):
        op = assemble(cylinder_shape, ALPHA)
        zero = np.zeros((cylinder_shape.mesh.n_nodes, 3))
        assert np.array_equal(flat(op, zero), zero)

    def test_flat_constant_field_mass_rows(self, flat_square):
        c = 1.75
        op = assemble(flat_square, 0.0)
        u = np.zeros((flat_square.mesh.n_nodes, 3))
        u[:, 0] = c
        cov = flat(op, u)
        rows = flat_mass_matrix(flat_square.mesh).sum(axis=1)
        assert np.max(np.abs(cov[:, 0] - c * rows)) <= 1e-12
        assert np.max(np.abs(cov[:, 1:])) == 0.0
        ones = np.zeros_like(u)
        ones[:, 0] = 1.0
        assert float(np.vdot(cov, ones)) == pytest.approx(c, abs=1e-12)

    def test_sharp_reports_nonconvergence(self, cylinder_shape):
        op = assemble(cylinder_shape, ALPHA)
        p = np.ones((cylinder_shape.mesh.n_nodes, 3))
        with pytest.raises(SolverError):
            sharp(op, p, maxiter=1)


class TestInvariances:
    def test_rigid_motion_invariance(self, rng):
        q = perturbed_torus(rng)
        u = random_field(rng, q.mesh)
        v = random_field(rng, q.mesh)
        rot = rotation_matrix("y", 71.0) @ rotation_matrix("z", -12.0)
        q_m = Immersion(q.mesh, q.coords @ rot.T + [0.4, 0.1, -0.9])
        base = inner_product(assemble(q, ALPHA), u, v)
        moved = inner_product(assemble(q_m, ALPHA), u @ rot.T, v @ rot.T)
        assert abs(moved - base) / abs(base) <= 1e-12

    def test_torus_cyclic_shift_invariance(self, rng):
        q = perturbed_torus(rng, nx=5, ny=4)
        mesh = q.mesh
        u = random_field(rng, mesh)
        v = random_field(rng, mesh)
        base = inner_product(assemble(q, ALPHA), u, v)
        for dx, dy in ((1, 0), (0, 1), (2, 3)):
            perm = np.empty(mesh.n_nodes, dtype=int)
            for i in range(mesh.nx):
                for j in range(mesh.ny):
                    perm[mesh.grid_index(i, j)] = mesh.grid_index(
                        (i + dx) % mesh.nx, (j + dy) % mesh.ny
                    )
            q_s = Immersion(mesh, q.coords[perm])
            shifted = inner_product(assemble(q_s, ALPHA), u[perm], v[perm])
            assert abs(shifted - base) / abs(base) <= 1e-12


class TestParameterMassMatrix:
    def test_matches_oracle(self, cylinder_mesh):
        got = parameter_mass_matrix(cylinder_mesh).toarray()
        want = flat_mass_matrix(cylinder_mesh)
        assert np.max(np.abs(got - want)) <= 1e-12

    def test_row_sums_give_unit_area(self, torus_mesh):
        mass = parameter_mass_matrix(torus_mesh)
        assert float(mass.sum()) == pytest.approx(1.0, abs=1e-12)

    def test_cached_per_mesh(self, torus_mesh):
        assert parameter_mass_matrix(torus_mesh) is parameter_mass_matrix(torus_mesh)

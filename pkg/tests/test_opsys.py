import warnings

import numpy as np
import pytest

from conftest import I2, SX, SY, SZ, unit
from ncb.errors import InvalidInput, StarViolation, UnitViolation
from ncb.matlin import random_hermitian
from ncb.opsys import (
    ParamMap,
    ParamSequence,
    Status,
    build_opsys,
    extract_params,
    invariants,
    level_norm,
    operator_system,
    param_sequence,
    paulsen_device,
    self_adjoint_unit_basis,
    validate_param_map,
)


class TestValidateParamMap:
    def test_trivial_map(self):
        m = validate_param_map([I2])
        assert m.d == 1 and m.target_dim == 2

    def test_resolution_of_identity(self):
        m = validate_param_map([(I2 + SX) / 2, (I2 - SX) / 2])
        assert np.allclose(m(np.array([1, -1])), SX)

    def test_non_hermitian(self):
        with pytest.raises(StarViolation):
            validate_param_map([unit(0, 1), I2 - unit(0, 1)])

    def test_not_unital(self):
        with pytest.raises(UnitViolation):
            validate_param_map([I2, SX])

    def test_size_mismatch(self):
        with pytest.raises(InvalidInput):
            validate_param_map([I2, np.zeros((3, 3))])

    def test_star_preserving(self, rng):
        m = validate_param_map([SX / 2, I2 - SX / 2])
        z = rng.normal(size=2) + 1j * rng.normal(size=2)
        assert np.allclose(m(np.conj(z)), m(z).conj().T)


class TestBuildOpsys:
    def test_scalars_in_m2(self):
        s = build_opsys(param_sequence([I2]))
        assert s.d == 1 and s.ambient_dim == 2

    def test_two_evaluations(self):
        seq = param_sequence([[[1]], [[0]]], [[[0]], [[1]]])
        s = build_opsys(seq)
        assert s.d == 2 and s.N == 2 and s.algebra.dim == 2

    def test_evaluations_plus_midpoint(self):
        seq = param_sequence([[[1]], [[0]]], [[[0]], [[1]]], [[[0.5]], [[0.5]]])
        s = build_opsys(seq)
        assert s.d == 2 and s.ambient_dim == 3
        assert s.space.contains(np.diag([0, 1, 0.5]))

    def test_unfaithful_warns(self):
        seq = param_sequence([[[0.5]], [[0.5]]])
        with pytest.warns(UserWarning):
            s = build_opsys(seq)
        assert s.d == 1
        assert not seq.check_faithful()
        assert seq.faithful is Status.FAILED

    def test_mismatched_sources(self):
        with pytest.raises(InvalidInput):
            ParamSequence((validate_param_map([I2]), validate_param_map([I2 / 2, I2 / 2])))

    def test_faithful_dimension(self, rng):
        for _ in range(5):
            gens = [random_hermitian(2, rng) for _ in range(2)]
            seq = param_sequence(gens + [I2 - sum(gens)])
            assert seq.check_faithful()
            assert build_opsys(seq).d == 3


class TestOperatorSystem:
    def test_requires_unit(self):
        with pytest.raises(InvalidInput):
            operator_system([SX])

    def test_requires_star_closure(self):
        with pytest.raises(InvalidInput):
            operator_system([I2, unit(0, 1)])


class TestExtractParams:
    def test_scalars(self):
        seq = extract_params(operator_system([I2]))
        assert seq.d == 1 and seq.dims == [1]
        assert np.allclose(seq[0].generators[0], [[1]])

    def test_pauli_pair(self):
        s = operator_system([I2, SX, SZ])
        basis = self_adjoint_unit_basis(s)
        assert np.allclose(basis[0], SX) and np.allclose(basis[1], SZ)
        assert np.allclose(basis[2], I2 - SX - SZ)
        seq = extract_params(s)
        assert (seq.d, seq.N, seq.dims) == (3, 1, [2])

    def test_diagonal_three_points(self):
        s = operator_system([np.eye(3), np.diag([0, 1, 2])])
        basis = self_adjoint_unit_basis(s)
        assert np.allclose(basis[0], np.diag([1, 0, -1]))
        assert np.allclose(basis[1], np.diag([0, 1, 2]))
        seq = extract_params(s)
        assert seq.dims == [1, 1, 1]
        vals = [[g[0, 0].real for g in m.generators] for m in seq.maps]
        assert np.allclose(vals, [[1, 0], [0, 1], [-1, 2]])

    def test_basis_sums_to_identity(self, rng):
        mats = [np.eye(3)] + [random_hermitian(3, rng) for _ in range(3)]
        basis = self_adjoint_unit_basis(operator_system(mats))
        assert np.abs(basis.sum(axis=0) - np.eye(3)).max() < 1e-10
        for b in basis:
            assert np.allclose(b, b.conj().T)

    def test_basis_is_canonical(self, rng):
        mats = [np.eye(2), SX, SZ]
        u = np.linalg.qr(rng.normal(size=(3, 3)))[0]
        mixed = [sum(u[i, j] * mats[j] for j in range(3)) for i in range(3)]
        assert np.allclose(self_adjoint_unit_basis(operator_system(mats)),
                           self_adjoint_unit_basis(operator_system(mixed)))


class TestLevelNorm:
    def test_unit_vector(self):
        s = operator_system([np.eye(3), np.diag([0, 1, 2])])
        for k in range(3):
            assert level_norm(s, np.ones(2), k) == pytest.approx(1.0)

    def test_three_point_values(self):
        s = operator_system([np.eye(3), np.diag([0, 1, 2])])
        z = np.array([1.0, 0.6])
        assert [level_norm(s, z, k) for k in range(3)] == pytest.approx([1.0, 0.6, 0.2])

    def test_ambient_is_max(self, rng):
        seq = param_sequence([SX / 2, SZ / 2, I2 - SX / 2 - SZ / 2], [[[0.2]], [[0.3]], [[0.5]]])
        z = rng.normal(size=(2, 2, 3)) + 1j * rng.normal(size=(2, 2, 3))
        assert level_norm(seq, z) == pytest.approx(max(level_norm(seq, z, k) for k in range(2)))
        s = build_opsys(seq)
        basis = np.stack(list(seq.stacked_generators()))
        big = np.einsum("abl,lij->aibj", z, basis).reshape(6, 6)
        assert np.linalg.norm(big, 2) == pytest.approx(level_norm(seq, z))
        assert s.d == 3

    def test_dimension_mismatch(self):
        with pytest.raises(InvalidInput):
            level_norm(param_sequence([I2]), np.ones(2))


class TestPaulsen:
    def test_zero_space(self):
        s = paulsen_device([], n=2)
        assert s.d == 2

    def test_single_matrix_unit(self):
        assert paulsen_device([unit(0, 1)]).d == 4

    def test_full_m2(self):
        s = paulsen_device([unit(i, j) for i in range(2) for j in range(2)])
        assert s.d == 10 and s.ambient_dim == 4

    def test_unital_and_star_closed(self, rng):
        s = paulsen_device([rng.normal(size=(3, 3))])
        assert s.space.contains(np.eye(6)) and s.space.adjoint_closed()
        assert s.d == 4


class TestInvariants:
    def test_pauli_pair(self):
        inv = invariants(operator_system([I2, SX, SZ]))
        assert (inv.d, inv.N, inv.block_dims, inv.bound) == (3, 1, (2,), 4)

    def test_diagonal_m3(self):
        inv = invariants(operator_system([np.diag(v) for v in np.eye(3)]))
        assert (inv.d, inv.N, inv.bound) == (3, 3, 3)

    def test_full_m2(self):
        inv = invariants(operator_system([I2, SX, SY, SZ]))
        assert (inv.d, inv.N, inv.block_dims) == (4, 1, (2,))
        assert inv.d == inv.bound

    def test_block_images_bounded(self, rng):
        mats = [np.eye(4), random_hermitian(4, rng)]
        inv = invariants(operator_system(mats))
        for n, m in zip(inv.block_dims, inv.block_image_dims):
            assert m <= n * n


def test_param_map_helpers(rng):
    m = ParamMap(np.stack([SX / 2, I2 - SX / 2]))
    u = np.linalg.qr(rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2)))[0]
    c = m.conjugated(u)
    assert np.allclose(c(np.array([1, 0])), u @ (SX / 2) @ u.conj().T)
    theta = np.array([[2.0, -1.0], [-1.0, 2.0]])
    r = m.reparameterized(theta)
    z = np.array([0.3, -1.2])
    assert np.allclose(r(theta @ z), m(z))

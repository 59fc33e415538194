import numpy as np
import pytest

from conftest import I2, SX, SZ, unit
import ncb.algebra as alg_mod
from ncb.algebra import algebra_of, apply_irrep, block_decompose, center, commutant, generate_algebra
from ncb.errors import DegenerateSpectrum, InvalidInput
from ncb.matlin import direct_sum, operator_norm, orthonormalize_span, random_hermitian


def full(n):
    return orthonormalize_span([unit(i, j, n) for i in range(n) for j in range(n)])


class TestCommutant:
    def test_of_identity(self):
        assert commutant(orthonormalize_span([I2])).dim == 4

    def test_of_full_m2(self):
        c = commutant(full(2))
        assert c.dim == 1 and c.contains(I2)

    def test_of_diagonals(self):
        c = commutant(orthonormalize_span([unit(0, 0), unit(1, 1)]))
        assert c.dim == 2 and c.contains(np.diag([3, 5]))


class TestGenerateAlgebra:
    def test_sigma_x_is_closed(self):
        a = generate_algebra(orthonormalize_span([I2, SX]))
        assert a.dim == 2

    def test_matrix_units_generate_m2(self):
        a = generate_algebra(orthonormalize_span([I2, unit(0, 1), unit(1, 0)]))
        assert a.dim == 4

    def test_diagonal_powers(self):
        a = generate_algebra(orthonormalize_span([np.eye(3), np.diag([0, 1, 2])]))
        assert a.dim == 3
        # Vandermonde oracle: 1, x, x^2 on distinct points span all diagonals
        v = np.vander([0, 1, 2], increasing=True)
        assert abs(np.linalg.det(v)) > 0.5
        assert a.space.contains(np.diag([7, -1, 4]))

    def test_missing_unit(self):
        with pytest.raises(InvalidInput):
            generate_algebra(orthonormalize_span([SX]))

    def test_not_star_closed(self):
        with pytest.raises(InvalidInput):
            generate_algebra(orthonormalize_span([I2, unit(0, 1)]))

    def test_product_closure(self, rng):
        a = algebra_of([np.eye(3), random_hermitian(3, rng)])
        for x in a.space.basis:
            for y in a.space.basis:
                assert a.space.residual(x @ y) < 1e-9


class TestBlockDecompose:
    def test_full_m3(self):
        d = block_decompose(generate_algebra(full(3)))
        assert (d.num_blocks, d.block_dims, d.multiplicities) == (1, [3], [1])

    def test_diagonal_m3(self):
        d = block_decompose(algebra_of([np.eye(3), np.diag([0, 1, 2])]))
        assert d.block_dims == [1, 1, 1] and d.multiplicities == [1, 1, 1]

    def test_amplified_m2(self):
        mats = [np.kron(np.eye(2), m) for m in (I2, SX, SZ, SX @ SZ)]
        # a (+) a realized as I2 (x) a up to permutation of coordinates
        a = algebra_of(mats)
        d = block_decompose(a)
        assert (d.num_blocks, d.block_dims, d.multiplicities) == (1, [2], [2])
        assert commutant(a.space).dim == 4
        assert center(a).dim == 1
        x = np.kron(np.eye(2), SX)
        y = d.pi(0, x)
        # pi(a (+) a) is unitarily equivalent to a
        assert np.allclose(np.sort(np.linalg.eigvalsh(y)), [-1, 1])

    def test_blocks_ordered_by_size(self, rng):
        gens = [direct_sum([random_hermitian(2, rng), np.array([[c]])]) for c in (5.0, 1.0)]
        a = algebra_of(gens + [np.eye(3)])
        d = block_decompose(a)
        assert d.block_dims == [1, 2]

    def test_degenerate_spectrum_raises(self, monkeypatch):
        monkeypatch.setattr(alg_mod, "_cluster", lambda *a, **k: None)
        with pytest.raises(DegenerateSpectrum):
            block_decompose(algebra_of([np.eye(3), np.diag([0, 1, 2])]))

    def test_deterministic(self, rng):
        a = algebra_of([np.eye(4), direct_sum([random_hermitian(2, rng), random_hermitian(2, rng)])])
        d1, d2 = block_decompose(a, seed=3), block_decompose(a, seed=3)
        for b1, b2 in zip(d1.blocks, d2.blocks):
            assert np.allclose(b1.isometry, b2.isometry)


class TestDecompositionInvariants:
    @pytest.fixture(params=[0, 1, 2])
    def decomposed(self, request):
        rng = np.random.default_rng(request.param)
        a1, a2 = random_hermitian(2, rng), random_hermitian(2, rng)
        mats = [np.eye(5), direct_sum([a1, a1, np.array([[0.3]])]), direct_sum([a2, a2, np.array([[-1.0]])])]
        a = algebra_of(mats)
        return a, block_decompose(a)

    def test_center_and_dimension(self, decomposed):
        a, d = decomposed
        assert center(a).dim == d.num_blocks
        assert sum(n * n for n in d.block_dims) == a.dim

    def test_central_projections(self, decomposed):
        a, d = decomposed
        ps = d.central_projections
        assert np.allclose(sum(ps), np.eye(a.ambient_dim), atol=1e-8)
        for p in ps:
            assert np.allclose(p @ p, p, atol=1e-8) and np.allclose(p, p.conj().T)
            for x in a.space.basis:
                assert np.abs(p @ x - x @ p).max() < 1e-8

    def test_reconstruction(self, decomposed):
        a, d = decomposed
        for x in a.space.basis:
            rec = d.reconstruct([d.pi(k, x) for k in range(d.num_blocks)])
            assert np.abs(rec - x).max() < 1e-7

    def test_irreps_multiplicative(self, decomposed, rng):
        a, d = decomposed
        x = np.einsum("a,aij->ij", rng.normal(size=a.dim) + 1j * rng.normal(size=a.dim), a.space.basis)
        y = np.einsum("a,aij->ij", rng.normal(size=a.dim), a.space.basis)
        for k in range(d.num_blocks):
            assert np.abs(d.pi(k, x @ y) - d.pi(k, x) @ d.pi(k, y)).max() < 1e-8
            assert np.abs(d.pi(k, x.conj().T) - d.pi(k, x).conj().T).max() < 1e-8
            assert np.allclose(d.pi(k, np.eye(a.ambient_dim)), np.eye(d.block_dims[k]))

    def test_irreps_irreducible(self, decomposed):
        a, d = decomposed
        for k in range(d.num_blocks):
            img = orthonormalize_span([d.pi(k, x) for x in a.space.basis])
            assert img.dim == d.block_dims[k] ** 2
            assert commutant(img).dim == 1


class TestApplyIrrep:
    @pytest.fixture
    def diag3(self):
        return block_decompose(algebra_of([np.eye(3), np.diag([0, 1, 2])]))

    def test_unital(self, diag3):
        for k in range(3):
            assert np.allclose(apply_irrep(diag3, k, np.eye(3)), np.eye(1))

    def test_middle_point(self, diag3):
        assert apply_irrep(diag3, 1, np.diag([0, 1, 2]))[0, 0] == pytest.approx(1.0)

    def test_cell_array(self, diag3):
        cells = np.zeros((2, 2, 3, 3), dtype=complex)
        scal = np.array([[1, 2], [3, -1]])
        vals = np.array([[np.diag([1, 5, 0]), np.diag([2, 0, 0])], [np.diag([3, 0, 1]), np.diag([-1, 2, 2])]])
        cells[:] = vals
        out = apply_irrep(diag3, 0, cells)
        assert out.shape == (2, 2)
        assert operator_norm(out) == pytest.approx(np.linalg.svd(scal, compute_uv=False)[0])

    def test_outside_algebra(self, diag3):
        with pytest.raises(InvalidInput):
            apply_irrep(diag3, 0, unit(0, 1, 3))

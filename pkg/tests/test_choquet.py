import warnings

import numpy as np
import pytest

from conftest import I2, SX, SY, SZ
from ncb.choquet import (
    analyze_boundary,
    c_star_envelope,
    choi_apply,
    find_peaking,
    identity_choi,
    is_boundary,
    is_reduced,
    ucp_extension_set,
    verify_peaking,
)
from ncb.errors import InvalidInput
from ncb.opsys import build_opsys, extract_params, operator_system, param_sequence


@pytest.fixture
def three_points():
    """Functions on {0, 1, 2} spanned by 1 and the coordinate."""
    return operator_system([np.eye(3), np.diag([0.0, 1.0, 2.0])])


def block_at(s, value):
    x = np.diag([0.0, 1.0, 2.0])
    return next(k for k in range(s.N) if abs(s.decomposition.pi(k, x)[0, 0] - value) < 1e-9)


def test_identity_choi_applies_identity(rng):
    x = rng.normal(size=(3, 3))
    assert np.allclose(choi_apply(identity_choi(3), x, 3), x)


class TestIsBoundary:
    def test_endpoints_and_midpoint(self, three_points):
        s = three_points
        assert is_boundary(s, block_at(s, 0)).is_boundary
        assert is_boundary(s, block_at(s, 2)).is_boundary
        dec = is_boundary(s, block_at(s, 1))
        assert not dec.is_boundary
        ext = ucp_extension_set(s, block_at(s, 1))
        assert ext.sp.is_feasible(dec.singleton.witness)

    def test_two_points(self):
        s = operator_system([I2, np.diag([0.0, 1.0])])
        assert all(is_boundary(s, k).is_boundary for k in range(2))
        assert is_reduced(s)

    def test_irreducible_systems(self):
        assert is_reduced(operator_system([I2, SX, SZ]))
        assert is_reduced(operator_system([I2, SX, SY, SZ]))

    def test_block_out_of_range(self, three_points):
        with pytest.raises(InvalidInput):
            is_boundary(three_points, 3)

    def test_irreducible_random_blocks(self, rng):
        for n in (2, 3):
            for _ in range(3):
                a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
                b = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
                s = operator_system([np.eye(n), a + a.conj().T, b + b.conj().T])
                assert s.N == 1
                assert is_boundary(s, 0).is_boundary


class TestPeaking:
    def test_known_cell(self, three_points):
        seq = extract_params(three_points)
        k = block_at(three_points, 0)
        gap, norms = verify_peaking(seq, k, np.array([1.0, 0.6]).reshape(1, 1, 2))
        assert gap == pytest.approx(0.4, abs=1e-12)
        assert sorted(norms) == pytest.approx([0.2, 0.6, 1.0])

    def test_search_finds_endpoints(self, three_points):
        s = three_points
        for v in (0, 2):
            cert = find_peaking(s, block_at(s, v), seed=1)
            assert cert is not None and cert.gap > 1e-7
            gap, _ = verify_peaking(extract_params(s), cert.block, cert.cells)
            assert gap == pytest.approx(cert.gap)

    def test_midpoint_never_peaks(self, three_points):
        assert find_peaking(three_points, block_at(three_points, 1), seed=3, budget=20) is None

    def test_single_block_is_vacuous(self):
        cert = find_peaking(operator_system([I2, SX, SZ]), 0)
        assert cert.vacuous

    def test_matrix_level_peaking(self):
        seq = param_sequence([SX / 3, SZ / 3, I2 - (SX + SZ) / 3], [[[0.5]], [[0.5]], [[0.0]]])
        s = build_opsys(seq)
        rep = analyze_boundary(s, seed=0)
        assert rep.is_reduced
        for b in rep.blocks:
            assert b.peaking is not None and b.gap > 1e-7


class TestEnvelope:
    def test_three_points(self, three_points):
        env = c_star_envelope(three_points)
        assert env.envelope_dims == [1, 1]
        assert env.ideal_blocks == [block_at(three_points, 1)]
        assert not env.is_reduced
        assert env.worst_ratio_error() < 1e-9
        assert env.envelope_system.d == 2

    def test_reduced_system_is_its_own_envelope(self):
        s = operator_system([I2, np.diag([0.0, 1.0])])
        env = c_star_envelope(s)
        assert env.is_reduced and env.envelope_dims == [1, 1]

    def test_report_blocks(self, three_points):
        rep = analyze_boundary(three_points, search_all=True)
        assert sorted(rep.boundary_blocks) == sorted([block_at(three_points, 0), block_at(three_points, 2)])
        assert rep.non_boundary_blocks == [block_at(three_points, 1)]

    def test_redundant_copy_is_ideal(self, rng):
        """Gamma (+) compression of Gamma: the compression lies in the boundary ideal."""
        seq = param_sequence([SX / 2, SZ / 2, I2 - (SX + SZ) / 2])
        v = np.array([1.0, 0.0])
        comp = [[[v @ g @ v]] for g in seq[0].generators]
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            s = build_opsys(param_sequence(list(seq[0].generators), comp))
        env = c_star_envelope(s)
        assert env.envelope_dims == [2] and len(env.ideal_blocks) == 1

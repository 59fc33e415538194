import numpy as np
import pytest

from conftest import I2, SX, SZ
from ncb.classify import decide_isomorphism, verify_equivalence
from ncb.errors import InvalidInput, StructureViolation
from ncb.generate import random_nonreduced
from ncb.nonreduced import (
    NonreducedSpec,
    build_and_verify,
    check_separations,
    check_subordination,
    match_blocks,
)
from ncb.opsys import ParamMap, extract_params, operator_system, param_sequence

EVAL = param_sequence([[[1.0]], [[0.0]]], [[[0.0]], [[1.0]]])


def scalar_map(a, b):
    return ParamMap(np.array([[[a]], [[b]]], dtype=complex))


class TestSubordination:
    def test_midpoint(self):
        (c,) = check_subordination(NonreducedSpec(EVAL, [scalar_map(0.5, 0.5)]))
        assert c.holds and c.margin >= -1e-7
        assert c.witness is not None

    def test_extrapolation_fails(self):
        (c,) = check_subordination(NonreducedSpec(EVAL, [scalar_map(2.0, -1.0)]))
        assert not c.holds
        assert c.violating_cells is not None and c.violation_gap > 1e-6

    def test_copy_of_gamma(self):
        (c,) = check_subordination(NonreducedSpec(EVAL, [EVAL[1]]))
        assert c.holds

    def test_matrix_compression(self):
        gamma = param_sequence([SX / 2, SZ / 2, I2 - (SX + SZ) / 2])
        v = np.array([1.0, 1.0]) / np.sqrt(2)
        om = ParamMap(np.array([[[v @ g @ v]] for g in gamma[0].generators]))
        assert check_subordination(NonreducedSpec(gamma, [om]))[0].holds

    def test_source_mismatch(self):
        with pytest.raises(InvalidInput):
            NonreducedSpec(EVAL, [ParamMap(np.array([[[1.0]]]))])


class TestSeparations:
    def test_midpoint(self):
        rep = check_separations(NonreducedSpec(EVAL, [scalar_map(0.5, 0.5)]))
        assert rep.strong_holds and rep.weak_holds
        assert len(rep.weak) == 2

    def test_duplicate_block_breaks_weak_separation(self):
        rep = check_separations(NonreducedSpec(EVAL, [EVAL[1]]))
        assert rep.strong_holds and not rep.weak_holds
        assert [c.pair for c in rep.weak if not c.holds] == [("O0", "G1")]

    def test_duplicate_omegas(self):
        m = scalar_map(0.5, 0.5)
        rep = check_separations(NonreducedSpec(EVAL, [m, m]))
        assert not rep.weak_holds


class TestBuildAndVerify:
    def test_midpoint(self):
        s, rep = build_and_verify(NonreducedSpec(EVAL, [scalar_map(0.5, 0.5)]))
        assert rep.ok and not rep.is_reduced
        assert rep.algebra_dims == [1, 1, 1]
        assert sorted(rep.envelope.ideal_blocks) == rep.omega_blocks
        assert rep.envelope.envelope_dims == [1, 1]
        assert rep.envelope.worst_ratio_error() < 1e-9
        assert s.d == 2

    def test_no_omega_is_reduced(self):
        _, rep = build_and_verify(NonreducedSpec(EVAL))
        assert rep.is_reduced

    def test_violation_carries_report(self):
        with pytest.raises(StructureViolation) as info:
            build_and_verify(NonreducedSpec(EVAL, [scalar_map(2.0, -1.0)]))
        assert info.value.report.problems

    def test_duplicate_rejected(self):
        with pytest.raises(StructureViolation):
            build_and_verify(NonreducedSpec(EVAL, [EVAL[0]]))


def test_match_blocks():
    s = operator_system([np.eye(3), np.diag([0.0, 1.0, 2.0])])
    assert sorted(match_blocks(s, [1, 1, 1])) == [0, 1, 2]
    assert match_blocks(s, [1, 2]) is None


@pytest.mark.parametrize("dims,omega,seed", [([2], [1], 0), ([1, 2], [1], 1), ([2], [2], 2)])
def test_envelope_recovers_gamma(dims, omega, seed):
    spec = random_nonreduced(dims, omega, seed=seed, budget=20)
    s, rep = build_and_verify(spec, budget=20, seed=seed)
    assert rep.ok
    env = extract_params(rep.envelope.envelope_system)
    res = decide_isomorphism(spec.gamma, env, require_reduced=False, seed=seed)
    assert res.outcome == "witness"
    assert verify_equivalence(*res.sequences, res.witness)
    assert s.d <= sum(n * n for n in dims)

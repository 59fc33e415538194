import numpy as np
import pytest

from ncb.choquet import is_reduced
from ncb.errors import InvalidInput
from ncb.generate import compress, random_nonreduced, random_reduced
from ncb.opsys import Status, build_opsys


class TestRandomReduced:
    @pytest.mark.parametrize("dims,d", [([2], 3), ([2], 4), ([3], 4), ([1, 2], 5), ([1, 1, 1], 3)])
    def test_verified(self, dims, d):
        seq = random_reduced(dims, d, seed=5)
        assert seq.dims == dims and seq.d == d
        assert seq.irreducible is Status.VERIFIED and seq.faithful is Status.VERIFIED
        assert seq.strongly_separated is Status.VERIFIED
        assert len(seq.certificates["peaking"]) == len(dims)
        assert is_reduced(build_opsys(seq))

    def test_seed_determinism(self):
        a = random_reduced([2], 3, seed=11)
        b = random_reduced([2], 3, seed=11)
        c = random_reduced([2], 3, seed=12)
        assert np.array_equal(np.stack(list(a.stacked_generators())), np.stack(list(b.stacked_generators())))
        assert not np.allclose(np.stack(list(a.stacked_generators())), np.stack(list(c.stacked_generators())))

    def test_unit_preserved(self):
        seq = random_reduced([1, 2], 4, seed=0)
        for m in seq.maps:
            assert np.allclose(m(np.ones(4)), np.eye(m.target_dim))

    @pytest.mark.parametrize("dims,d", [([2], 5), ([2], 2), ([0], 1), ([], 1)])
    def test_impossible_shapes(self, dims, d):
        with pytest.raises(InvalidInput):
            random_reduced(dims, d)


def test_compress_is_unital(rng):
    seq = random_reduced([2], 4, seed=3)
    om = compress(seq, 2, rng)
    assert np.allclose(om(np.ones(4)), np.eye(2))
    for g in om.generators:
        assert np.allclose(g, g.conj().T)


def test_random_nonreduced_shape():
    spec = random_nonreduced([1, 2], [1], seed=4, budget=20)
    assert (spec.N, spec.M, spec.d) == (2, 1, 5)
    assert spec.omega[0].target_dim == 1

"""Randomized invariants checked with hypothesis over seeds."""
import warnings

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from ncb.algebra import algebra_of, block_decompose
from ncb.classify import EquivalenceWitness, fingerprint, verify_equivalence
from ncb.matlin import random_hermitian, random_unitary
from ncb.opsys import ParamMap, ParamSequence, build_opsys, extract_params, level_norm, operator_system
from ncb.serialize import Document, decode_params, params_document

seeds = st.integers(0, 2**32 - 1)
FAST = settings(max_examples=25, deadline=None)


def random_seq(rng, dims, d):
    maps = []
    for n in dims:
        gens = [random_hermitian(n, rng) for _ in range(d - 1)]
        gens.append(np.eye(n) - sum(gens))
        maps.append(ParamMap(np.stack(gens)))
    return ParamSequence(tuple(maps))


@FAST
@given(seeds, st.integers(2, 4))
def test_fingerprint_unitary_invariance(seed, n):
    rng = np.random.default_rng(seed)
    mats = [np.eye(n)] + [random_hermitian(n, rng) for _ in range(2)]
    u = random_unitary(n, rng)
    assert fingerprint(mats).matches(fingerprint([u @ m @ u.conj().T for m in mats]), 1e-9)


@FAST
@given(seeds)
def test_irreps_are_multiplicative(seed):
    rng = np.random.default_rng(seed)
    a = np.zeros((3, 3), complex)
    a[:2, :2] = random_hermitian(2, rng)
    a[2, 2] = rng.normal()
    b = np.zeros((3, 3), complex)
    b[:2, :2] = random_hermitian(2, rng)
    b[2, 2] = rng.normal()
    u = random_unitary(3, rng)
    a, b = u @ a @ u.conj().T, u @ b @ u.conj().T
    dec = block_decompose(algebra_of([np.eye(3), a, b]), seed=seed % 1000)
    assert sorted(dec.block_dims) == [1, 2]
    for k in range(dec.num_blocks):
        assert np.allclose(dec.pi(k, a @ b), dec.pi(k, a) @ dec.pi(k, b), atol=1e-8)
        assert np.allclose(dec.pi(k, a.conj().T), dec.pi(k, a).conj().T, atol=1e-8)


@FAST
@given(seeds, st.integers(1, 3))
def test_extract_params_reproduces_norms(seed, p):
    rng = np.random.default_rng(seed)
    mats = [np.eye(3)] + [random_hermitian(3, rng) for _ in range(2)]
    s = operator_system(mats)
    seq = extract_params(s)
    basis = seq.certificates["basis"]
    z = rng.normal(size=(p, p, seq.d)) + 1j * rng.normal(size=(p, p, seq.d))
    amb = np.einsum("abl,lij->aibj", z, basis).reshape(3 * p, 3 * p)
    assert np.isclose(level_norm(seq, z), np.linalg.norm(amb, 2), rtol=1e-9)


@FAST
@given(seeds)
def test_identity_witness_verifies(seed):
    rng = np.random.default_rng(seed)
    seq = random_seq(rng, [1, 2], 3)
    assert verify_equivalence(seq, seq, EquivalenceWitness.identity(seq))


@FAST
@given(seeds)
def test_params_document_round_trip(seed):
    rng = np.random.default_rng(seed)
    seq = random_seq(rng, [2, 1], 4)
    doc = Document.from_json(params_document(seq).to_json())
    back = decode_params(doc.payload)
    assert np.array_equal(np.stack(list(back.stacked_generators())), np.stack(list(seq.stacked_generators())))


@FAST
@given(seeds)
def test_dimension_bound(seed):
    rng = np.random.default_rng(seed)
    seq = random_seq(rng, [1, 2], int(rng.integers(2, 6)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = build_opsys(seq)
    assert s.d <= min(seq.d, 5)

"""Seeded random instances: reduced parameter sequences and nonreduced specs."""
from __future__ import annotations

import warnings

import numpy as np

from .choquet import find_peaking, is_reduced
from .errors import InvalidInput, StructureViolation
from .matlin import random_hermitian
from .nonreduced import NonreducedSpec, build_and_verify
from .opsys import ParamMap, ParamSequence, Status, build_opsys

MAX_ATTEMPTS = 60


def _random_map(n: int, d: int, rng: np.random.Generator) -> ParamMap:
    gens = [random_hermitian(n, rng) / np.sqrt(n) for _ in range(d - 1)]
    if n == 1:
        gens = [g.real.astype(complex) for g in gens]
    gens.append(np.eye(n) - sum(gens, np.zeros((n, n), dtype=complex)))
    return ParamMap(np.stack(gens))


def _check_dims(dims, d):
    if not dims or any(int(n) < 1 for n in dims):
        raise InvalidInput("block sizes must be positive")
    if d < 1:
        raise InvalidInput("d must be positive")
    if d > sum(n * n for n in dims):
        raise InvalidInput(f"d = {d} exceeds sum of n_k^2 = {sum(n * n for n in dims)}")
    if d < 3 and any(n > 1 for n in dims):
        raise InvalidInput("a block of size >= 2 needs d >= 3 to be irreducible")


def random_reduced(dims, d: int, seed: int = 0, budget: int = 40, max_attempts: int = MAX_ATTEMPTS) -> ParamSequence:
    """A ParamSequence with verified irreducibility, faithfulness and strong separation.

    Candidates are drawn until one passes; each block carries a peaking
    certificate in ``certificates["peaking"]``.
    """
    dims = [int(n) for n in dims]
    _check_dims(dims, d)
    rng = np.random.default_rng(seed)
    cap = max(dims) ** 2
    for attempt in range(max_attempts):
        seq = ParamSequence(tuple(_random_map(n, d, rng) for n in dims))
        if not seq.check_irreducible() or not seq.check_faithful():
            continue
        # exact screen first; the certificate search below is slow to fail
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if not is_reduced(build_opsys(seq)):
                continue
        certs = []
        for k in range(seq.N):
            c = find_peaking(seq, k, cap, budget, seed=seed + attempt)
            if c is None:
                break
            certs.append(c)
        if len(certs) < seq.N:
            continue
        seq.strongly_separated = Status.VERIFIED
        seq.certificates["peaking"] = certs
        seq.certificates["attempts"] = attempt + 1
        return seq
    raise InvalidInput(f"no valid sequence with blocks {dims} and d = {d} after {max_attempts} attempts")


def compress(gamma: ParamSequence, m: int, rng: np.random.Generator) -> ParamMap:
    """Omega(z) = V^* (Gamma(z) (x) I_m) V for a random isometry V: C^m -> (+)_k C^{n_k} (x) C^m."""
    big = sum(gamma.dims) * m
    if m > big:
        raise InvalidInput("compression target larger than the dilation space")
    a = rng.normal(size=(big, m)) + 1j * rng.normal(size=(big, m))
    v, _ = np.linalg.qr(a)
    amp = np.stack([np.kron(g, np.eye(m)) for g in gamma.stacked_generators()])
    gens = np.einsum("ai,lab,bj->lij", np.conj(v), amp, v)
    gens = (gens + np.conj(np.swapaxes(gens, 1, 2))) / 2
    return ParamMap(gens)


def random_nonreduced(dims, omega_dims, d: int | None = None, seed: int = 0, budget: int = 40,
                      max_attempts: int = 20, verify: bool = True) -> NonreducedSpec:
    """Reduced Gamma plus Omega blocks compressed from Gamma, so subordination holds by construction.

    With ``verify`` the candidate must pass :func:`build_and_verify`.
    """
    dims = [int(n) for n in dims]
    if d is None:
        d = sum(n * n for n in dims)
    gamma = random_reduced(dims, d, seed, budget)
    rng = np.random.default_rng([seed, 1])
    for _ in range(max_attempts):
        omega = [compress(gamma, int(m), rng) for m in omega_dims]
        spec = NonreducedSpec(gamma, omega)
        if not ParamSequence(tuple(omega) or gamma.maps).check_irreducible():
            continue
        if not verify:
            return spec
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                build_and_verify(spec, budget=budget, seed=seed)
        except StructureViolation:
            continue
        return spec
    raise InvalidInput("could not generate a verified nonreduced instance")

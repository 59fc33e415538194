"""Equivalence of parameterizing sequences and isomorphism of reduced systems.

Two sequences are equivalent when a permutation sigma, unitaries U_k and a
real unit-fixing theta satisfy

    Gamma~_{sigma(k)}(theta z) = U_k Gamma_k(z) U_k^*   for all z.

Witness search is heuristic; witness verification is exact.
"""
from __future__ import annotations

import itertools
import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares

from .choquet import is_reduced
from .errors import InvalidInput, PreconditionError
from .matlin import MatrixSubspace, adjoint, frame_spectrum, orthonormalize_span, random_unitary, real_to_herm
from .opsys import OperatorSystem, ParamMap, ParamSequence, Status, build_opsys, extract_params

log = logging.getLogger(__name__)

FP_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class Fingerprint:
    block_dim: int
    spectrum: np.ndarray

    def matches(self, other: "Fingerprint", tol: float = FP_TOL) -> bool:
        return (self.block_dim == other.block_dim and self.spectrum.shape == other.spectrum.shape
                and bool(np.abs(self.spectrum - other.spectrum).max(initial=0.0) < tol))

    def key(self):
        return (self.block_dim, tuple(np.round(self.spectrum, 6)))


def fingerprint(block) -> Fingerprint:
    """Frame-operator spectrum of the block's operator system.

    Accepts a ParamMap (its range), a MatrixSubspace, or a list of matrices
    spanning the block system.
    """
    if isinstance(block, ParamMap):
        space = block.range_space()
    elif isinstance(block, MatrixSubspace):
        space = block
    else:
        space = orthonormalize_span(list(block))
    if space.dim == 0:
        raise InvalidInput("fingerprint of the zero subspace")
    return Fingerprint(space.ambient_dim, frame_spectrum(space.basis))


@dataclass(eq=False)
class EquivalenceWitness:
    permutation: tuple[int, ...]
    unitaries: tuple[np.ndarray, ...]
    theta: np.ndarray

    def invariant_errors(self) -> dict:
        d = self.theta.shape[0]
        unit = max((float(np.abs(adjoint(u) @ u - np.eye(u.shape[0])).max()) for u in self.unitaries), default=0.0)
        return {
            "unitary": unit,
            "theta_imag": float(np.abs(np.imag(self.theta)).max()),
            "theta_unit": float(np.abs(np.real(self.theta) @ np.ones(d) - 1).max()),
            "theta_min_sv": float(np.linalg.svd(np.real(self.theta), compute_uv=False).min()),
        }

    def invariants_hold(self) -> bool:
        e = self.invariant_errors()
        return (e["unitary"] < 1e-9 and e["theta_imag"] == 0.0 and e["theta_unit"] < 1e-10
                and e["theta_min_sv"] > 1e-10 and sorted(self.permutation) == list(range(len(self.permutation))))

    def compose(self, other: "EquivalenceWitness") -> "EquivalenceWitness":
        """Witness g -> f from self (g -> h) and other (h -> f)."""
        perm = tuple(other.permutation[s] for s in self.permutation)
        units = tuple(other.unitaries[s] @ u for s, u in zip(self.permutation, self.unitaries))
        return EquivalenceWitness(perm, units, other.theta @ self.theta)

    @classmethod
    def identity(cls, seq: ParamSequence) -> "EquivalenceWitness":
        return cls(tuple(range(seq.N)), tuple(np.eye(n, dtype=complex) for n in seq.dims), np.eye(seq.d))


def _check_shapes(g: ParamSequence, h: ParamSequence, perm=None):
    if g.N != h.N or g.d != h.d:
        raise InvalidInput(f"sequences differ in shape: N {g.N} vs {h.N}, d {g.d} vs {h.d}")
    if perm is not None and sorted(perm) != list(range(g.N)):
        raise InvalidInput("not a permutation")


def equivalence_residual(g: ParamSequence, h: ParamSequence, w: EquivalenceWitness) -> float:
    """max_k,l |Gamma~_{sigma(k)}(theta e_l) - U_k Gamma_k(e_l) U_k^*|."""
    _check_shapes(g, h, w.permutation)
    worst = 0.0
    for k, (s, u) in enumerate(zip(w.permutation, w.unitaries)):
        if u.shape != (h.dims[s], g.dims[k]):
            raise InvalidInput(f"unitary {k} has shape {u.shape}")
        for l in range(g.d):
            lhs = h[s](w.theta[:, l])
            rhs = u @ g[k].generators[l] @ adjoint(u)
            worst = max(worst, float(np.abs(lhs - rhs).max()))
    return worst


def verify_equivalence(g: ParamSequence, h: ParamSequence, w: EquivalenceWitness, tol: float = 1e-8) -> bool:
    if g.N != h.N or g.d != h.d or len(w.unitaries) != g.N or w.theta.shape != (g.d, g.d):
        raise InvalidInput("witness and sequences have incompatible shapes")
    if any(g.dims[k] != h.dims[s] for k, s in enumerate(w.permutation)):
        return False
    if not w.invariants_hold():
        return False
    return equivalence_residual(g, h, w) < tol


def _stack(seq: ParamSequence, order) -> np.ndarray:
    """Columns: concatenated generator blocks, one column per basis vector of Z."""
    return np.stack([np.concatenate([seq[k].generators[l].reshape(-1) for k in order]) for l in range(seq.d)], axis=1)


def _conjugated_stack(g: ParamSequence, unitaries) -> np.ndarray:
    return np.stack([np.concatenate([(u @ g[k].generators[l] @ adjoint(u)).reshape(-1)
                                     for k, u in enumerate(unitaries)]) for l in range(g.d)], axis=1)


def solve_theta(g: ParamSequence, h: ParamSequence, perm, unitaries, tol: float = 1e-8):
    """theta with Gamma~_{sigma(k)}(theta e_l) = U_k Gamma_k(e_l) U_k^*, or None."""
    _check_shapes(g, h, perm)
    m = _stack(h, perm)
    rhs = _conjugated_stack(g, unitaries)
    theta, *_ = np.linalg.lstsq(m, rhs, rcond=None)
    resid = float(np.abs(m @ theta - rhs).max())
    if resid > tol:
        log.debug("no theta: residual %.2e", resid)
        return None
    if np.abs(theta.imag).max() > tol:
        log.debug("theta is not real (imag %.2e)", np.abs(theta.imag).max())
        return None
    theta = theta.real
    ones = np.ones(g.d)
    if np.abs(theta @ ones - ones).max() > tol:
        log.debug("theta does not fix the unit")
        return None
    theta = theta + np.outer(ones - theta @ ones, ones) / g.d
    if np.linalg.svd(theta, compute_uv=False).min() < 1e-10:
        log.debug("theta is singular")
        return None
    return theta


def _compatible_permutations(fg, fh, tol: float = FP_TOL):
    n = len(fg)
    ok = [[fg[k].matches(fh[s], tol) for s in range(n)] for k in range(n)]
    for perm in itertools.permutations(range(n)):
        if all(ok[k][s] for k, s in enumerate(perm)):
            yield perm


def _unitary_search(g: ParamSequence, h: ParamSequence, perm, rng, restarts: int):
    """Minimize the distance from the conjugated span to span S_h over unitaries."""
    m = _stack(h, perm)
    q, _ = np.linalg.qr(m)
    dims = g.dims

    def unitaries(params, base):
        out, pos = [], 0
        for n, b in zip(dims, base):
            hh = real_to_herm(params[pos:pos + n * n], n)
            out.append(b @ expm(1j * hh))
            pos += n * n
        return out

    def resid(params, base):
        y = _conjugated_stack(g, unitaries(params, base))
        r = y - q @ (adjoint(q) @ y)
        return np.concatenate([r.real.ravel(), r.imag.ravel()])

    size = sum(n * n for n in dims)
    for attempt in range(restarts):
        base = [random_unitary(n, rng) for n in dims]
        x = np.zeros(size)
        for _ in range(4):
            sol = least_squares(resid, x, args=(base,), method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15,
                                max_nfev=200 * (size + 1))
            base = unitaries(sol.x, base)
            x = np.zeros(size)
            if np.abs(sol.fun).max() < 1e-13:
                break
        yield attempt, base, float(np.abs(sol.fun).max())


def _fix_phase(u: np.ndarray) -> np.ndarray:
    """Remove the irrelevant global phase: largest entry of the first column made real positive."""
    i = int(np.argmax(np.abs(u[:, 0])))
    return u * (abs(u[i, 0]) / u[i, 0])


@dataclass
class IsomorphismResult:
    outcome: str  # "witness" | "negative" | "inconclusive"
    witness: EquivalenceWitness | None = None
    residual: float | None = None
    reason: str = ""
    attempts: int = 0
    permutations_tried: int = 0
    sequences: tuple = field(default=(), repr=False)


def _known_reduced(x) -> bool:
    if isinstance(x, ParamSequence):
        if all(st is Status.VERIFIED for st in (x.irreducible, x.faithful, x.strongly_separated)):
            return True
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            x = build_opsys(x)
    return is_reduced(x)


def decide_isomorphism(s, t, budget: int = 200, seed: int = 0, require_reduced: bool = True) -> IsomorphismResult:
    """Witness, certified negative, or inconclusive for reduced systems s, t.

    ``s`` and ``t`` may be OperatorSystems or ParamSequences. When
    ``require_reduced`` is False a found witness still proves isomorphism,
    but invariant mismatches are only reported as inconclusive.
    """
    for x in (s, t):
        if require_reduced and not _known_reduced(x):
            raise PreconditionError("system is not reduced; compute its C*-envelope first")
    g = extract_params(s) if isinstance(s, OperatorSystem) else s
    h = extract_params(t) if isinstance(t, OperatorSystem) else t
    reduced = require_reduced
    negative = "negative" if reduced else "inconclusive"
    if g.d != h.d:
        return IsomorphismResult(negative, reason=f"dimension mismatch: {g.d} vs {h.d}", sequences=(g, h))
    if g.N != h.N:
        return IsomorphismResult(negative, reason=f"block count mismatch: {g.N} vs {h.N}", sequences=(g, h))
    if sorted(g.dims) != sorted(h.dims):
        return IsomorphismResult(negative, reason=f"block sizes differ: {sorted(g.dims)} vs {sorted(h.dims)}",
                                 sequences=(g, h))
    fg = [fingerprint(m) for m in g.maps]
    fh = [fingerprint(m) for m in h.maps]
    perms = list(_compatible_permutations(fg, fh))
    if not perms:
        return IsomorphismResult(negative, reason="block fingerprints differ", sequences=(g, h))
    rng = np.random.default_rng(seed)
    attempts = 0
    per_perm = max(1, budget // len(perms))
    for i, perm in enumerate(perms):
        for _, units, err in _unitary_search(g, h, perm, rng, per_perm):
            attempts += 1
            if err > 1e-9:
                continue
            theta = solve_theta(g, h, perm, units)
            if theta is None:
                continue
            w = EquivalenceWitness(tuple(perm), tuple(_fix_phase(u) for u in units), theta)
            if verify_equivalence(g, h, w):
                return IsomorphismResult("witness", w, equivalence_residual(g, h, w), attempts=attempts,
                                         permutations_tried=i + 1, sequences=(g, h))
    return IsomorphismResult("inconclusive", reason="search budget exhausted", attempts=attempts,
                             permutations_tried=len(perms), sequences=(g, h))

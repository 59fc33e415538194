"""Operator systems and parameterizing sequences.

The parameter space is always Z = C^d with coordinatewise conjugation and
unit (1, ..., 1). A parameter map is stored by the hermitian images
G_1..G_d of the standard basis, so Gamma(z) = sum_j z_j G_j.
"""
from __future__ import annotations

import enum
import logging
import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import BlockDecomposition, StarAlgebra, block_decompose, commutant, generate_algebra
from .errors import InternalConsistencyError, InvalidInput, StarViolation, UnitViolation
from .matlin import (
    TOL_RANK,
    MatrixSubspace,
    adjoint,
    as_cmatrix,
    assemble_block,
    direct_sum,
    hermitian_basis,
    herm_to_real,
    operator_norm,
    orthonormalize_span,
    real_to_herm,
    svd_rank,
)

log = logging.getLogger(__name__)


class Status(enum.Enum):
    UNVERIFIED = "unverified"
    VERIFIED = "verified"
    FAILED = "failed"


@dataclass(frozen=True)
class StarVectorSpace:
    dim: int

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidInput("parameter space needs dimension >= 1")

    @property
    def unit(self) -> np.ndarray:
        return np.ones(self.dim)

    def conj(self, z: np.ndarray) -> np.ndarray:
        return np.conj(z)


@dataclass(frozen=True, eq=False)
class ParamMap:
    generators: np.ndarray  # (d, n, n), hermitian, summing to I

    @property
    def d(self) -> int:
        return self.generators.shape[0]

    @property
    def target_dim(self) -> int:
        return self.generators.shape[1]

    @property
    def source(self) -> StarVectorSpace:
        return StarVectorSpace(self.d)

    def __call__(self, z) -> np.ndarray:
        return np.einsum("j,jab->ab", np.asarray(z, dtype=complex), self.generators)

    def cells(self, coeffs: np.ndarray) -> np.ndarray:
        """Operator matrix (Gamma(z_ij)) for a (p, p, d) coefficient array."""
        coeffs = np.asarray(coeffs, dtype=complex)
        return assemble_block(np.einsum("pqj,jab->pqab", coeffs, self.generators))

    def range_space(self) -> MatrixSubspace:
        return orthonormalize_span(list(self.generators))

    def conjugated(self, u: np.ndarray) -> "ParamMap":
        return ParamMap(np.einsum("ab,jbc,dc->jad", u, self.generators, np.conj(u)))

    def reparameterized(self, theta: np.ndarray) -> "ParamMap":
        """The map z -> Gamma(theta^{-1} z) ... expressed on generators.

        Returns Gamma' with Gamma'(theta z) = Gamma(z); requires theta invertible.
        """
        inv = np.linalg.inv(theta)
        return ParamMap(np.einsum("lj,lab->jab", inv, self.generators))


def validate_param_map(generators, tol: float = 1e-10) -> ParamMap:
    """Check hermiticity and the resolution of the identity."""
    gens = [as_cmatrix(g, square=True) for g in generators]
    if not gens:
        raise InvalidInput("a parameter map needs at least one generator")
    n = gens[0].shape[0]
    if any(g.shape != (n, n) for g in gens):
        raise InvalidInput("generators must share one square size")
    for j, g in enumerate(gens):
        if np.abs(g - adjoint(g)).max() > tol:
            raise StarViolation(f"generator {j} is not hermitian")
    if np.abs(sum(gens) - np.eye(n)).max() > tol:
        raise UnitViolation("generators do not sum to the identity")
    return ParamMap(np.stack(gens))


@dataclass(eq=False)
class ParamSequence:
    maps: tuple[ParamMap, ...]
    irreducible: Status = Status.UNVERIFIED
    faithful: Status = Status.UNVERIFIED
    strongly_separated: Status = Status.UNVERIFIED
    certificates: dict = field(default_factory=dict)

    def __post_init__(self):
        self.maps = tuple(self.maps)
        if not self.maps:
            raise InvalidInput("empty parameter sequence")
        if len({m.d for m in self.maps}) != 1:
            raise InvalidInput("parameter maps have different source dimensions")

    @property
    def d(self) -> int:
        return self.maps[0].d

    @property
    def N(self) -> int:
        return len(self.maps)

    @property
    def dims(self) -> list[int]:
        return [m.target_dim for m in self.maps]

    def __len__(self):
        return len(self.maps)

    def __getitem__(self, k) -> ParamMap:
        return self.maps[k]

    def stacked_generators(self) -> np.ndarray:
        """Block-diagonal generators of S_Gamma, shape (d, sum n_k, sum n_k)."""
        return np.stack([direct_sum([m.generators[j] for m in self.maps]) for j in range(self.d)])

    def check_irreducible(self) -> bool:
        ok = all(commutant(m.range_space()).dim == 1 for m in self.maps)
        self.irreducible = Status.VERIFIED if ok else Status.FAILED
        return ok

    def check_faithful(self, tol_rank: float = TOL_RANK) -> bool:
        cols = np.stack([g.reshape(-1) for g in self.stacked_generators()], axis=1)
        rank = svd_rank(np.linalg.svd(cols, compute_uv=False), tol_rank)
        ok = rank == self.d
        self.faithful = Status.VERIFIED if ok else Status.FAILED
        self.certificates["faithful_rank"] = rank
        return ok


def param_sequence(*maps) -> ParamSequence:
    return ParamSequence(tuple(m if isinstance(m, ParamMap) else validate_param_map(m) for m in maps))


@dataclass(frozen=True, eq=False)
class OperatorSystem:
    space: MatrixSubspace
    algebra: StarAlgebra
    decomposition: BlockDecomposition

    @property
    def ambient_dim(self) -> int:
        return self.space.ambient_dim

    @property
    def d(self) -> int:
        return self.space.dim

    @property
    def N(self) -> int:
        return self.decomposition.num_blocks

    @property
    def block_dims(self) -> list[int]:
        return self.decomposition.block_dims

    def hermitian_basis(self) -> np.ndarray:
        return hermitian_basis(self.space)

    def block_image(self, k: int) -> MatrixSubspace:
        """pi_k(S) as a subspace of M_{n_k}."""
        b = self.decomposition.blocks[k]
        return orthonormalize_span([b.irrep(x) for x in self.space.basis], n=b.dim)

    def compress(self, blocks: Sequence[int]) -> "OperatorSystem":
        """The system x -> (+)_{k in blocks} pi_k(x), realized block-diagonally."""
        mats = [direct_sum([self.decomposition.pi(k, x) for k in blocks]) for x in self.space.basis]
        return operator_system(mats, seed=0)


def operator_system(mats, seed: int = 0, tol_rank: float = TOL_RANK) -> OperatorSystem:
    """Operator system spanned by ``mats`` (must contain I and be *-closed)."""
    mats = [as_cmatrix(m, square=True) for m in mats]
    if not mats:
        raise InvalidInput("an operator system needs a spanning set")
    space = orthonormalize_span(mats, tol_rank)
    n = space.ambient_dim
    if not space.contains(np.eye(n)):
        raise InvalidInput("the span does not contain the identity")
    if not space.adjoint_closed():
        raise InvalidInput("the span is not closed under adjoints")
    alg = generate_algebra(space, tol_rank)
    return OperatorSystem(space, alg, block_decompose(alg, seed=seed, tol_rank=tol_rank))


def build_opsys(seq: ParamSequence, seed: int = 0, tol_rank: float = TOL_RANK) -> OperatorSystem:
    """S_Gamma = {Gamma_1(z) (+) ... (+) Gamma_N(z)}."""
    s = operator_system(list(seq.stacked_generators()), seed=seed, tol_rank=tol_rank)
    if s.d < seq.d:
        warnings.warn(f"sequence is not faithful: dim S = {s.d} < d = {seq.d}", stacklevel=2)
    return s


def _canonical_rows(coords: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Reduced row echelon form of a full-row-rank real matrix.

    Depends only on the row space, which makes the chosen basis canonical.
    """
    a = np.array(coords, dtype=float)
    rows, cols = a.shape
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = r + int(np.argmax(np.abs(a[r:, c])))
        if abs(a[piv, c]) <= tol:
            continue
        a[[r, piv]] = a[[piv, r]]
        a[r] /= a[r, c]
        for i in range(rows):
            if i != r:
                a[i] -= a[i, c] * a[r]
        r += 1
    return a[:r]


def _entry_coords(h: np.ndarray) -> np.ndarray:
    """Real coordinates of a hermitian matrix: upper off-diagonal entries row-major (re, im), then the diagonal."""
    n = h.shape[0]
    iu = np.triu_indices(n, 1)
    off = np.stack([h[iu].real, h[iu].imag], axis=1).reshape(-1)
    return np.concatenate([off, np.diag(h).real])


def _from_entry_coords(x: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(n, 1)
    m = len(iu[0])
    h = np.zeros((n, n), dtype=complex)
    h[iu] = x[0:2 * m:2] + 1j * x[1:2 * m:2]
    h = h + h.conj().T
    h[np.diag_indices(n)] = x[2 * m:]
    return h


def self_adjoint_unit_basis(s: OperatorSystem) -> np.ndarray:
    """Hermitian basis s_1..s_d of S with s_1 + ... + s_d = 1.

    s_1..s_{d-1} span the trace-orthogonal complement of the identity in the
    hermitian part of S, in reduced row echelon form on matrix entries;
    s_d = 1 - (s_1 + ... + s_{d-1}).
    """
    n = s.ambient_dim
    eye = np.eye(n)
    herm = s.hermitian_basis()
    coords = np.stack([herm_to_real(h) for h in herm])
    unit = herm_to_real(eye) / np.sqrt(n)
    coords = coords - np.outer(coords @ unit, unit)
    u, sv, _ = np.linalg.svd(coords.T, full_matrices=False)
    r = svd_rank(sv, TOL_RANK, ref=1.0)
    if r != s.d - 1:
        raise InternalConsistencyError(f"hermitian complement of the unit has dim {r}, expected {s.d - 1}")
    comp = [real_to_herm(u[:, i], n) for i in range(r)]
    if comp:
        rref = _canonical_rows(np.stack([_entry_coords(h) for h in comp]))
        comp = [_from_entry_coords(row, n) for row in rref]
    last = eye - sum(comp, np.zeros((n, n), dtype=complex))
    return np.stack(comp + [last])


def extract_params(s: OperatorSystem) -> ParamSequence:
    """Gamma_k(z) = pi_k(L(z)) with L(z) = sum_j z_j s_j."""
    basis = self_adjoint_unit_basis(s)
    maps = []
    for k in range(s.N):
        gens = np.stack([s.decomposition.pi(k, b) for b in basis])
        gens = (gens + np.conj(np.swapaxes(gens, 1, 2))) / 2
        maps.append(ParamMap(gens))
    seq = ParamSequence(tuple(maps))
    seq.certificates["basis"] = basis
    return seq


def system_map(s: OperatorSystem) -> ParamMap:
    """L: Z -> S itself, as a single (reducible) parameter map on the ambient space."""
    return ParamMap(self_adjoint_unit_basis(s))


def level_norm(target, coeffs, k="ambient") -> float:
    """Norm of (Gamma_k(z_ij)) for a (p, p, d) coefficient array.

    ``target`` is a ParamSequence or an OperatorSystem (coefficients then
    refer to the basis from :func:`self_adjoint_unit_basis`). ``k="ambient"``
    gives the norm in the direct sum, i.e. the maximum over blocks.
    """
    seq = extract_params(target) if isinstance(target, OperatorSystem) else target
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.ndim == 1:
        coeffs = coeffs.reshape(1, 1, -1)
    if coeffs.ndim != 3 or coeffs.shape[0] != coeffs.shape[1] or coeffs.shape[2] != seq.d:
        raise InvalidInput(f"coefficient array must have shape (p, p, {seq.d})")
    if k == "ambient":
        return max(operator_norm(m.cells(coeffs)) for m in seq.maps)
    return operator_norm(seq[k].cells(coeffs))


def paulsen_device(space_basis, n: int | None = None) -> OperatorSystem:
    """Operator system [[lambda 1, s], [t^*, mu 1]] for s, t in the space."""
    mats = [as_cmatrix(m, square=True) for m in space_basis]
    if n is None:
        if not mats:
            raise InvalidInput("ambient size needed for an empty operator space")
        n = mats[0].shape[0]
    if any(m.shape != (n, n) for m in mats):
        raise InvalidInput("operator space matrices must share one square size")
    z = np.zeros((n, n))
    eye = np.eye(n)
    span = [np.block([[eye, z], [z, z]]), np.block([[z, z], [z, eye]])]
    for m in mats:
        span.append(np.block([[z, m], [z, z]]))
        span.append(np.block([[z, z], [adjoint(m), z]]))
    return operator_system(span)


@dataclass(frozen=True)
class Invariants:
    d: int
    N: int
    block_dims: tuple[int, ...]
    block_image_dims: tuple[int, ...]

    @property
    def bound(self) -> int:
        return sum(n * n for n in self.block_dims)


def invariants(s: OperatorSystem) -> Invariants:
    """(d, N, n_1..n_N), checking dim pi_k(S) <= n_k^2 and d <= sum n_k^2."""
    dims = tuple(s.block_dims)
    images = tuple(s.block_image(k).dim for k in range(s.N))
    inv = Invariants(s.d, s.N, dims, images)
    for k, (n, m) in enumerate(zip(dims, images)):
        if m > n * n:
            raise InternalConsistencyError(f"dim pi_{k}(S) = {m} exceeds {n * n}")
    if inv.d > inv.bound:
        raise InternalConsistencyError(f"d = {inv.d} exceeds sum of n_k^2 = {inv.bound}")
    return inv

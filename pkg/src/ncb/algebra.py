"""Unital *-subalgebras of M_n: generation, commutant, center and the
central decomposition into full matrix blocks.

Every finite-dimensional C*-algebra A inside M_n is unitarily a direct sum
of blocks ``M_{n_k} (x) I_{m_k}``. :func:`block_decompose` recovers the blocks
numerically from random elements of the center and of each block.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DegenerateSpectrum, InvalidInput
from .matlin import (
    TOL_RANK,
    MatrixSubspace,
    adjoint,
    as_cmatrix,
    assemble_block,
    frame_spectrum,
    hermitian_part,
    null_space,
    orthonormalize_span,
    span_union,
)

log = logging.getLogger(__name__)

MAX_RETRIES = 5


@dataclass(frozen=True, eq=False)
class StarAlgebra:
    ambient_dim: int
    space: MatrixSubspace
    generators: MatrixSubspace | None = None
    contains_unit: bool = True

    @property
    def dim(self) -> int:
        return self.space.dim


def _commutator_rows(basis: np.ndarray) -> np.ndarray:
    n = basis.shape[-1]
    eye = np.eye(n)
    # row-major vec: vec(XB) = (I (x) B^T) vec X, vec(BX) = (B (x) I) vec X
    return np.concatenate([np.kron(eye, b.T) - np.kron(b, eye) for b in basis], axis=0)


def commutant(s: MatrixSubspace, tol_rank: float = TOL_RANK) -> MatrixSubspace:
    """All matrices commuting with every element of ``s``."""
    n = s.ambient_dim
    if s.dim == 0:
        return orthonormalize_span(np.eye(n * n).reshape(n * n, n, n), tol_rank)
    kernel = null_space(_commutator_rows(s.basis), tol_rank)
    return MatrixSubspace(n, kernel.T.reshape(-1, n, n).copy())


def generate_algebra(s: MatrixSubspace, tol_rank: float = TOL_RANK) -> StarAlgebra:
    """C*-algebra generated by a unital *-closed subspace."""
    n = s.ambient_dim
    eye = np.eye(n)
    if not s.contains(eye):
        raise InvalidInput("generating space does not contain the identity")
    if not s.adjoint_closed():
        raise InvalidInput("generating space is not closed under adjoints")
    current = s
    while True:
        products = [w @ g for w in current.basis for g in s.basis]
        grown = span_union(current, orthonormalize_span(products, tol_rank), tol_rank=tol_rank)
        if grown.dim == current.dim:
            break
        current = grown
    return StarAlgebra(n, current, generators=s)


def algebra_of(mats: Sequence, tol_rank: float = TOL_RANK) -> StarAlgebra:
    """Convenience: algebra generated by arbitrary matrices (adjoints and unit added)."""
    mats = [as_cmatrix(m, square=True) for m in mats]
    n = mats[0].shape[0]
    span = orthonormalize_span([np.eye(n)] + mats + [adjoint(m) for m in mats], tol_rank)
    return generate_algebra(span, tol_rank)


def center(a: StarAlgebra, tol_rank: float = TOL_RANK) -> MatrixSubspace:
    n = a.ambient_dim
    basis = a.space.basis
    gens = a.generators.basis if a.generators is not None else basis
    cols = np.stack([
        np.concatenate([(x @ g - g @ x).reshape(-1) for g in gens]) for x in basis
    ], axis=1)
    coeffs = null_space(cols, tol_rank)
    elems = np.einsum("ic,ijk->cjk", coeffs, basis)
    return orthonormalize_span(list(elems), tol_rank, n=n)


def _random_hermitian_in(space: MatrixSubspace, rng: np.random.Generator) -> np.ndarray:
    c = rng.normal(size=space.dim) + 1j * rng.normal(size=space.dim)
    h = hermitian_part(np.einsum("i,ijk->jk", c, space.basis))
    return h / max(np.linalg.norm(h, 2), 1e-300)


def _cluster(evals: np.ndarray, count: int, sep: float = 1e3, floor: float = 1e-6) -> list[np.ndarray] | None:
    """Split ascending eigenvalues into ``count`` groups at the largest gaps.

    Returns index groups, or None when the chosen gaps are not clearly wider
    than the spread inside the groups.
    """
    m = len(evals)
    if count == 1:
        return [np.arange(m)]
    gaps = np.diff(evals)
    if len(gaps) < count - 1:
        return None
    cut = np.sort(np.argsort(gaps)[::-1][:count - 1])
    chosen = gaps[cut]
    rest = np.delete(gaps, cut)
    if chosen.min() < floor or (rest.size and chosen.min() < sep * rest.max()):
        return None
    bounds = [0] + [c + 1 for c in cut] + [m]
    return [np.arange(bounds[i], bounds[i + 1]) for i in range(count)]


@dataclass(frozen=True, eq=False)
class Block:
    """One central summand: ``U^* x U = pi(x) (x) I_m`` for x in the algebra."""

    dim: int
    multiplicity: int
    projection: np.ndarray
    isometry: np.ndarray

    @property
    def irrep_isometry(self) -> np.ndarray:
        return self.isometry[:, ::self.multiplicity]

    def irrep(self, x: np.ndarray) -> np.ndarray:
        j = self.irrep_isometry
        return adjoint(j) @ x @ j

    def embed(self, y: np.ndarray) -> np.ndarray:
        """Ambient operator whose image under this block is ``y`` (zero elsewhere)."""
        u = self.isometry
        return u @ np.kron(y, np.eye(self.multiplicity)) @ adjoint(u)


@dataclass(frozen=True, eq=False)
class BlockDecomposition:
    algebra: StarAlgebra
    blocks: tuple[Block, ...]

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    @property
    def block_dims(self) -> list[int]:
        return [b.dim for b in self.blocks]

    @property
    def multiplicities(self) -> list[int]:
        return [b.multiplicity for b in self.blocks]

    @property
    def central_projections(self) -> list[np.ndarray]:
        return [b.projection for b in self.blocks]

    def pi(self, k: int, x: np.ndarray) -> np.ndarray:
        return self.blocks[k].irrep(x)

    def reconstruct(self, images: Sequence[np.ndarray]) -> np.ndarray:
        return sum(b.embed(y) for b, y in zip(self.blocks, images))


def _split_block(alg: MatrixSubspace, v: np.ndarray, rng: np.random.Generator, tol_rank: float):
    """Matrix units for the compression of the algebra to range(v)."""
    comp = orthonormalize_span([adjoint(v) @ a @ v for a in alg.basis], tol_rank)
    n = int(round(np.sqrt(comp.dim)))
    r = v.shape[1]
    if n * n != comp.dim or r % n:
        raise DegenerateSpectrum(f"block of size {r} has algebra dimension {comp.dim}")
    m = r // n
    w, vecs = np.linalg.eigh(_random_hermitian_in(comp, rng))
    groups = _cluster(w, n)
    if groups is None or any(len(g) != m for g in groups):
        return None
    spaces = [vecs[:, g] for g in groups]
    c = rng.normal(size=comp.dim) + 1j * rng.normal(size=comp.dim)
    a = np.einsum("i,ijk->jk", c, comp.basis)
    cols = [spaces[0]]
    scale = np.linalg.norm(a)
    for wi in spaces[1:]:
        x = adjoint(spaces[0]) @ a @ wi
        if np.linalg.norm(x) < 1e-3 * scale * np.sqrt(m / r):
            return None
        u, _, vh = np.linalg.svd(x)
        q = u @ vh  # polar factor of x
        cols.append(wi @ adjoint(q))
    # column order (i, j): i indexes the irrep, j the multiplicity
    basis = np.concatenate(cols, axis=1)
    u_amb = v @ basis
    return n, m, u_amb


def _check_block(alg: MatrixSubspace, u: np.ndarray, n: int, m: int) -> float:
    worst = 0.0
    j = u[:, ::m]
    for a in alg.basis:
        img = adjoint(j) @ a @ j
        worst = max(worst, float(np.abs(adjoint(u) @ a @ u - np.kron(img, np.eye(m))).max()))
    return worst


def block_decompose(a: StarAlgebra, seed: int = 0, tol_rank: float = TOL_RANK) -> BlockDecomposition:
    """Central decomposition of ``a`` into irreducible blocks.

    Blocks are ordered by size, then by the frame-spectrum fingerprint of
    the image of the generating space, then by position in the ambient space.
    """
    rng = np.random.default_rng(seed)
    z = center(a, tol_rank)
    num = z.dim
    for attempt in range(MAX_RETRIES):
        w, vecs = np.linalg.eigh(_random_hermitian_in(z, rng))
        groups = _cluster(w, num)
        if groups is None:
            log.debug("central element failed to split (attempt %d)", attempt)
            continue
        blocks = []
        for g in groups:
            v = vecs[:, g]
            for _ in range(MAX_RETRIES):
                split = _split_block(a.space, v, rng, tol_rank)
                if split is not None and _check_block(a.space, split[2], split[0], split[1]) < 1e-8:
                    break
            else:
                break
            n, m, u = split
            blocks.append(Block(n, m, v @ adjoint(v), u))
        else:
            return BlockDecomposition(a, tuple(sorted(blocks, key=lambda b: _block_key(a, b))))
    raise DegenerateSpectrum(f"could not split the algebra after {MAX_RETRIES} attempts")


def _block_key(a: StarAlgebra, b: Block):
    gens = a.generators if a.generators is not None else a.space
    img = orthonormalize_span([b.irrep(g) for g in gens.basis], n=b.dim)
    spec = tuple(np.round(frame_spectrum(img.basis), 6)) if img.dim else ()
    weight = tuple(-np.round(np.real(np.diag(b.projection)), 6))
    return (b.dim, spec, weight)


def apply_irrep(d: BlockDecomposition, k: int, x, tol: float = 1e-8) -> np.ndarray:
    """pi_k applied to one element, or entrywise to a p x p array of elements."""
    arr = np.asarray(x, dtype=complex)
    if arr.ndim == 2:
        if not d.algebra.space.contains(arr, tol):
            raise InvalidInput("element is not in the algebra")
        return d.pi(k, arr)
    if arr.ndim != 4:
        raise InvalidInput("expected a matrix or a p x p array of matrices")
    for cell in arr.reshape(-1, *arr.shape[2:]):
        if not d.algebra.space.contains(cell, tol):
            raise InvalidInput("cell is not in the algebra")
    imgs = np.einsum("ja,pqab,bk->pqjk", adjoint(d.blocks[k].irrep_isometry), arr, d.blocks[k].irrep_isometry)
    return assemble_block(imgs)

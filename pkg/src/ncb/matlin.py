"""Dense complex matrix kernel.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. A
:class:`MatrixSubspace` keeps an orthonormal basis with respect to the trace
inner product ``<A, B> = tr(A^* B)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import InvalidInput

TOL_RANK = 1e-9


def as_cmatrix(a, square: bool = False) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim == 0:
        m = m.reshape(1, 1)
    if m.ndim != 2:
        raise InvalidInput(f"expected a matrix, got array of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InvalidInput("matrix has non-finite entries")
    if square and m.shape[0] != m.shape[1]:
        raise InvalidInput(f"expected a square matrix, got shape {m.shape}")
    return m


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def operator_norm(a) -> float:
    """Largest singular value of ``a``."""
    m = as_cmatrix(a)
    if m.size == 0:
        return 0.0
    return float(np.linalg.norm(m, 2))


def is_hermitian(a: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.abs(a - adjoint(a)).max(initial=0.0) <= tol)


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return (a + adjoint(a)) / 2


def inner(a: np.ndarray, b: np.ndarray) -> complex:
    return complex(np.vdot(a, b))


def tensor(a, b) -> np.ndarray:
    return np.kron(as_cmatrix(a), as_cmatrix(b))


def direct_sum(blocks: Sequence[np.ndarray]) -> np.ndarray:
    blocks = [as_cmatrix(b) for b in blocks]
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=complex)
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def assemble_block(cells) -> np.ndarray:
    """Place ``cells[i][j]`` (all m x m) at block position (i, j)."""
    if isinstance(cells, np.ndarray) and cells.ndim == 4:
        p, q, m, k = cells.shape
        if p != q:
            raise InvalidInput("cell array must be square")
        return np.asarray(cells, dtype=complex).transpose(0, 2, 1, 3).reshape(p * m, q * k)
    rows = [list(r) for r in cells]
    p = len(rows)
    if p == 0 or any(len(r) != p for r in rows):
        raise InvalidInput("cell array must be a non-empty square array")
    mats = [[as_cmatrix(c) for c in r] for r in rows]
    shape = mats[0][0].shape
    if any(c.shape != shape for r in mats for c in r):
        raise InvalidInput("ragged cells in block assembly")
    return np.block(mats)


def svd_rank(s: np.ndarray, tol_rank: float = TOL_RANK, ref: float = 0.0) -> int:
    """Numerical rank from singular values.

    The threshold is relative on s^2, against the larger of the top singular
    value and ``ref`` (a caller-supplied scale for near-zero operators).
    """
    top = max(s[0] if s.size else 0.0, ref)
    if top == 0:
        return 0
    return int(np.sum(s ** 2 > tol_rank * top ** 2))


def null_space(m: np.ndarray, tol_rank: float = TOL_RANK, ref: float = 1.0) -> np.ndarray:
    """Orthonormal columns spanning the kernel of ``m``.

    ``ref`` is the scale below which singular values count as zero even if
    every singular value is tiny; operands here are normalized, so 1 is used.
    """
    m = np.atleast_2d(m)
    if m.shape[0] == 0:
        return np.eye(m.shape[1], dtype=m.dtype)
    _, s, vh = np.linalg.svd(m, full_matrices=True)
    r = svd_rank(s, tol_rank, ref)
    return adjoint(vh[r:]) if np.iscomplexobj(vh) else vh[r:].T


@dataclass(frozen=True, eq=False)
class MatrixSubspace:
    """Subspace of n x n complex matrices with a trace-orthonormal basis."""

    ambient_dim: int
    basis: np.ndarray  # shape (dim, n, n)

    @property
    def dim(self) -> int:
        return self.basis.shape[0]

    def __len__(self) -> int:
        return self.dim

    def __iter__(self):
        return iter(self.basis)

    @property
    def vectors(self) -> np.ndarray:
        """Basis as rows of a (dim, n*n) matrix."""
        return self.basis.reshape(self.dim, -1)

    def coordinates(self, x: np.ndarray) -> np.ndarray:
        return np.conj(self.vectors) @ np.asarray(x, dtype=complex).reshape(-1)

    def project(self, x: np.ndarray) -> np.ndarray:
        n = self.ambient_dim
        return (self.coordinates(x) @ self.vectors).reshape(n, n)

    def residual(self, x: np.ndarray) -> float:
        """Frobenius distance from ``x`` to the subspace."""
        return float(np.linalg.norm(np.asarray(x) - self.project(x)))

    def contains(self, x: np.ndarray, tol: float = 1e-8) -> bool:
        scale = max(1.0, float(np.linalg.norm(x)))
        return self.residual(x) <= tol * scale

    def adjoint_closed(self, tol: float = 1e-8) -> bool:
        return all(self.contains(adjoint(b), tol) for b in self.basis)

    def projector(self) -> np.ndarray:
        """Orthogonal projector onto the subspace, acting on row-major vec."""
        v = self.vectors
        return v.T @ np.conj(v)


def orthonormalize_span(spanning, tol_rank: float = TOL_RANK, n: int | None = None) -> MatrixSubspace:
    """Orthonormal basis for the span of ``spanning``.

    ``n`` fixes the ambient size when ``spanning`` is empty.
    """
    mats = [as_cmatrix(m, square=True) for m in spanning]
    if not mats:
        if n is None:
            raise InvalidInput("ambient size needed for an empty spanning set")
        return MatrixSubspace(n, np.zeros((0, n, n), dtype=complex))
    size = mats[0].shape[0]
    if n is not None and n != size or any(m.shape != (size, size) for m in mats):
        raise InvalidInput("matrices in a spanning set must share one square size")
    cols = np.stack([m.reshape(-1) for m in mats], axis=1)
    u, s, _ = np.linalg.svd(cols, full_matrices=False)
    r = svd_rank(s, tol_rank)
    basis = u[:, :r].T.reshape(r, size, size)
    return MatrixSubspace(size, basis)


def span_union(*spaces: MatrixSubspace, tol_rank: float = TOL_RANK) -> MatrixSubspace:
    mats = [b for sp in spaces for b in sp.basis]
    return orthonormalize_span(mats, tol_rank, n=spaces[0].ambient_dim)


def hermitian_basis(space: MatrixSubspace, tol_rank: float = TOL_RANK) -> np.ndarray:
    """Real-orthonormal hermitian basis of the hermitian part of a *-closed space.

    For a *-closed space of complex dimension d the result has d elements.
    """
    n = space.ambient_dim
    herm = []
    for b in space.basis:
        herm.append(hermitian_part(b))
        herm.append((b - adjoint(b)) / 2j)
    if not herm:
        return np.zeros((0, n, n), dtype=complex)
    coords = np.stack([herm_to_real(h) for h in herm], axis=1)
    u, s, _ = np.linalg.svd(coords, full_matrices=False)
    r = svd_rank(s, tol_rank)
    return np.stack([real_to_herm(u[:, i], n) for i in range(r)]) if r else np.zeros((0, n, n), dtype=complex)


def herm_to_real(h: np.ndarray) -> np.ndarray:
    """Coordinates of a hermitian matrix in an orthonormal real basis of Herm(n).

    Ordering: diagonal entries, then for i < j (row-major) sqrt(2)*Re h_ij and
    sqrt(2)*Im h_ij. Trace inner products become dot products.
    """
    n = h.shape[0]
    iu = np.triu_indices(n, 1)
    off = h[iu]
    return np.concatenate([np.real(np.diag(h)), np.sqrt(2) * np.real(off), np.sqrt(2) * np.imag(off)])


def real_to_herm(x: np.ndarray, n: int) -> np.ndarray:
    iu = np.triu_indices(n, 1)
    k = len(iu[0])
    h = np.zeros((n, n), dtype=complex)
    h[np.diag_indices(n)] = x[:n]
    off = (x[n:n + k] + 1j * x[n + k:n + 2 * k]) / np.sqrt(2)
    h[iu] = off
    h[iu[1], iu[0]] = np.conj(off)
    return h


def random_hermitian(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    return (a + adjoint(a)) / 2


def random_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    z = (rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def frame_operator(basis: np.ndarray) -> np.ndarray:
    """sum_i B_i (x) conj(B_i) over an orthonormal basis; basis-independent."""
    n = basis.shape[-1]
    f = np.zeros((n * n, n * n), dtype=complex)
    for b in basis:
        f += np.kron(b, np.conj(b))
    return f


def frame_spectrum(basis: np.ndarray) -> np.ndarray:
    f = frame_operator(basis)
    return np.sort(np.linalg.eigvalsh(hermitian_part(f)))

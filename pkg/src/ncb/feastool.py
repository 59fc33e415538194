"""Linear optimization over spectrahedra.

A spectrahedron here is ``{(X_1, ..., X_c) : X_i hermitian PSD, A x = b}``
where ``x`` concatenates the real coordinates of the X_i (see
:func:`ncb.matlin.herm_to_real`), so trace inner products are dot products.
The conic programs are solved with Clarabel; each complex PSD constraint is
posed through its real symmetric embedding [[Re X, -Im X], [Im X, Re X]].
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Sequence

import clarabel
import numpy as np
import scipy.sparse as sps

from .errors import Infeasible, InvalidInput, SolverError
from .matlin import TOL_RANK, herm_to_real, real_to_herm, svd_rank

log = logging.getLogger(__name__)

SDP_EPS = 1e-7
FEAS_TOL = 1e-8
# equality rows are dropped only when numerically zero, relative to max(1, s_max)
EQ_RANK_TOL = 1e-10
# a non-singleton witness must be this far from the known point
WITNESS_MIN = 1e-5
_OK = {"Solved", "AlmostSolved"}


def _svec_index(k: int):
    """(row, col) pairs of the upper triangle in column-major order."""
    return [(i, j) for j in range(k) for i in range(j + 1)]


def _embedding_map(m: int) -> np.ndarray:
    """Matrix sending herm_to_real coordinates to the svec of the real embedding."""
    idx = _svec_index(2 * m)
    out = np.zeros((len(idx), m * m))
    for c in range(m * m):
        e = np.zeros(m * m)
        e[c] = 1.0
        h = real_to_herm(e, m)
        r = np.block([[h.real, -h.imag], [h.imag, h.real]])
        out[:, c] = [r[i, j] * (1.0 if i == j else np.sqrt(2)) for i, j in idx]
    return out


@dataclass(frozen=True, eq=False)
class Spectrahedron:
    cone_dims: tuple[int, ...]
    eq_matrix: np.ndarray  # orthonormal rows after reduction
    eq_rhs: np.ndarray
    known_point: np.ndarray | None = None

    @property
    def size(self) -> int:
        return sum(m * m for m in self.cone_dims)

    @cached_property
    def directions(self) -> np.ndarray:
        """Orthonormal basis (rows) of the kernel of the equality constraints."""
        if self.eq_matrix.shape[0] == 0:
            return np.eye(self.size)
        _, s, vh = np.linalg.svd(self.eq_matrix, full_matrices=True)
        return vh[svd_rank(s, TOL_RANK, 1.0):]

    def split(self, x: np.ndarray) -> list[np.ndarray]:
        out, pos = [], 0
        for m in self.cone_dims:
            out.append(real_to_herm(x[pos:pos + m * m], m))
            pos += m * m
        return out

    def join(self, mats: Sequence[np.ndarray]) -> np.ndarray:
        if len(mats) != len(self.cone_dims):
            raise InvalidInput("wrong number of cone components")
        return np.concatenate([herm_to_real(np.asarray(h, dtype=complex)) for h in mats])

    def residual(self, x: np.ndarray) -> float:
        if self.eq_matrix.shape[0] == 0:
            return 0.0
        return float(np.abs(self.eq_matrix @ x - self.eq_rhs).max())

    def min_eig(self, x: np.ndarray) -> float:
        return min(float(np.linalg.eigvalsh(h)[0]) for h in self.split(x))

    def is_feasible(self, x: np.ndarray, tol: float = FEAS_TOL) -> bool:
        return self.residual(x) < tol and self.min_eig(x) > -tol

    def project_affine(self, x: np.ndarray) -> np.ndarray:
        if self.eq_matrix.shape[0] == 0:
            return x
        return x - self.eq_matrix.T @ (self.eq_matrix @ x - self.eq_rhs)

    def with_point(self, x: np.ndarray) -> "Spectrahedron":
        return Spectrahedron(self.cone_dims, self.eq_matrix, self.eq_rhs, np.asarray(x, dtype=float))


def spectrahedron(cone_dims: Sequence[int], constraint: Callable, rhs, known_point=None,
                  rank_tol: float = EQ_RANK_TOL) -> Spectrahedron:
    """Build a spectrahedron from a linear map on the cone components.

    ``constraint(mats)`` must be complex-linear in the hermitian tuple ``mats``
    and return an array; the equalities are ``constraint(X) == rhs`` for both
    real and imaginary parts. Redundant rows are removed.
    """
    cone_dims = tuple(int(m) for m in cone_dims)
    size = sum(m * m for m in cone_dims)
    proto = Spectrahedron(cone_dims, np.zeros((0, size)), np.zeros(0))
    cols = []
    for c in range(size):
        e = np.zeros(size)
        e[c] = 1.0
        v = np.asarray(constraint(proto.split(e)), dtype=complex).reshape(-1)
        cols.append(np.concatenate([v.real, v.imag]))
    a = np.stack(cols, axis=1)
    r = np.asarray(rhs, dtype=complex).reshape(-1)
    b = np.concatenate([r.real, r.imag])
    u, s, vh = np.linalg.svd(a, full_matrices=False)
    k = _eq_rank(s, rank_tol)
    coef = u[:, :k].T @ b
    if np.linalg.norm(b - u[:, :k] @ coef) > 1e-8 * max(1.0, np.linalg.norm(b)):
        raise Infeasible("equality constraints are inconsistent")
    eq = vh[:k]
    beq = coef / s[:k]
    kp = None
    if known_point is not None:
        kp = known_point if isinstance(known_point, np.ndarray) and known_point.ndim == 1 else proto.join(known_point)
    return Spectrahedron(cone_dims, eq, beq, kp)


def _eq_rank(s: np.ndarray, tol: float = EQ_RANK_TOL) -> int:
    if s.size == 0:
        return 0
    return int(np.sum(s > tol * max(1.0, s[0])))


def _clip_psd(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(h)
    return (v * np.maximum(w, 0)) @ v.conj().T


def repair(sp: Spectrahedron, x: np.ndarray, rounds: int = 50, tol: float = FEAS_TOL) -> np.ndarray | None:
    """Nearby strictly checkable feasible point, or None.

    Alternates PSD clipping and affine projection; if that stalls and a known
    point exists, shrinks toward it (x0 + lam (x - x0)).
    """
    y = sp.project_affine(x)
    for _ in range(rounds):
        if sp.is_feasible(y, tol):
            return y
        y = sp.project_affine(sp.join([_clip_psd(h) for h in sp.split(y)]))
    if sp.is_feasible(y, tol):
        return y
    if sp.known_point is not None:
        x0 = sp.known_point
        lam = 1.0
        for _ in range(60):
            lam /= 2
            z = x0 + lam * (y - x0)
            if sp.is_feasible(z, tol):
                return z
    return None


@dataclass
class LinearMaxResult:
    value: float
    point: np.ndarray | None
    dual: np.ndarray | None
    gap: float
    status: str
    ray: np.ndarray | None = None

    @property
    def unbounded(self) -> bool:
        return self.ray is not None


def _settings(max_iter: int = 400):
    st = clarabel.DefaultSettings()
    st.verbose = False
    st.tol_gap_abs = 1e-11
    st.tol_gap_rel = 1e-11
    st.tol_feas = 1e-11
    st.max_iter = max_iter
    # keeps the problem data updatable between objectives
    st.chordal_decomposition_enable = False
    return st


def _conic_data(sp: Spectrahedron, margin: bool = False):
    """Clarabel (A, b, cones); with ``margin`` an extra variable t shifts every cone by -t I."""
    size = sp.size + (1 if margin else 0)
    rows, rhs, cones = [], [], []
    if sp.eq_matrix.shape[0]:
        a = sp.eq_matrix
        if margin:
            a = np.hstack([a, np.zeros((a.shape[0], 1))])
        rows.append(a)
        rhs.append(sp.eq_rhs)
        cones.append(clarabel.ZeroConeT(a.shape[0]))
    pos = 0
    for m in sp.cone_dims:
        if m == 1:
            t = np.ones((1, 1))
            unit = np.ones(1)
            cone = clarabel.NonnegativeConeT(1)
        else:
            t = _embedding_map(m)
            unit = np.array([1.0 if i == j else 0.0 for i, j in _svec_index(2 * m)])
            cone = clarabel.PSDTriangleConeT(2 * m)
        block = np.zeros((t.shape[0], size))
        block[:, pos:pos + m * m] = -t
        if margin:
            block[:, -1] = unit
        rows.append(block)
        rhs.append(np.zeros(t.shape[0]))
        cones.append(cone)
        pos += m * m
    if margin:
        cap = np.zeros((1, size))
        cap[0, -1] = 1.0
        rows.append(cap)
        rhs.append(np.ones(1))
        cones.append(clarabel.NonnegativeConeT(1))
    return sps.csc_matrix(np.vstack(rows)), np.concatenate(rhs), cones


class _Solver:
    """Clarabel instance reused across objectives over one spectrahedron."""

    def __init__(self, sp: Spectrahedron, margin: bool = False):
        self.sp = sp
        self.a, self.b, self.cones = _conic_data(sp, margin)
        self.n = self.a.shape[1]
        self._solver = None

    def solve(self, q: np.ndarray):
        if self._solver is None:
            self._solver = clarabel.DefaultSolver(sps.csc_matrix((self.n, self.n)), q, self.a, self.b,
                                                  self.cones, _settings())
        else:
            self._solver.update(q=q)
        sol = self._solver.solve()
        status = str(sol.status)
        x = np.array(sol.x)
        z = np.array(sol.z)
        primal = float(q @ x)
        dual = float(-self.b @ z)
        return status, x, z, primal, dual


def _check_status(status: str, what: str, z=None):
    if status in _OK:
        return
    if "PrimalInfeasible" in status:
        raise Infeasible(f"{what}: spectrahedron is empty", certificate=z)
    raise SolverError(f"{what}: solver returned {status}")


def feasibility_margin(sp: Spectrahedron) -> tuple[float, np.ndarray]:
    """max t such that some point satisfies the equalities with every X_i >= t I (t <= 1).

    Always strictly feasible, so the optimum is well conditioned: t >= 0 iff
    the spectrahedron is non-empty, and -t measures the infeasibility.
    """
    solver = _Solver(sp, margin=True)
    q = np.zeros(solver.n)
    q[-1] = -1.0
    status, x, z, primal, _ = solver.solve(q)
    _check_status(status, "feasibility phase", z)
    return float(x[-1]), x[:-1]


def find_point(sp: Spectrahedron, eps: float = SDP_EPS) -> np.ndarray:
    """A feasible point; raises :class:`Infeasible` with the margin otherwise."""
    t, x = feasibility_margin(sp)
    if t < -eps:
        raise Infeasible(f"spectrahedron is empty (margin {t:.3e})")
    x = sp.project_affine(x)
    if not sp.is_feasible(x):
        raise SolverError("feasibility phase returned an infeasible point")
    return x


def maximize_linear(sp: Spectrahedron, objective, eps: float = SDP_EPS, _solver: _Solver | None = None) -> LinearMaxResult:
    """Maximize ``<objective, x>`` over the spectrahedron.

    ``objective`` is a coordinate vector or a list of hermitian matrices.
    The returned point is checked for primal feasibility and the duality gap
    must be at most ``eps``.
    """
    c = np.asarray(objective, dtype=float) if np.ndim(objective) == 1 else sp.join(objective)
    if c.shape != (sp.size,):
        raise InvalidInput(f"objective must have {sp.size} coordinates")
    solver = _solver or _Solver(sp)
    status, x, z, primal, dual = solver.solve(-c)
    if "DualInfeasible" in status:
        ray = x / max(np.linalg.norm(x), 1e-300)
        return LinearMaxResult(np.inf, None, None, 0.0, status, ray=ray)
    _check_status(status, "maximize_linear", z)
    fixed = repair(sp, x)
    if fixed is None:
        raise SolverError(f"optimal point is not primal feasible (residual {sp.residual(x):.2e}, "
                          f"min eig {sp.min_eig(x):.2e})")
    value = float(c @ fixed)
    # -dual bounds the maximum from above; the gap is measured at the repaired point
    gap = max(abs(primal - dual), -dual - value)
    if gap > eps:
        raise SolverError(f"duality gap {gap:.2e} exceeds {eps:.1e}")
    return LinearMaxResult(value, fixed, z, gap, status)


@dataclass
class SingletonResult:
    is_singleton: bool
    max_movement: float
    num_directions: int
    solves: int
    max_gap: float = 0.0
    witness: np.ndarray | None = None
    witness_distance: float = 0.0
    movements: list = field(default_factory=list)
    face_dims: tuple = ()
    reductions: list = field(default_factory=list)


def _coord_map(u: np.ndarray) -> np.ndarray:
    """Matrix taking herm coordinates of Y (r x r) to those of U Y U^* (m x m)."""
    m, r = u.shape
    cols = []
    for c in range(r * r):
        e = np.zeros(r * r)
        e[c] = 1.0
        cols.append(herm_to_real(u @ real_to_herm(e, r) @ u.conj().T))
    return np.stack(cols, axis=1) if cols else np.zeros((m * m, 0))


def _face_problem(sp: Spectrahedron, faces: list[np.ndarray]):
    """Restriction of ``sp`` to X_i = U_i Y_i U_i^*; returns (face spectrahedron, embedding)."""
    emb = np.zeros((sp.size, sum(u.shape[1] ** 2 for u in faces)))
    row = col = 0
    for m, u in zip(sp.cone_dims, faces):
        r = u.shape[1]
        emb[row:row + m * m, col:col + r * r] = _coord_map(u)
        row += m * m
        col += r * r
    a = sp.eq_matrix @ emb
    keep = [i for i, u in enumerate(faces) if u.shape[1] > 0]
    if a.shape[0]:
        uu, sv, vh = np.linalg.svd(a, full_matrices=False)
        k = _eq_rank(sv)
        eq = vh[:k]
        rhs = (uu[:, :k].T @ sp.eq_rhs) / sv[:k]
    else:
        eq, rhs = a, sp.eq_rhs
    x0 = None
    if sp.known_point is not None:
        x0 = np.concatenate([herm_to_real(u.conj().T @ h @ u)
                             for h, u in zip(sp.split(sp.known_point), faces) if u.shape[1] > 0]) \
            if keep else np.zeros(0)
        # the known point lies in the face; its values keep weak rows consistent
        rhs = eq @ x0
    cols = [c for i, u in enumerate(faces) for c in [u.shape[1] ** 2] if i in keep]
    col_idx = np.concatenate([np.arange(sum(f.shape[1] ** 2 for f in faces[:i]),
                                        sum(f.shape[1] ** 2 for f in faces[:i + 1]))
                              for i in keep]) if keep else np.zeros(0, dtype=int)
    face = Spectrahedron(tuple(faces[i].shape[1] for i in keep), eq[:, col_idx], rhs, x0)
    return face, emb[:, col_idx]


def _reduce_once(face: Spectrahedron, eps: float):
    """One facial reduction step at the known point.

    Looks for Z >= 0 supported on ker(x0) and orthogonal to the constraint
    kernel: every feasible point is then supported on ker(Z). Returns
    (per-cone orthonormal bases to keep, margin, partial), with keep None
    when no reduction applies. A strictly positive margin gives an exact
    reduction to the range of x0. A margin within eps of zero gives only
    an approximate partial reduction (``partial`` True), whose kept
    subspace is accurate to roughly the square root of the solver
    tolerance.
    """
    x0 = face.split(face.known_point)
    kers, rngs = [], []
    for h in x0:
        w, v = np.linalg.eigh(h)
        zero = w <= 1e-9 * max(1.0, abs(w).max())
        kers.append(v[:, zero])
        rngs.append(v[:, ~zero])
    if all(k.shape[1] == 0 for k in kers):
        return None, np.inf, False
    dirs = face.directions
    aux_dims = [k.shape[1] for k in kers]
    aux_idx = [i for i, q in enumerate(aux_dims) if q > 0]
    if len(dirs) == 0:
        return None, -np.inf, False
    hs = [face.split(g) for g in dirs]

    def constraint(ws):
        vals = [sum(np.trace(kers[i] @ w @ kers[i].conj().T @ hh[i]) for i, w in zip(aux_idx, ws)) for hh in hs]
        return np.array(vals + [sum(np.trace(w) for w in ws)])

    rhs = np.zeros(len(hs) + 1)
    rhs[-1] = 1.0
    try:
        aux = spectrahedron([aux_dims[i] for i in aux_idx], constraint, rhs)
    except Infeasible:
        return None, -np.inf, False
    t, w = feasibility_margin(aux)
    w = aux.project_affine(w)
    ws = aux.split(w)
    keep = [r.copy() for r in rngs]
    if t > eps:
        if min(np.linalg.eigvalsh(x)[0] for x in ws) <= 0:
            raise SolverError("facial reduction certificate lost definiteness after projection")
        return keep, t, False
    if t < -eps:
        return None, t, False
    progress = False
    for j, i in enumerate(aux_idx):
        lw, lv = np.linalg.eigh(ws[j])
        top = max(lw.max(), 0.0)
        small = lw <= 1e-4 * top if top > 0 else np.ones_like(lw, dtype=bool)
        progress |= not small.all()
        keep[i] = np.concatenate([rngs[i], kers[i] @ lv[:, small]], axis=1)
    if not progress:
        return None, t, False
    return keep, t, True


def _apply_faces(sp: Spectrahedron, faces, keep):
    it = iter(keep)
    faces = [f @ next(it) if f.shape[1] > 0 else f for f in faces]
    face, emb = _face_problem(sp, faces)
    return faces, face, emb


def _full_reductions(sp, faces, face, emb, eps, reductions):
    """Apply exact reduction steps until none applies; returns the state and a pending partial step."""
    for _ in range(sum(sp.cone_dims) + 1):
        if face.size == 0 or len(face.directions) == 0:
            return faces, face, emb, None
        keep, margin, partial = _reduce_once(face, eps)
        if keep is None:
            return faces, face, emb, None
        if partial:
            return faces, face, emb, (keep, margin)
        reductions.append(margin)
        faces, face, emb = _apply_faces(sp, faces, keep)
    return faces, face, emb, None


def _directional(sp, face, emb, eps, res: "SingletonResult", stop_early: bool) -> bool:
    """Run the +-direction solves in ``face``; True when the outcome is decided."""
    dirs = face.directions if face.size else np.zeros((0, 0))
    res.num_directions = len(dirs)
    res.face_dims = face.cone_dims
    if len(dirs) == 0:
        return True
    x0 = sp.known_point
    solver = _Solver(face)
    y0 = face.known_point
    undecided = False
    for g in dirs:
        for sign in (1.0, -1.0):
            try:
                out = maximize_linear(face, sign * g, eps, _solver=solver)
            except SolverError as exc:
                log.debug("directional solve failed: %s", exc)
                undecided = True
                continue
            res.solves += 1
            if out.unbounded:
                move = np.inf
                point = emb @ (y0 + out.ray)
            else:
                move = out.value - sign * float(g @ y0)
                point = emb @ out.point
                res.max_gap = max(res.max_gap, out.gap)
            res.movements.append(move)
            res.max_movement = max(res.max_movement, move)
            if move <= eps:
                continue
            if not sp.is_feasible(point):
                point = repair(sp, point)
            dist = float(np.linalg.norm(point - x0)) if point is not None else 0.0
            if point is not None and sp.is_feasible(point) and dist > WITNESS_MIN:
                res.is_singleton = False
                if res.witness is None or dist > res.witness_distance:
                    res.witness, res.witness_distance = point, dist
                if stop_early:
                    return True
            else:
                undecided = True
    return res.witness is not None or not undecided


def singleton_test(sp: Spectrahedron, eps: float = SDP_EPS, stop_early: bool = True) -> SingletonResult:
    """Decide whether the spectrahedron is exactly ``{known_point}`` up to ``eps``.

    Facial reduction at the known point first shrinks the cones to the
    smallest face that certifiably contains the whole set. Then, for each
    orthonormal direction g of the constraint kernel inside that face, both
    ``max <g, x - x0>`` and ``max <-g, x - x0>`` are solved; the set is a
    singleton iff all optima are at most ``eps``. A larger optimum must come
    with a witness point that is feasible in the original coordinates and
    clearly away from x0. Approximate (partial) reduction steps are used
    only when the plain solves cannot decide.
    """
    if sp.known_point is None:
        raise InvalidInput("singleton_test needs a known feasible point")
    if not sp.is_feasible(sp.known_point, 1e-9):
        raise InvalidInput("known point is not feasible")
    faces = [np.eye(m) for m in sp.cone_dims]
    face, emb = sp, np.eye(sp.size)
    reductions: list = []
    for _ in range(sum(sp.cone_dims) + 1):
        faces, face, emb, pending = _full_reductions(sp, faces, face, emb, eps, reductions)
        res = SingletonResult(True, 0.0, 0, 0, reductions=list(reductions))
        if _directional(sp, face, emb, eps, res, stop_early):
            return res
        if pending is None:
            break
        log.debug("partial facial reduction with margin %.2e", pending[1])
        reductions.append(pending[1])
        faces, face, emb = _apply_faces(sp, faces, pending[0])
    raise SolverError(f"singleton test undecided (movement {res.max_movement:.2e} without a feasible witness)")

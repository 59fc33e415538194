"""Boundary representations, peaking certificates, boundary ideal and
C*-envelope for operator systems in matrix algebras.

The decision whether pi_k is a boundary representation is made by a convex
test: the set of UCP maps phi: C*(S) -> M_{n_k} agreeing with pi_k on S is
written in Choi coordinates and checked to be the single point pi_k.
Peaking cells are searched for separately and only ever add evidence.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import InternalConsistencyError, InvalidInput
from .feastool import SDP_EPS, SingletonResult, Spectrahedron, singleton_test, spectrahedron
from .opsys import OperatorSystem, ParamSequence, extract_params

log = logging.getLogger(__name__)

TOL_GAP = 1e-6
BUDGET = 200


def choi_apply(choi: np.ndarray, x: np.ndarray, n_out: int) -> np.ndarray:
    """phi(x) for the map with Choi matrix sum_ab E_ab (x) phi(E_ab)."""
    n_in = x.shape[0]
    return np.einsum("ab,aibj->ij", x, choi.reshape(n_in, n_out, n_in, n_out))


def choi_unit(choi: np.ndarray, n_in: int, n_out: int) -> np.ndarray:
    return np.einsum("aiaj->ij", choi.reshape(n_in, n_out, n_in, n_out))


def identity_choi(n: int) -> np.ndarray:
    omega = np.eye(n).reshape(-1)
    return np.outer(omega, omega).astype(complex)


@dataclass(eq=False)
class UcpExtensionSet:
    system: OperatorSystem
    block: int
    sp: Spectrahedron

    def maps(self, x: np.ndarray) -> list[np.ndarray]:
        """Choi matrices C_1..C_N of the point ``x``."""
        return self.sp.split(x)

    def apply(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """phi(y) for an element y of C*(S)."""
        dec = self.system.decomposition
        nk = dec.block_dims[self.block]
        return sum(choi_apply(c, dec.pi(j, y), nk) for j, c in enumerate(self.maps(x)))


def ucp_extension_set(s: OperatorSystem, k: int) -> UcpExtensionSet:
    """UCP maps C*(S) -> M_{n_k} that agree with pi_k on S, in Choi form."""
    dec = s.decomposition
    if not 0 <= k < s.N:
        raise InvalidInput(f"block index {k} out of range")
    dims = dec.block_dims
    nk = dims[k]
    herm = s.hermitian_basis()
    images = [[dec.pi(j, b) for b in herm] for j in range(s.N)]

    def constraint(chois):
        unit = sum(choi_unit(c, dims[j], nk) for j, c in enumerate(chois))
        agree = [sum(choi_apply(c, images[j][i], nk) for j, c in enumerate(chois)) for i in range(len(herm))]
        return np.concatenate([unit.reshape(-1)] + [a.reshape(-1) for a in agree])

    rhs = np.concatenate([np.eye(nk).reshape(-1)] + [images[k][i].reshape(-1) for i in range(len(herm))])
    point = [identity_choi(nk) if j == k else np.zeros((dims[j] * nk,) * 2) for j in range(s.N)]
    sp = spectrahedron([dims[j] * nk for j in range(s.N)], constraint, rhs, known_point=point)
    if not sp.is_feasible(sp.known_point, 1e-9):
        raise InternalConsistencyError(f"pi_{k} is not a point of its own extension set")
    return UcpExtensionSet(s, k, sp)


@dataclass
class BoundaryDecision:
    block: int
    is_boundary: bool
    singleton: SingletonResult


def is_boundary(s: OperatorSystem, k: int, eps: float = SDP_EPS) -> BoundaryDecision:
    """True iff pi_k has a unique UCP extension from S, i.e. is a boundary representation."""
    ext = ucp_extension_set(s, k)
    res = singleton_test(ext.sp, eps)
    return BoundaryDecision(k, res.is_singleton, res)


@dataclass
class PeakingCertificate:
    block: int
    cells: np.ndarray  # (p, p, d) coefficients over Z
    norms: list[float]
    gap: float
    vacuous: bool = False

    @property
    def level(self) -> int:
        return self.cells.shape[0]


def _block_norms(seq: ParamSequence, coeffs: np.ndarray) -> list[float]:
    return [float(np.linalg.norm(m.cells(coeffs), 2)) for m in seq.maps]


def verify_peaking(seq: ParamSequence, k: int, coeffs: np.ndarray, margin: float = TOL_GAP):
    """Recompute block norms; returns (gap, norms); a certificate needs gap > margin."""
    norms = _block_norms(seq, coeffs)
    others = [v for j, v in enumerate(norms) if j != k]
    gap = norms[k] - (max(others) if others else 0.0)
    return gap, norms


def _top_gradient(gens: np.ndarray, coeffs: np.ndarray, tie: float = 1e-9):
    """Norm of (Gamma(z_ab)) and its ascent direction in z (averaged over tied singular pairs)."""
    p = coeffs.shape[0]
    n = gens.shape[1]
    mat = np.einsum("abl,lij->aibj", coeffs, gens).reshape(p * n, p * n)
    u, s, vh = np.linalg.svd(mat)
    top = int(np.sum(s >= s[0] - tie))
    grad = np.zeros_like(coeffs)
    for t in range(top):
        uu = u[:, t].reshape(p, n)
        vv = np.conj(vh[t]).reshape(p, n)
        grad += np.conj(np.einsum("ai,lij,bj->abl", np.conj(uu), gens, vv))
    return float(s[0]), grad / top


def search_separating(seq: ParamSequence, gain, level_cap: int, budget: int, rng: np.random.Generator,
                      margin: float = TOL_GAP, iters: int = 60):
    """Projected subgradient ascent of ``gain(norms, grads)`` over unit-norm cells.

    ``gain`` returns (value, gradient). Stops at the first cell array whose
    exact value exceeds ``margin``; returns (coeffs, value) or None.
    """
    d = seq.d
    gens = [m.generators for m in seq.maps]
    for p in range(1, level_cap + 1):
        for _ in range(budget):
            z = rng.normal(size=(p, p, d)) + 1j * rng.normal(size=(p, p, d))
            if p == 1:
                z = z.real.astype(complex)
            z /= np.linalg.norm(z)
            step = 0.3
            best = None
            for it in range(iters):
                evals = [_top_gradient(g, z) for g in gens]
                val, grad = gain([e[0] for e in evals], [e[1] for e in evals])
                if best is None or val > best[1]:
                    best = (z.copy(), val)
                if val > 10 * margin and it > 5:
                    break
                grad = grad - np.real(np.vdot(z, grad)) * z
                gn = np.linalg.norm(grad)
                if gn < 1e-12:
                    break
                z = z + step * grad / gn
                z /= np.linalg.norm(z)
                step *= 0.93
            if best[1] > margin:
                return best
    return None


def find_peaking(s, k: int, level_cap: int | None = None, budget: int = BUDGET, seed: int = 0,
                 margin: float = TOL_GAP) -> PeakingCertificate | None:
    """Search for cells (z_ij) with ||(pi_k(s_ij))|| > max_{j != k} ||(pi_j(s_ij))||.

    ``s`` is an OperatorSystem (cells refer to the basis of
    :func:`ncb.opsys.self_adjoint_unit_basis`) or a ParamSequence. Returning
    None does not disprove peaking.
    """
    seq = extract_params(s) if isinstance(s, OperatorSystem) else s
    if not 0 <= k < seq.N:
        raise InvalidInput(f"block index {k} out of range")
    if level_cap is None:
        level_cap = max(seq.dims) ** 2
    if seq.N == 1:
        z = np.ones((1, 1, seq.d), dtype=complex)
        gap, norms = verify_peaking(seq, k, z)
        return PeakingCertificate(k, z, norms, gap, vacuous=True)
    rng = np.random.default_rng([seed, k])

    def gain(norms, grads):
        others = [j for j in range(seq.N) if j != k]
        top = max(norms[j] for j in others)
        tied = [j for j in others if norms[j] >= top - 1e-9]
        return norms[k] - top, grads[k] - sum(grads[j] for j in tied) / len(tied)

    found = search_separating(seq, gain, level_cap, budget, rng, margin)
    if found is None:
        return None
    z = found[0]
    gap, norms = verify_peaking(seq, k, z)
    if gap <= margin:
        return None
    return PeakingCertificate(k, z, norms, gap)


@dataclass
class BlockBoundary:
    block: int
    is_boundary: bool
    method: str
    singleton: SingletonResult
    peaking: PeakingCertificate | None = None

    @property
    def gap(self) -> float | None:
        return None if self.peaking is None else self.peaking.gap


@dataclass
class BoundaryReport:
    blocks: list[BlockBoundary]
    level_cap: int

    @property
    def boundary_blocks(self) -> list[int]:
        return [b.block for b in self.blocks if b.is_boundary]

    @property
    def non_boundary_blocks(self) -> list[int]:
        return [b.block for b in self.blocks if not b.is_boundary]

    @property
    def is_reduced(self) -> bool:
        return all(b.is_boundary for b in self.blocks)


def analyze_boundary(s: OperatorSystem, level_cap: int | None = None, budget: int = BUDGET, seed: int = 0,
                     eps: float = SDP_EPS, margin: float = TOL_GAP, search_all: bool = False,
                     peaking: bool = True) -> BoundaryReport:
    """Boundary status of every block, with peaking certificates where found.

    The singleton test is authoritative. With ``search_all`` the peaking
    search also runs on non-boundary blocks, which only serves as a
    consistency probe: any certificate found there is an error.
    """
    if level_cap is None:
        level_cap = max(s.block_dims) ** 2
    seq = extract_params(s)
    out = []
    for k in range(s.N):
        dec = is_boundary(s, k, eps)
        cert = None
        if peaking and (dec.is_boundary or search_all):
            cert = find_peaking(seq, k, level_cap, budget, seed, margin)
        if cert is not None and not dec.is_boundary:
            raise InternalConsistencyError(
                f"block {k} has a peaking certificate (gap {cert.gap:.3e}) but a non-singleton extension set")
        method = "singleton-test" + ("+peaking" if cert is not None else "")
        out.append(BlockBoundary(k, dec.is_boundary, method, dec.singleton, cert))
    return BoundaryReport(out, level_cap)


@dataclass
class IsometryCheck:
    level: int
    ambient: float
    envelope: float

    @property
    def ratio(self) -> float:
        return self.envelope / self.ambient if self.ambient > 0 else 1.0


@dataclass
class EnvelopeResult:
    report: BoundaryReport
    boundary_blocks: list[int]
    ideal_blocks: list[int]
    envelope_system: OperatorSystem
    isometry_checks: list[IsometryCheck] = field(default_factory=list)

    @property
    def is_reduced(self) -> bool:
        return not self.ideal_blocks

    @property
    def envelope_dims(self) -> list[int]:
        return self.envelope_system.block_dims

    def worst_ratio_error(self) -> float:
        return max((abs(c.ratio - 1) for c in self.isometry_checks), default=0.0)


def ambient_cells(s: OperatorSystem, basis: np.ndarray, coeffs: np.ndarray) -> np.ndarray:
    p = coeffs.shape[0]
    n = s.ambient_dim
    return np.einsum("abl,lij->aibj", coeffs, basis).reshape(p * n, p * n)


def check_compression(s: OperatorSystem, blocks, level_cap: int, seed: int = 0, samples: int = 6,
                      extra_cells=(), margin: float = TOL_GAP) -> list[IsometryCheck]:
    """Compare ambient norms with norms compressed to ``blocks`` at levels 1..level_cap."""
    seq = extract_params(s)
    basis = seq.certificates["basis"]
    rng = np.random.default_rng([seed, 7])
    cells = list(extra_cells)
    for p in range(1, level_cap + 1):
        cells.append(np.ones((p, p, seq.d), dtype=complex) / p)
        for _ in range(samples):
            cells.append(rng.normal(size=(p, p, seq.d)) + 1j * rng.normal(size=(p, p, seq.d)))
        for l in range(seq.d):
            z = np.zeros((p, p, seq.d), dtype=complex)
            z[..., l] = rng.normal(size=(p, p))
            cells.append(z)
    checks = []
    for z in cells:
        amb = float(np.linalg.norm(ambient_cells(s, basis, z), 2))
        env = max(float(np.linalg.norm(seq[k].cells(z), 2)) for k in blocks)
        checks.append(IsometryCheck(z.shape[0], amb, env))
    return checks


def c_star_envelope(s: OperatorSystem, level_cap: int | None = None, budget: int = BUDGET, seed: int = 0,
                    eps: float = SDP_EPS, margin: float = TOL_GAP, report: BoundaryReport | None = None,
                    peaking: bool = True) -> EnvelopeResult:
    """Boundary ideal (sum of non-boundary blocks) and the envelope system."""
    if report is None:
        report = analyze_boundary(s, level_cap, budget, seed, eps, margin, peaking=peaking)
    level_cap = report.level_cap
    bnd = report.boundary_blocks
    if not bnd:
        raise InternalConsistencyError("no boundary representation found")
    env = s.compress(bnd)
    extra = [b.peaking.cells for b in report.blocks if b.peaking is not None]
    checks = check_compression(s, bnd, level_cap, seed, extra_cells=extra)
    res = EnvelopeResult(report, bnd, report.non_boundary_blocks, env, checks)
    if res.worst_ratio_error() > margin:
        raise InternalConsistencyError(f"compression to the boundary blocks is not isometric "
                                       f"(ratio error {res.worst_ratio_error():.3e})")
    return res


def is_reduced(s: OperatorSystem, eps: float = SDP_EPS) -> bool:
    return all(is_boundary(s, k, eps).is_boundary for k in range(s.N))

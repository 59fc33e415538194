"""Nonreduced systems S = {Gamma_1(z) + ... + Gamma_N(z) + Omega_1(z) + ... + Omega_M(z)}.

The Gamma part must be strongly separated, each Omega_r must be dominated in
norm by the Gamma part at every matrix level (subordination), and all blocks
must be pairwise norm-distinguishable (weak separation). Under those
conditions the Omega blocks form the boundary ideal and the Gamma part is
the C*-envelope.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .algebra import BlockDecomposition
from .choquet import (
    BUDGET,
    TOL_GAP,
    BoundaryReport,
    EnvelopeResult,
    PeakingCertificate,
    analyze_boundary,
    c_star_envelope,
    choi_apply,
    choi_unit,
    find_peaking,
    is_boundary,
    search_separating,
    verify_peaking,
)
from .errors import Infeasible, InvalidInput, StructureViolation
from .feastool import SDP_EPS, feasibility_margin, repair, spectrahedron
from .opsys import OperatorSystem, ParamMap, ParamSequence, Status, build_opsys, operator_system


@dataclass(eq=False)
class NonreducedSpec:
    gamma: ParamSequence
    omega: tuple[ParamMap, ...] = ()
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        self.omega = tuple(self.omega.maps if isinstance(self.omega, ParamSequence) else self.omega)
        if any(m.d != self.gamma.d for m in self.omega):
            raise InvalidInput("Gamma and Omega must share the source space")

    @property
    def d(self) -> int:
        return self.gamma.d

    @property
    def N(self) -> int:
        return self.gamma.N

    @property
    def M(self) -> int:
        return len(self.omega)

    def all_maps(self) -> tuple[ParamMap, ...]:
        return tuple(self.gamma.maps) + self.omega


def _quiet_build(maps, seed: int = 0) -> OperatorSystem:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return build_opsys(ParamSequence(tuple(maps)), seed=seed)


@dataclass
class Subordination:
    index: int
    holds: bool
    margin: float
    witness: list[np.ndarray] | None = None  # Choi matrices, one per Gamma block
    violating_cells: np.ndarray | None = None
    violation_gap: float | None = None


def _subordination_set(gamma: ParamSequence, omega: ParamMap):
    """Choi matrices of UCP maps (+)_k B(H_k) -> B(K) sending Gamma(e_l) to Omega(e_l)."""
    dims = gamma.dims
    kd = omega.target_dim

    def constraint(chois):
        unit = sum(choi_unit(c, dims[j], kd) for j, c in enumerate(chois))
        agree = [sum(choi_apply(c, gamma[j].generators[l], kd) for j, c in enumerate(chois)) for l in range(gamma.d)]
        return np.concatenate([unit.reshape(-1)] + [a.reshape(-1) for a in agree])

    rhs = np.concatenate([np.eye(kd).reshape(-1)] + [g.reshape(-1) for g in omega.generators])
    return spectrahedron([n * kd for n in dims], constraint, rhs)


def _violation_search(gamma: ParamSequence, omega: ParamMap, level_cap: int, budget: int, seed: int, margin: float):
    seq = ParamSequence(tuple(gamma.maps) + (omega,))
    last = seq.N - 1

    def gain(norms, grads):
        top = max(norms[:last])
        tied = [j for j in range(last) if norms[j] >= top - 1e-9]
        return norms[last] - top, grads[last] - sum(grads[j] for j in tied) / len(tied)

    found = search_separating(seq, gain, level_cap, budget, np.random.default_rng([seed, 11]), margin)
    if found is None:
        return None, None
    gap, _ = verify_peaking(seq, last, found[0])
    return found[0], gap


def check_subordination(spec: NonreducedSpec, eps: float = SDP_EPS, level_cap: int | None = None,
                        budget: int = BUDGET, seed: int = 0, margin: float = TOL_GAP) -> list[Subordination]:
    """Decide, for each Omega_r, whether ||Omega_r(z_ij)|| <= max_k ||Gamma_k(z_ij)|| at all levels.

    This holds iff the map Gamma(z) -> Omega_r(z) extends to a UCP map on the
    direct sum of the Gamma blocks, which is a spectrahedron feasibility
    question. Violations come with cells found by search when possible.
    """
    if level_cap is None:
        level_cap = max(spec.gamma.dims + [m.target_dim for m in spec.omega]) ** 2
    out = []
    for r, om in enumerate(spec.omega):
        try:
            sp = _subordination_set(spec.gamma, om)
            t, x = feasibility_margin(sp)
        except Infeasible:
            # Omega_r does not even factor through Gamma linearly.
            sp, t, x = None, -np.inf, None
        if t >= -eps:
            pt = repair(sp, sp.project_affine(x))
            out.append(Subordination(r, True, t, None if pt is None else sp.split(pt)))
            continue
        cells, gap = _violation_search(spec.gamma, om, level_cap, budget, seed, margin)
        out.append(Subordination(r, False, t, None, cells, gap))
    spec.checks["a"] = out
    return out


@dataclass
class SeparationCheck:
    pair: tuple[str, str]
    status: str  # "verified" | "verified-exact" | "failed" | "inconclusive"
    cells: np.ndarray | None = None
    gap: float | None = None

    @property
    def holds(self) -> bool:
        return self.status in ("verified", "verified-exact")


@dataclass
class SeparationReport:
    strong: list[SeparationCheck]
    weak: list[SeparationCheck]
    peaking: list[PeakingCertificate | None] = field(default_factory=list)

    @property
    def strong_holds(self) -> bool:
        return all(c.holds for c in self.strong)

    @property
    def weak_holds(self) -> bool:
        return all(c.holds for c in self.weak)


def match_blocks(s: OperatorSystem, dims, tol: float = 1e-7) -> list[int] | None:
    """Decomposition block of ``s`` sitting on each diagonal input block, if the algebra is the full direct sum."""
    dec: BlockDecomposition = s.decomposition
    if dec.num_blocks != len(dims):
        return None
    offsets = np.concatenate([[0], np.cumsum(dims)])
    n = s.ambient_dim
    out = []
    for r, size in enumerate(dims):
        p = np.zeros((n, n))
        idx = np.arange(offsets[r], offsets[r + 1])
        p[idx, idx] = 1.0
        hit = [k for k, q in enumerate(dec.central_projections) if np.abs(q - p).max() < tol]
        if len(hit) != 1 or dec.block_dims[hit[0]] != size or dec.multiplicities[hit[0]] != 1:
            return None
        out.append(hit[0])
    return out


def _inequivalent(a: ParamMap, b: ParamMap) -> bool:
    """Exact test: the two blocks generate a direct sum of their separate algebras."""
    if a.target_dim != b.target_dim:
        return True
    na = _quiet_build([a]).N
    nb = _quiet_build([b]).N
    return _quiet_build([a, b]).N == na + nb


def _distinguish(a: ParamMap, b: ParamMap, level_cap: int, budget: int, rng, margin: float):
    seq = ParamSequence((a, b))

    def gain(norms, grads):
        sign = 1.0 if norms[0] >= norms[1] else -1.0
        return abs(norms[0] - norms[1]), sign * (grads[0] - grads[1])

    found = search_separating(seq, gain, level_cap, budget, rng, margin)
    if found is None:
        return None, None
    z = found[0]
    na, nb = (float(np.linalg.norm(m.cells(z), 2)) for m in (a, b))
    return (z, abs(na - nb)) if abs(na - nb) > margin else (None, None)


def check_separations(spec: NonreducedSpec, level_cap: int | None = None, budget: int = BUDGET, seed: int = 0,
                      eps: float = SDP_EPS, margin: float = TOL_GAP) -> SeparationReport:
    """Strong separation inside Gamma and weak separation across all blocks."""
    if level_cap is None:
        level_cap = max(spec.gamma.dims + [m.target_dim for m in spec.omega]) ** 2
    gamma = spec.gamma
    strong, peaks = [], []
    sg = None
    for k in range(gamma.N):
        cert = find_peaking(gamma, k, level_cap, budget, seed, margin)
        peaks.append(cert)
        if cert is not None:
            strong.append(SeparationCheck((f"G{k}", "G*"), "verified", cert.cells, cert.gap))
            continue
        # Exact fallback: in finite dimension a block peaks iff it is a boundary block.
        if sg is None:
            sg = _quiet_build(gamma.maps)
            blocks = match_blocks(sg, gamma.dims)
        ok = blocks is not None and is_boundary(sg, blocks[k], eps).is_boundary
        strong.append(SeparationCheck((f"G{k}", "G*"), "verified-exact" if ok else "failed"))
    labelled = [(f"O{r}", m) for r, m in enumerate(spec.omega)]
    pairs = [(labelled[r], labelled[s]) for r in range(len(labelled)) for s in range(r + 1, len(labelled))]
    pairs += [(o, (f"G{k}", g)) for o in labelled for k, g in enumerate(gamma.maps)]
    rng = np.random.default_rng([seed, 13])
    weak = []
    for (la, a), (lb, b) in pairs:
        if not _inequivalent(a, b):
            weak.append(SeparationCheck((la, lb), "failed"))
            continue
        z, gap = _distinguish(a, b, level_cap, budget, rng, margin)
        weak.append(SeparationCheck((la, lb), "verified" if z is not None else "verified-exact", z, gap))
    rep = SeparationReport(strong, weak, peaks)
    spec.checks["b"] = strong
    spec.checks["c"] = weak
    return rep


@dataclass
class StructureReport:
    block_map: list[int] | None = None  # input block -> decomposition block
    algebra_dims: list[int] = field(default_factory=list)
    subordination: list[Subordination] = field(default_factory=list)
    separations: SeparationReport | None = None
    boundary: BoundaryReport | None = None
    envelope: EnvelopeResult | None = None
    gamma_blocks: list[int] = field(default_factory=list)
    omega_blocks: list[int] = field(default_factory=list)
    problems: list[str] = field(default_factory=list)

    @property
    def is_reduced(self) -> bool:
        return self.envelope is not None and self.envelope.is_reduced

    @property
    def ok(self) -> bool:
        return not self.problems


def build_and_verify(spec: NonreducedSpec, level_cap: int | None = None, budget: int = BUDGET, seed: int = 0,
                     eps: float = SDP_EPS, margin: float = TOL_GAP) -> tuple[OperatorSystem, StructureReport]:
    """Build S_{Gamma,Omega} and confirm ideal = Omega blocks, envelope = Gamma part.

    Raises :class:`StructureViolation` (carrying the partial report) if the
    subordination or separation checks fail or the computed structure differs
    from the predicted one.
    """
    dims = [m.target_dim for m in spec.all_maps()]
    if level_cap is None:
        level_cap = max(dims) ** 2
    rep = StructureReport()
    rep.subordination = check_subordination(spec, eps, level_cap, budget, seed, margin)
    bad = [c.index for c in rep.subordination if not c.holds]
    if bad:
        rep.problems.append(f"subordination fails for Omega blocks {bad}")
        raise StructureViolation(rep.problems[-1], rep)
    rep.separations = check_separations(spec, level_cap, budget, seed, eps, margin)
    if not rep.separations.strong_holds or not rep.separations.weak_holds:
        failed = [c.pair for c in rep.separations.strong + rep.separations.weak if not c.holds]
        rep.problems.append(f"separation fails for {failed}")
        raise StructureViolation(rep.problems[-1], rep)
    s = _quiet_build(spec.all_maps(), seed)
    rep.algebra_dims = s.block_dims
    rep.block_map = match_blocks(s, dims)
    if rep.block_map is None:
        rep.problems.append(f"generated algebra has blocks {s.block_dims}, expected the full sum of {dims}")
        raise StructureViolation(rep.problems[-1], rep)
    rep.gamma_blocks = rep.block_map[:spec.N]
    rep.omega_blocks = rep.block_map[spec.N:]
    rep.boundary = analyze_boundary(s, level_cap, budget, seed, eps, margin)
    if sorted(rep.boundary.boundary_blocks) != sorted(rep.gamma_blocks):
        rep.problems.append(f"boundary blocks {rep.boundary.boundary_blocks} differ from Gamma blocks "
                            f"{rep.gamma_blocks}")
        raise StructureViolation(rep.problems[-1], rep)
    rep.envelope = c_star_envelope(s, level_cap, budget, seed, eps, margin, report=rep.boundary)
    if sorted(rep.envelope.ideal_blocks) != sorted(rep.omega_blocks):
        rep.problems.append("boundary ideal differs from the Omega blocks")
        raise StructureViolation(rep.problems[-1], rep)
    spec.gamma.strongly_separated = Status.VERIFIED
    return s, rep

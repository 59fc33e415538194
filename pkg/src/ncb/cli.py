"""Command-line front end.

Every command reads JSON documents (file path or ``-`` for stdin) and
writes one JSON document. Exit codes: 0 ok or witness, 1 certified
negative, 2 invalid input, 3 internal inconsistency or solver failure,
4 inconclusive.
"""
from __future__ import annotations

import argparse
import logging
import sys
import warnings

import numpy as np

from . import __version__
from .choquet import analyze_boundary, c_star_envelope
from .classify import decide_isomorphism
from .errors import InvalidInput, NcbError, StructureViolation
from .generate import random_nonreduced, random_reduced
from .nonreduced import NonreducedSpec, build_and_verify
from .opsys import OperatorSystem, ParamSequence, build_opsys, invariants, operator_system, paulsen_device
from .serialize import (
    Document,
    decode_map,
    decode_opsys,
    decode_params,
    encode_map,
    encode_matrix,
    opsys_document,
    params_document,
    read_document,
    witness_payload,
    write_text,
)

EXIT_OK, EXIT_NEGATIVE, EXIT_INVALID, EXIT_INTERNAL, EXIT_INCONCLUSIVE = 0, 1, 2, 3, 4

log = logging.getLogger("ncb")


def _tolerances(args) -> dict:
    return {"tol_rank": args.tol_rank, "tol_gap": args.tol_gap, "sdp_eps": args.sdp_eps,
            "level_cap": args.level_cap, "budget": args.budget, "seed": args.seed}


def _load_system(doc: Document, args) -> OperatorSystem:
    doc.expect("opsys", "params")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        if doc.kind == "params":
            return build_opsys(decode_params(doc.payload), seed=args.seed, tol_rank=args.tol_rank)
        return operator_system(decode_opsys(doc.payload), seed=args.seed, tol_rank=args.tol_rank)


def _cells_json(z: np.ndarray) -> list:
    return [[[[float(c.real), float(c.imag)] for c in z[a, b]] for b in range(z.shape[1])] for a in range(z.shape[0])]


def _analysis(s: OperatorSystem, args) -> dict:
    inv = invariants(s)
    env = c_star_envelope(s, args.level_cap, args.budget, args.seed, args.sdp_eps, args.tol_gap)
    dec = s.decomposition
    blocks = []
    for b in env.report.blocks:
        entry = {"index": b.block, "dim": dec.block_dims[b.block], "multiplicity": dec.multiplicities[b.block],
                 "boundary": b.is_boundary, "method": b.method,
                 "max_movement": float(b.singleton.max_movement), "facial_reductions": len(b.singleton.reductions),
                 "peaking": None}
        if b.peaking is not None:
            entry["peaking"] = {"level": b.peaking.level, "gap": b.peaking.gap, "norms": b.peaking.norms,
                                "vacuous": b.peaking.vacuous, "cells": _cells_json(b.peaking.cells)}
        blocks.append(entry)
    return {
        "decomposition": {"N": s.N, "block_dims": dec.block_dims, "multiplicities": dec.multiplicities},
        "invariants": {"d": inv.d, "sum_n_squared": inv.bound, "block_image_dims": list(inv.block_image_dims),
                       "holds": True},
        "blocks": blocks,
        "boundary_blocks": env.boundary_blocks,
        "boundary_ideal": env.ideal_blocks,
        "envelope": {"blocks": env.boundary_blocks, "dims": env.envelope_dims, "levels": env.report.level_cap,
                     "worst_ratio_error": env.worst_ratio_error(),
                     "matrices": [encode_matrix(m) for m in env.envelope_system.space.basis]},
        "reduced": env.is_reduced,
    }


def _report(args, command: str, body: dict, errors=()) -> Document:
    payload = {"command": command, **body, "tolerances": _tolerances(args), "errors": list(errors)}
    return Document("report", payload)


def cmd_analyze(args) -> tuple[Document, int]:
    s = _load_system(read_document(args.input), args)
    return _report(args, "analyze", _analysis(s, args)), EXIT_OK


def cmd_envelope(args) -> tuple[Document, int]:
    s = _load_system(read_document(args.input), args)
    full = _analysis(s, args)
    body = {k: full[k] for k in ("boundary_ideal", "envelope", "reduced")}
    return _report(args, "envelope", body), EXIT_OK


def cmd_equiv(args) -> tuple[Document, int]:
    a = _load_system(read_document(args.a), args)
    b = _load_system(read_document(args.b), args)
    try:
        res = decide_isomorphism(a, b, args.budget, args.seed)
    except InvalidInput as exc:
        raise InvalidInput(f"{exc}; run 'ncb analyze' to inspect the boundary ideal") from exc
    stats = {"attempts": res.attempts, "permutations_tried": res.permutations_tried, "budget": args.budget}
    if res.outcome == "witness":
        payload = {"outcome": "witness", **witness_payload(res.witness), "residual": res.residual, "search": stats,
                   "tolerances": _tolerances(args)}
        return Document("witness", payload), EXIT_OK
    body = {"outcome": res.outcome, "reason": res.reason, "search": stats}
    code = EXIT_NEGATIVE if res.outcome == "negative" else EXIT_INCONCLUSIVE
    return _report(args, "equiv", body), code


def cmd_build(args) -> tuple[Document, int]:
    doc = read_document(args.input).expect("params")
    seq = decode_params(doc.payload)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        s = build_opsys(seq, seed=args.seed, tol_rank=args.tol_rank)
    return opsys_document(list(seq.stacked_generators()), dim=s.d, faithful=s.d == seq.d), EXIT_OK


def cmd_paulsen(args) -> tuple[Document, int]:
    doc = read_document(args.input).expect("opsys")
    mats = decode_opsys(doc.payload)
    s = paulsen_device(mats)
    return opsys_document(list(s.space.basis), dim=s.d), EXIT_OK


def _decode_spec(payload: dict) -> NonreducedSpec:
    gamma = payload.get("gamma")
    if not isinstance(gamma, list) or not gamma:
        raise InvalidInput("nonreduced-spec needs a non-empty 'gamma' list")
    omega = payload.get("omega", [])
    if not isinstance(omega, list):
        raise InvalidInput("'omega' must be a list")
    return NonreducedSpec(ParamSequence(tuple(decode_map(m) for m in gamma)), [decode_map(m) for m in omega])


def cmd_nonreduced(args) -> tuple[Document, int]:
    doc = read_document(args.input).expect("nonreduced-spec")
    spec = _decode_spec(doc.payload)
    try:
        s, rep = build_and_verify(spec, args.level_cap, args.budget, args.seed, args.sdp_eps, args.tol_gap)
    except StructureViolation as exc:
        body = {"structure_ok": False, "problems": exc.report.problems if exc.report else [str(exc)]}
        return _report(args, "nonreduced", body, [str(exc)]), EXIT_NEGATIVE
    body = {
        "structure_ok": True,
        "subordination": [{"omega": c.index, "holds": c.holds, "margin": c.margin} for c in rep.subordination],
        "strong_separation": [{"pair": list(c.pair), "status": c.status, "gap": c.gap} for c in rep.separations.strong],
        "weak_separation": [{"pair": list(c.pair), "status": c.status, "gap": c.gap} for c in rep.separations.weak],
        "algebra_block_dims": rep.algebra_dims,
        "gamma_blocks": rep.gamma_blocks,
        "omega_blocks": rep.omega_blocks,
        "boundary_blocks": rep.envelope.boundary_blocks,
        "boundary_ideal": rep.envelope.ideal_blocks,
        "envelope_dims": rep.envelope.envelope_dims,
        "worst_ratio_error": rep.envelope.worst_ratio_error(),
        "reduced": rep.is_reduced,
        "system": opsys_document(list(s.space.basis)).payload,
    }
    return _report(args, "nonreduced", body), EXIT_OK


def cmd_random(args) -> tuple[Document, int]:
    n = args.n
    if args.kind == "reduced":
        d = args.d if args.d is not None else sum(k * k for k in n)
        seq = random_reduced(n, d, args.seed)
        return params_document(seq, seed=args.seed), EXIT_OK
    spec = random_nonreduced(n, args.m or [], args.d, args.seed)
    payload = {"d": spec.d, "gamma": [encode_map(m) for m in spec.gamma.maps],
               "omega": [encode_map(m) for m in spec.omega], "seed": args.seed}
    return Document("nonreduced-spec", payload), EXIT_OK


def _int_list(text: str) -> list[int]:
    try:
        out = [int(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected integers, got {text!r}") from exc
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--tol-rank", type=float, default=1e-9, help="relative rank threshold")
    common.add_argument("--tol-gap", type=float, default=1e-6, help="strictness margin for certificates")
    common.add_argument("--sdp-eps", type=float, default=1e-7, help="SDP optimality tolerance")
    common.add_argument("--level-cap", type=int, default=None, help="largest matrix level (default (max n_k)^2)")
    common.add_argument("--budget", type=int, default=200, help="search restarts")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("-o", "--output", default=None, help="output file (default stdout)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="ncb", description="Boundary representations, envelopes and "
                                "isomorphism of finite-dimensional operator systems.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn, text in (("analyze", cmd_analyze, "decomposition, boundary blocks, ideal and envelope"),
                           ("envelope", cmd_envelope, "boundary ideal and envelope only")):
        q = sub.add_parser(name, parents=[common], help=text)
        q.add_argument("input", nargs="?", default="-", help="opsys or params document")
        q.set_defaults(func=fn)
    q = sub.add_parser("equiv", parents=[common], help="decide isomorphism of two reduced systems")
    q.add_argument("a")
    q.add_argument("b")
    q.set_defaults(func=cmd_equiv)
    q = sub.add_parser("build", parents=[common], help="params document -> opsys document")
    q.add_argument("input", nargs="?", default="-")
    q.set_defaults(func=cmd_build)
    q = sub.add_parser("nonreduced", parents=[common], help="build and verify a nonreduced system")
    q.add_argument("input", nargs="?", default="-")
    q.set_defaults(func=cmd_nonreduced)
    q = sub.add_parser("paulsen", parents=[common], help="operator space -> operator system")
    q.add_argument("input", nargs="?", default="-")
    q.set_defaults(func=cmd_paulsen)
    q = sub.add_parser("random", parents=[common], help="seeded random instance")
    q.add_argument("--kind", choices=("reduced", "nonreduced"), default="reduced")
    q.add_argument("--n", type=_int_list, required=True, help="block sizes, e.g. '2' or '1,2'")
    q.add_argument("--m", type=_int_list, default=None, help="Omega block sizes (nonreduced kind)")
    q.add_argument("--d", type=int, default=None, help="dimension of Z (default sum n_k^2)")
    q.set_defaults(func=cmd_random)
    return p


def _fail(args, command: str, code: int, exc: Exception) -> int:
    doc = Document("report", {"command": command, "tolerances": _tolerances(args) if hasattr(args, "seed") else {},
                              "errors": [{"type": type(exc).__name__, "message": str(exc)}]})
    write_text(getattr(args, "output", None), doc.to_json())
    return code


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_INVALID
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        doc, code = args.func(args)
    except InvalidInput as exc:
        return _fail(args, args.command, EXIT_INVALID, exc)
    except NcbError as exc:
        return _fail(args, args.command, EXIT_INTERNAL, exc)
    write_text(args.output, doc.to_json())
    return code


if __name__ == "__main__":
    sys.exit(main())

"""JSON documents: {"version": "ncb-1", "kind": ..., "payload": ...}.

Complex entries are two-element arrays [re, im]; matrices are row-major
nested arrays. Plain numbers are accepted on input as real entries.
Floats are written with Python's shortest round-trip repr, so parsing a
serialized document reproduces every double exactly.
"""
from __future__ import annotations

import json
import re
import os
import sys
import tempfile
from dataclasses import dataclass
from numbers import Real

import numpy as np

from .classify import EquivalenceWitness
from .errors import InvalidInput
from .opsys import ParamMap, ParamSequence, Status, validate_param_map

VERSION = "ncb-1"
_FLAT = re.compile(r"\[\s*((?:-?[\d.eE+-]+|null|true|false)(?:,\s*(?:-?[\d.eE+-]+|null|true|false))*)\s*\]")
KINDS = ("opsys", "params", "nonreduced-spec", "witness", "report")


@dataclass
class Document:
    kind: str
    payload: dict
    version: str = VERSION

    def to_json(self, indent: int | None = 1) -> str:
        text = json.dumps({"version": self.version, "kind": self.kind, "payload": self.payload}, indent=indent)
        if indent is None:
            return text
        # one line per innermost numeric array keeps matrices readable
        return _FLAT.sub(lambda m: "[" + ", ".join(v.strip() for v in m.group(1).split(",")) + "]", text)

    @classmethod
    def from_json(cls, text: str) -> "Document":
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"malformed JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise InvalidInput("a document must be a JSON object")
        if raw.get("version") != VERSION:
            raise InvalidInput(f"unsupported document version {raw.get('version')!r}")
        if raw.get("kind") not in KINDS:
            raise InvalidInput(f"unknown document kind {raw.get('kind')!r}")
        if not isinstance(raw.get("payload"), dict):
            raise InvalidInput("payload must be a JSON object")
        return cls(raw["kind"], raw["payload"])

    def expect(self, *kinds) -> "Document":
        if self.kind not in kinds:
            raise InvalidInput(f"expected a document of kind {' or '.join(kinds)}, got {self.kind}")
        return self


def encode_matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2:
        raise InvalidInput("only matrices can be encoded")
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _entry(x) -> complex:
    if isinstance(x, bool):
        raise InvalidInput("booleans are not matrix entries")
    if isinstance(x, Real):
        return complex(float(x))
    if isinstance(x, list) and len(x) == 2 and all(isinstance(v, Real) and not isinstance(v, bool) for v in x):
        return complex(float(x[0]), float(x[1]))
    raise InvalidInput(f"bad matrix entry {x!r}")


def decode_matrix(obj) -> np.ndarray:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise InvalidInput("a matrix must be a non-empty list of rows")
    width = len(obj[0])
    if width == 0 or any(len(r) != width for r in obj):
        raise InvalidInput("matrix rows must be non-empty and of equal length")
    return np.array([[_entry(x) for x in row] for row in obj], dtype=complex)


def decode_matrices(obj) -> list[np.ndarray]:
    if not isinstance(obj, list) or not obj:
        raise InvalidInput("expected a non-empty list of matrices")
    return [decode_matrix(m) for m in obj]


def encode_real_matrix(m) -> list:
    return [[float(v) for v in row] for row in np.asarray(m, dtype=float)]


def decode_real_matrix(obj) -> np.ndarray:
    m = decode_matrix(obj)
    if np.abs(m.imag).max() > 0:
        raise InvalidInput("expected a real matrix")
    return m.real


def encode_map(m: ParamMap) -> dict:
    return {"generators": [encode_matrix(g) for g in m.generators]}


def decode_map(obj) -> ParamMap:
    if not isinstance(obj, dict) or "generators" not in obj:
        raise InvalidInput("a parameter map needs a 'generators' list")
    return validate_param_map(decode_matrices(obj["generators"]))


def _status_json(seq: ParamSequence) -> dict:
    return {"irreducible": seq.irreducible.value, "faithful": seq.faithful.value,
            "strongly_separated": seq.strongly_separated.value}


def params_document(seq: ParamSequence, **extra) -> Document:
    payload = {"d": seq.d, "maps": [encode_map(m) for m in seq.maps], "status": _status_json(seq)}
    payload.update(extra)
    return Document("params", payload)


def decode_params(payload: dict) -> ParamSequence:
    maps = payload.get("maps")
    if not isinstance(maps, list) or not maps:
        raise InvalidInput("params payload needs a non-empty 'maps' list")
    seq = ParamSequence(tuple(decode_map(m) for m in maps))
    if "d" in payload and payload["d"] != seq.d:
        raise InvalidInput(f"declared d = {payload['d']} but generators give {seq.d}")
    # claimed statuses are never trusted on input
    seq.irreducible = seq.faithful = seq.strongly_separated = Status.UNVERIFIED
    return seq


def opsys_document(mats, **extra) -> Document:
    payload = {"matrices": [encode_matrix(m) for m in mats]}
    payload.update(extra)
    return Document("opsys", payload)


def decode_opsys(payload: dict) -> list[np.ndarray]:
    mats = decode_matrices(payload.get("matrices"))
    if len({m.shape for m in mats}) != 1 or mats[0].shape[0] != mats[0].shape[1]:
        raise InvalidInput("opsys matrices must be square and of one size")
    return mats


def witness_payload(w) -> dict:
    return {"permutation": list(w.permutation), "unitaries": [encode_matrix(u) for u in w.unitaries],
            "theta": encode_real_matrix(w.theta)}


def decode_witness(payload: dict):
    try:
        perm = tuple(int(i) for i in payload["permutation"])
        units = tuple(decode_matrix(u) for u in payload["unitaries"])
        theta = decode_real_matrix(payload["theta"])
    except (KeyError, TypeError) as exc:
        raise InvalidInput(f"bad witness payload: {exc}") from exc
    return EquivalenceWitness(perm, units, theta)


def read_document(path: str | None) -> Document:
    try:
        if path in (None, "-"):
            text = sys.stdin.read()
        else:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    return Document.from_json(text)


def write_text(path: str | None, text: str) -> None:
    """Write to ``path`` atomically, or to stdout."""
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
        return
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".ncb-", suffix=".json")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise

"""
JSON documents for channels, states and reports; the sweep CSV; compressed SDP dumps.

Complex matrices are row-major lists of rows of [re, im] pairs.
"""

import csv
import dataclasses
import enum
import io
import json
import math
import os
import typing

import lz4.block
import numpy as np

from .rainskit import DimSpec, InputDecodeError
from .channels import Channel, BipartiteState
from . import sdp

CSV_MAGIC = "# rainskit-sweep v1"
SWEEP_COLUMNS = ("family", "param", "r_max", "e_max", "q_theta", "converse_fidelity_ceiling")
LZ4_SUFFIX = ".lz4"

#region: matrices, channels, states

def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=np.complex128)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]

def decode_matrix(data: typing.Any, what: str = "matrix") -> np.ndarray:
    try:
        m = np.array(data, dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise InputDecodeError(f"{what}: entries must be [re, im] pairs of numbers") from e
    if m.ndim != 3 or m.shape[2] != 2:
        raise InputDecodeError(f"{what}: expected rows of [re, im] pairs, got array of shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise InputDecodeError(f"{what}: non-finite entry")
    return m[..., 0] + 1j * m[..., 1]

def loads(text: str | bytes) -> typing.Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise InputDecodeError(f"line {e.lineno} column {e.colno} (char {e.pos}): {e.msg}") from e

def _field(doc: dict, key: str, kind: type | tuple[type, ...], what: str):
    if not isinstance(doc, dict):
        raise InputDecodeError(f"{what}: document must be a JSON object")
    if key not in doc:
        raise InputDecodeError(f"{what}: missing key {key!r}")
    value = doc[key]
    if not isinstance(value, kind) or isinstance(value, bool):
        raise InputDecodeError(f"{what}: key {key!r} has the wrong type")
    return value

def channel_from_json(doc: dict) -> Channel:
    kind = _field(doc, "kind", str, "channel")
    dim_in = _field(doc, "dim_in", int, "channel")
    dim_out = _field(doc, "dim_out", int, "channel")
    data = _field(doc, "data", list, "channel")
    dims = {key: tuple(doc[key]) for key in ("dims_in", "dims_out") if key in doc}
    name = doc.get("name", kind)
    match kind:
        case "kraus":
            kraus = tuple(decode_matrix(k, f"Kraus operator {i}") for i, k in enumerate(data))
            return Channel(dim_in, dim_out, kraus=kraus, name=name, **dims)
        case "choi":
            return Channel(dim_in, dim_out, choi=decode_matrix(data, "Choi operator"), name=name, **dims)
        case _:
            raise InputDecodeError(f"channel: unknown kind {kind!r}, expected 'kraus' or 'choi'")

def channel_to_json(n: Channel, kind: str = "kraus") -> dict:
    doc = {"kind": kind, "dim_in": n.dim_in, "dim_out": n.dim_out, "name": n.name}
    if kind == "kraus" and n.kraus is not None:
        doc["data"] = [encode_matrix(k) for k in n.kraus]
    else:
        doc["kind"] = "choi"
        doc["data"] = encode_matrix(n.choi)
    if len(n.dims_in) > 1:
        doc["dims_in"] = list(n.dims_in)
    if len(n.dims_out) > 1:
        doc["dims_out"] = list(n.dims_out)
    return doc

def state_from_json(doc: dict) -> tuple[BipartiteState, tuple[int, ...] | None]:
    """The state and its optional "cut" (B-side subsystem indices)."""
    dims = _field(doc, "dims", list, "state")
    matrix = decode_matrix(_field(doc, "matrix", list, "state"), "state matrix")
    state = BipartiteState(matrix, DimSpec.of(dims))
    cut = doc.get("cut")
    if cut is not None:
        cut = state.dims.indices(cut)
    return state, cut

def state_to_json(state: BipartiteState, cut: typing.Sequence[int] | None = None) -> dict:
    doc = {"dims": list(state.dims.factors), "matrix": encode_matrix(state.matrix)}
    if cut is not None:
        doc["cut"] = list(cut)
    return doc

def _read_text(path_or_stream: str | os.PathLike | typing.IO) -> str:
    if isinstance(path_or_stream, io.IOBase):
        text = path_or_stream.read()
        return text.decode("utf-8") if isinstance(text, bytes) else text
    with open(path_or_stream, "r", encoding="utf-8") as fp:
        return fp.read()

def read_channel(path_or_stream: str | os.PathLike | typing.IO) -> Channel:
    return channel_from_json(loads(_read_text(path_or_stream)))

def read_state(path_or_stream: str | os.PathLike | typing.IO) -> tuple[BipartiteState, tuple[int, ...] | None]:
    return state_from_json(loads(_read_text(path_or_stream)))

#endregion

#region: reports

def encode(value: typing.Any) -> typing.Any:
    """Plain JSON data for a report, result or any nesting of them."""
    from .rains import MeasureResult

    match value:
        case None | bool() | str() | int():
            return value
        case float() | np.floating():
            value = float(value)
            if math.isfinite(value):
                return value
            return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
        case np.integer():
            return int(value)
        case np.bool_():
            return bool(value)
        case complex() | np.complexfloating():
            return [float(value.real), float(value.imag)]
        case np.ndarray():
            if np.iscomplexobj(value) and value.ndim == 2:
                return encode_matrix(value)
            return [encode(v) for v in value.tolist()]
        case enum.Enum():
            return value.value
        case Channel():
            return channel_to_json(value)
        case BipartiteState():
            return state_to_json(value)
        case MeasureResult():
            return measure_summary(value)
        case sdp.Certificate():
            return encode({
                "certificate_interval": [value.lower, value.upper],
                "primal_residual": value.primal_residual,
                "dual_residual": value.dual_residual,
                "min_eig_x": value.min_eig_x,
                "min_eig_s": value.min_eig_s,
                "relative_gap": value.relative_gap,
                "ok": value.ok,
            })
        case dict():
            return {str(k): encode(v) for k, v in value.items()}
        case list() | tuple():
            return [encode(v) for v in value]
        case _ if dataclasses.is_dataclass(value):
            doc = {f.name: encode(getattr(value, f.name)) for f in dataclasses.fields(value) if f.repr}
            for name in _report_properties(type(value)):
                doc[name] = encode(getattr(value, name))
            return doc
        case _:
            raise TypeError(f"cannot encode {type(value).__name__} as JSON")

def _report_properties(cls: type) -> list[str]:
    return sorted(name for klass in cls.__mro__ for name, attr in vars(klass).items()
                  if isinstance(attr, property) and not name.startswith("_"))

def measure_summary(result) -> dict:
    return encode({
        "name": result.name,
        "value": result.value,
        "log2_value": result.log2_value,
        "exact": result.exact,
        "certificate": result.certificate,
    })

def dumps(value: typing.Any) -> str:
    """Deterministic JSON text for a report."""
    return json.dumps(encode(value), sort_keys=True, indent=2)

#endregion

#region: sweep CSV

def format_real(x: float | None) -> str:
    if x is None:
        return ""
    return format(float(x), ".12g")

def write_sweep_csv(rows: typing.Iterable[dict], stream: typing.TextIO):
    stream.write(CSV_MAGIC + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for row in rows:
        writer.writerow([row["family"]] + [format_real(row.get(column)) for column in SWEEP_COLUMNS[1:]])

def read_sweep_csv(stream: typing.TextIO) -> list[dict]:
    first = stream.readline().rstrip("\n")
    if first != CSV_MAGIC:
        raise InputDecodeError(f"not a sweep file: first line {first!r}")
    reader = csv.DictReader(stream)
    return [{k: (v if k == "family" else (float(v) if v else None)) for k, v in row.items()} for row in reader]

#endregion

#region: SDP dumps

def problem_to_json(problem: sdp.SdpProblem) -> dict:
    return {
        "name": problem.name,
        "blocks": list(problem.blocks),
        "C": [c.tolist() for c in problem.C],
        "constraints": [{"A": [a.tolist() for a in blocks], "b": b} for blocks, b in problem.constraints],
    }

def problem_from_json(doc: dict) -> sdp.SdpProblem:
    blocks = tuple(_field(doc, "blocks", list, "problem"))
    constraints = _field(doc, "constraints", list, "problem")
    try:
        A = [np.array([row["A"][j] for row in constraints], dtype=np.float64).reshape(len(constraints), n, n)
             for j, n in enumerate(blocks)]
        b = [row["b"] for row in constraints]
        C = [np.array(c, dtype=np.float64) for c in _field(doc, "C", list, "problem")]
    except (KeyError, TypeError, ValueError) as e:
        raise InputDecodeError(f"problem: malformed constraint data ({e})") from e
    return sdp.SdpProblem(blocks, C, A, np.array(b), name=doc.get("name", "sdp"))

def dump_problem(problem: sdp.SdpProblem, path: str | os.PathLike):
    """Write the problem as JSON, lz4-block compressed when the path ends in .lz4."""
    body = json.dumps(problem_to_json(problem)).encode("utf-8")
    if os.fspath(path).endswith(LZ4_SUFFIX):
        body = lz4.block.compress(body, store_size=True)
    with open(path, "wb") as fp:
        fp.write(body)

def load_problem(path: str | os.PathLike) -> sdp.SdpProblem:
    with open(path, "rb") as fp:
        body = fp.read()
    if os.fspath(path).endswith(LZ4_SUFFIX):
        try:
            body = lz4.block.decompress(body)
        except lz4.block.LZ4BlockError as e:
            raise InputDecodeError(f"{path}: corrupt lz4 block") from e
    return problem_from_json(loads(body))

#endregion

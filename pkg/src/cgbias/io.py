"""JSON instance documents.

A document holds one game with biased costs::

    {"schema": 1, "name": "...", "nodes": [...],
     "edges": [{"id": "e1", "from": "s", "to": "t", "cost": {"poly": [1]}}],
     "types": [{"source": "s", "target": "t", "mass": 1,
                "bias": {"tax": {"beta": 0.5}}}],
     "dsp": {"parallel": [{"edge": "e1"}, {"edge": "e2"}]}}

Floats are written with 17 significant digits so documents round-trip
exactly.  Unknown fields are rejected with their JSON path and the line and
column of the enclosing object.
"""

from __future__ import annotations

import json
import json.decoder
import json.scanner
import math
from typing import Any, Dict, Mapping

from .costfun import (
    BiasSpec,
    Capacity,
    CostModel,
    Identity,
    MeanVar,
    Override,
    Pessimism,
    Polynomial,
    ShiftedPower,
    TableCost,
    Tax,
)
from .flowsolve import AgentType, Instance
from .netgraph import DspRecipe, Network

__all__ = ["SCHEMA_VERSION", "DocumentError", "dumps", "loads", "load", "dump", "cost_to_dict", "cost_from_dict",
           "bias_to_dict", "bias_from_dict", "format_number"]

SCHEMA_VERSION = 1


class DocumentError(ValueError):
    """Malformed instance document; ``where`` names the offending location."""

    def __init__(self, message, where=""):
        super().__init__(f"{where}: {message}" if where else message)
        self.where = where


# --- position-aware parsing ---------------------------------------------------


class _Obj(dict):
    pos = None


def _parse_object(s_and_end, strict, scan_once, object_hook, object_pairs_hook, memo=None, _w=None):
    s, end = s_and_end

    def hook(pairs):
        obj = _Obj()
        for k, v in pairs:
            if k in obj:
                raise DocumentError(f"duplicate field {k!r}", _linecol(s, end - 1))
            obj[k] = v
        return obj

    obj, new_end = json.decoder.JSONObject(s_and_end, strict, scan_once, object_hook, hook, memo)
    obj.pos = _linecol(s, end - 1)
    return obj, new_end


def _linecol(s, idx):
    line = s.count("\n", 0, idx) + 1
    col = idx - (s.rfind("\n", 0, idx) + 1) + 1
    return f"line {line} column {col}"


def _decoder():
    dec = json.JSONDecoder()
    dec.parse_object = _parse_object
    dec.scan_once = json.scanner.py_make_scanner(dec)
    return dec


def _fields(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        raise DocumentError("expected an object", path)
    where = f"{path} ({obj.pos})" if getattr(obj, "pos", None) else path
    extra = [k for k in obj if k not in required and k not in optional]
    if extra:
        raise DocumentError(f"unknown field {extra[0]!r}", where)
    missing = [k for k in required if k not in obj]
    if missing:
        raise DocumentError(f"missing field {missing[0]!r}", where)
    return where


def _number(v, where, name):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise DocumentError(f"{name} must be a number", where)
    return float(v)


def _single_key(obj, path, allowed):
    if not isinstance(obj, dict) or len(obj) != 1:
        raise DocumentError(f"expected a single-key object with one of {sorted(allowed)}", path)
    (key, val), = obj.items()
    if key not in allowed:
        where = f"{path} ({obj.pos})" if getattr(obj, "pos", None) else path
        raise DocumentError(f"unknown field {key!r}", where)
    return key, val


# --- costs and biases -------------------------------------------------------------


def cost_to_dict(c: CostModel) -> Dict[str, Any]:
    if isinstance(c, ShiftedPower):
        return {"power": {"scale": c.scale, "degree": c.degree, "shift": c.shift}}
    if isinstance(c, TableCost):
        return {"table": {"loads": list(map(float, c.loads)), "values": list(map(float, c.values))}}
    if c.kind == "poly":
        return {"poly": [float(a) for a in c.coefficients]}
    raise DocumentError(f"{c.kind} costs cannot be serialised")


def cost_from_dict(obj, path="$") -> CostModel:
    key, val = _single_key(obj, path, {"poly", "power", "table"})
    where = f"{path}.{key}"
    try:
        if key == "poly":
            if not isinstance(val, list) or not val:
                raise DocumentError("poly needs a non-empty coefficient list", where)
            return Polynomial([_number(v, where, "coefficient") for v in val])
        if key == "power":
            _fields(val, where, ("scale", "degree"), ("shift",))
            deg = val["degree"]
            if isinstance(deg, bool) or not isinstance(deg, int):
                raise DocumentError("degree must be an integer", where)
            return ShiftedPower(_number(val["scale"], where, "scale"), deg, _number(val.get("shift", 0), where, "shift"))
        _fields(val, where, ("loads", "values"))
        return TableCost([_number(v, where, "load") for v in val["loads"]],
                         [_number(v, where, "value") for v in val["values"]])
    except DocumentError:
        raise
    except ValueError as exc:
        raise DocumentError(str(exc), where) from exc


def bias_to_dict(b: BiasSpec) -> Dict[str, Any]:
    if isinstance(b, Identity):
        return {"identity": {}}
    if isinstance(b, Tax):
        return {"tax": {"beta": b.beta}}
    if isinstance(b, Pessimism):
        return {"pessimism": {"r": b.r}}
    if isinstance(b, MeanVar):
        if isinstance(b.variance, CostModel):
            var = cost_to_dict(b.variance)
        else:
            var = {"edges": {e: cost_to_dict(v) for e, v in b.variance.items()}}
        return {"meanvar": {"gamma": b.gamma, "variance": var, "kappa": b.kappa}}
    if isinstance(b, Capacity):
        return {"capacity": {"L": b.L, "delta": b.delta, "M": b.M}}
    if isinstance(b, Override):
        return {"override": {e: cost_to_dict(c) for e, c in b.table.items()}}
    raise DocumentError(f"unknown bias {b!r}")


def bias_from_dict(obj, path="$") -> BiasSpec:
    key, val = _single_key(obj, path, {"identity", "tax", "pessimism", "meanvar", "capacity", "override"})
    where = f"{path}.{key}"
    try:
        if key == "identity":
            _fields(val, where, ())
            return Identity()
        if key == "tax":
            _fields(val, where, ("beta",))
            return Tax(_number(val["beta"], where, "beta"))
        if key == "pessimism":
            _fields(val, where, ("r",))
            return Pessimism(_number(val["r"], where, "r"))
        if key == "meanvar":
            _fields(val, where, ("gamma", "variance"), ("kappa",))
            var = val["variance"]
            vpath = f"{where}.variance"
            if isinstance(var, dict) and "edges" in var:
                _fields(var, vpath, ("edges",))
                if not isinstance(var["edges"], dict):
                    raise DocumentError("edges must map edge ids to costs", vpath)
                variance = {e: cost_from_dict(v, f"{vpath}.edges.{e}") for e, v in var["edges"].items()}
            else:
                variance = cost_from_dict(var, vpath)
            kappa = val.get("kappa")
            kappa = None if kappa is None else _number(kappa, where, "kappa")
            return MeanVar(_number(val["gamma"], where, "gamma"), variance, kappa)
        if key == "capacity":
            _fields(val, where, ("L", "delta", "M"))
            return Capacity(*(_number(val[k], where, k) for k in ("L", "delta", "M")))
        if not isinstance(val, dict):
            raise DocumentError("override needs an edge -> cost object", where)
        return Override({e: cost_from_dict(v, f"{where}.{e}") for e, v in val.items()})
    except DocumentError:
        raise
    except ValueError as exc:
        raise DocumentError(str(exc), where) from exc


# --- documents --------------------------------------------------------------------


def to_document(inst: Instance) -> Dict[str, Any]:
    net = inst.network
    doc = {
        "schema": SCHEMA_VERSION,
        "name": inst.name,
        "nodes": list(net.nodes),
        "edges": [
            {"id": eid, "from": u, "to": v, "cost": cost_to_dict(c)} for (eid, u, v), c in zip(net.edges, inst.costs)
        ],
        "types": [],
    }
    for t in inst.types:
        row = {"source": t.source, "target": t.target, "mass": t.mass, "bias": bias_to_dict(t.bias)}
        if t.name is not None:
            row["name"] = t.name
        doc["types"].append(row)
    if net.dsp_certificate is not None:
        doc["dsp"] = net.dsp_certificate.to_dict()
    return doc


def from_document(doc) -> Instance:
    _fields(doc, "$", ("schema", "nodes", "edges", "types"), ("name", "dsp"))
    if doc["schema"] != SCHEMA_VERSION:
        raise DocumentError(f"unsupported schema {doc['schema']!r}", "$.schema")
    for key in ("nodes", "edges", "types"):
        if not isinstance(doc[key], list):
            raise DocumentError("expected a list", f"$.{key}")
    edges, costs = [], {}
    for k, e in enumerate(doc["edges"]):
        path = f"$.edges[{k}]"
        _fields(e, path, ("id", "from", "to", "cost"))
        edges.append((str(e["id"]), e["from"], e["to"]))
        costs[str(e["id"])] = cost_from_dict(e["cost"], f"{path}.cost")
    recipe = None
    if doc.get("dsp") is not None:
        try:
            recipe = DspRecipe.from_dict(doc["dsp"])
        except ValueError as exc:
            raise DocumentError(str(exc), "$.dsp") from exc
    try:
        net = Network(tuple(doc["nodes"]), tuple(edges), recipe)
    except ValueError as exc:
        raise DocumentError(str(exc), "$.edges") from exc
    types = []
    for k, t in enumerate(doc["types"]):
        path = f"$.types[{k}]"
        where = _fields(t, path, ("source", "target", "mass"), ("bias", "name"))
        bias = bias_from_dict(t["bias"], f"{path}.bias") if "bias" in t else Identity()
        try:
            types.append(AgentType(t["source"], t["target"], _number(t["mass"], where, "mass"), bias, t.get("name")))
        except ValueError as exc:
            raise DocumentError(str(exc), where) from exc
    try:
        return Instance(net, costs, types, str(doc.get("name", "")))
    except (ValueError, RuntimeError) as exc:
        raise DocumentError(str(exc), "$.types") from exc


def format_number(x: float) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        raise DocumentError(f"cannot serialise non-finite number {x}")
    if float(x).is_integer() and abs(x) < 1e16:
        return str(int(x))
    return format(x, ".17g")


def _emit(obj, indent, level) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None:
        return "null"
    if isinstance(obj, (bool, int, float)):
        return format_number(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, Mapping):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_emit(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, str)) and not isinstance(v, bool) or v is None for v in obj):
            return "[" + ", ".join(_emit(v, indent, level) for v in obj) + "]"
        items = [pad + _emit(v, indent, level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise DocumentError(f"cannot serialise {type(obj).__name__}")


def dumps(inst: Instance, indent: int = 2) -> str:
    return _emit(to_document(inst), indent, 0) + "\n"


def loads(text: str) -> Instance:
    try:
        doc = _decoder().decode(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(exc.msg, f"line {exc.lineno} column {exc.colno}") from exc
    return from_document(doc)


def load(path) -> Instance:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())


def dump(inst: Instance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(inst))

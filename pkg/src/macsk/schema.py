"""JSON file formats for channels, laws, protocols and partitions.

Every loader raises :class:`SchemaError` on malformed input; the CLI maps it
to exit code 2.

Function specs
--------------
Protocol files describe every map (messages, inputs, keys) by a small JSON
"function spec" applied to the *flattened* argument tuple (nested tuples such
as the transcript are spliced in place). Negative indices count from the end.

``{"const": v}``
    constant ``v``.
``{"arg": i}``
    the ``i``-th flat argument.
``{"xor": [i, j, ...]}`` / ``{"sum": [i, ...], "mod": m}``
    bitwise xor / sum of the listed arguments (``mod`` optional).
``{"table": {"a,b,c": v, ...}, "default": d}``
    lookup keyed by the comma-joined flat arguments.
``{"hash": salt, "alphabet": a}``
    the seeded pseudo-random map used by the random protocol generator.

Any spec may carry ``"mod": m`` (applied last).

Flat arguments per map of a ``ct`` protocol:

* message of terminal 1 or 2: ``(u_i, f...)``; of terminal 3: ``(u3, x3..., f...)``
* channel input of terminal i at slot t: ``(t, u_i, f...)``
* ``K1``/``K2``: ``(u_i, f...)``; ``K3``: ``(u3, x3..., f...)``; ``"map"``
  for ``K2``/``K3`` installs maximum a posteriori estimators of ``K = K1``.

Flat arguments of an ``interactive`` message: ``(own observation, earlier
messages...)``; of a ``genie`` transcript: ``(y_1, ..., y_m)``.
"""

from __future__ import annotations

import json
import os
from typing import Any, Callable

import numpy as np

from .converse import (FractionalPartition, GenieTranscript, InteractiveProtocol, Message, Partition,
                       partition_to_fractional)
from .info import JointDist, MacChannel
from .protocols import CtMessage, CtProtocol, RESTRICTIONS, random_function


class SchemaError(ValueError):
    """Input file does not match its documented JSON schema."""


def read_json(path) -> Any:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON ({exc})") from exc


def _require(obj: Any, key: str, where: str):
    if not isinstance(obj, dict) or key not in obj:
        raise SchemaError(f"{where}: missing field {key!r}")
    return obj[key]


def _int(v: Any, where: str, minimum: int | None = None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise SchemaError(f"{where}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise SchemaError(f"{where}: must be >= {minimum}")
    return v


def load_channel(path) -> MacChannel:
    obj = read_json(path)
    try:
        return MacChannel.from_json(obj, name=os.path.basename(str(path)))
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def load_law(path) -> JointDist:
    """``{"probs": nested array, "names": [...] (optional)}``; axis i is variable i."""
    obj = read_json(path)
    probs = _require(obj, "probs", str(path))
    try:
        table = np.asarray(probs, dtype=float)
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{path}: probs must be a rectangular numeric array") from exc
    if table.ndim == 0:
        raise SchemaError(f"{path}: probs must be an array")
    try:
        return JointDist(table, obj.get("names"))
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


# ----------------------------------------------------------------------------
# function specs


def _flat(args) -> list[int]:
    out: list[int] = []
    for a in args:
        if isinstance(a, (tuple, list)):
            out.extend(_flat(a))
        else:
            out.append(int(a))
    return out


def compile_fn(spec: Any, where: str) -> Callable[..., int]:
    """Callable taking the raw (possibly nested) arguments of one map."""
    if not isinstance(spec, dict):
        raise SchemaError(f"{where}: function spec must be an object")
    mod = spec.get("mod")
    if mod is not None:
        _int(mod, f"{where}.mod", 1)
    ops = [k for k in ("const", "arg", "xor", "sum", "table", "hash") if k in spec]
    if len(ops) != 1:
        raise SchemaError(f"{where}: need exactly one of const/arg/xor/sum/table/hash")
    op = ops[0]
    if op == "const":
        v = _int(spec["const"], where)
        core = lambda a: v
    elif op == "arg":
        i = _int(spec["arg"], where)
        core = lambda a: a[i]
    elif op in ("xor", "sum"):
        idx = spec[op]
        if not isinstance(idx, list) or not idx:
            raise SchemaError(f"{where}: {op} needs a nonempty index list")
        idx = [_int(i, where) for i in idx]
        if op == "xor":
            def core(a):
                v = 0
                for i in idx:
                    v ^= a[i]
                return v
        else:
            core = lambda a: sum(a[i] for i in idx)
    elif op == "table":
        tab = spec["table"]
        if not isinstance(tab, dict):
            raise SchemaError(f"{where}: table must map 'a,b,...' keys to values")
        table = {k.replace(" ", ""): _int(v, f"{where}.table[{k}]") for k, v in tab.items()}
        default = _int(spec.get("default", 0), f"{where}.default")
        core = lambda a: table.get(",".join(map(str, a)), default)
    else:
        f = random_function(_int(spec["hash"], where), _int(_require(spec, "alphabet", where), where, 1))
        return lambda *args: f(*args) % mod if mod else f(*args)

    def fn(*args):
        a = _flat(args)
        try:
            v = int(core(a))
        except IndexError as exc:
            raise ValueError(f"{where}: argument index out of range for {len(a)} arguments") from exc
        return v % mod if mod else v

    return fn


# ----------------------------------------------------------------------------
# protocols


def load_protocol(path):
    """An ``interactive`` protocol, ``genie`` transcript, or ``ct`` protocol."""
    obj = read_json(path)
    return protocol_from_json(obj, str(path))


def protocol_from_json(obj: Any, where: str = "protocol"):
    kind = _require(obj, "kind", where)
    try:
        if kind == "interactive":
            return _interactive(obj, where)
        if kind == "genie":
            alph = tuple(_int(a, f"{where}.alphabets", 1) for a in _require(obj, "alphabets", where))
            fn = compile_fn(_require(obj, "fn", where), f"{where}.fn")
            return GenieTranscript(alph, lambda obs: fn(obs))
        if kind == "ct":
            return _ct(obj, where)
    except SchemaError:
        raise
    except (ValueError, TypeError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    raise SchemaError(f"{where}: kind must be interactive, genie or ct")


def _interactive(obj, where) -> InteractiveProtocol:
    alph = tuple(_int(a, f"{where}.alphabets", 1) for a in _require(obj, "alphabets", where))
    msgs = []
    for i, m in enumerate(_require(obj, "messages", where)):
        w = f"{where}.messages[{i}]"
        fn = compile_fn(_require(m, "fn", w), f"{w}.fn")
        msgs.append(Message(_int(_require(m, "sender", w), w, 0), _int(_require(m, "alphabet", w), w, 1),
                            lambda y, f, fn=fn: fn(y, f), _int(m.get("round", 0), w, 0)))
    return InteractiveProtocol(alph, tuple(msgs))


def _ct(obj, where) -> CtProtocol | tuple:
    n = _int(_require(obj, "n", where), f"{where}.n", 1)
    u_sizes = [_int(s, f"{where}.u_sizes", 1) for s in _require(obj, "u_sizes", where)]
    restriction = obj.get("restriction", "general")
    if restriction not in RESTRICTIONS:
        raise SchemaError(f"{where}: restriction must be one of {RESTRICTIONS}")
    rounds = []
    for t, rnd in enumerate(_require(obj, "rounds", where)):
        msgs = []
        for i, m in enumerate(rnd):
            w = f"{where}.rounds[{t}][{i}]"
            fn = compile_fn(_require(m, "fn", w), f"{w}.fn")
            msgs.append(CtMessage(_int(_require(m, "sender", w), w, 0),
                                  _int(_require(m, "alphabet", w), w, 1),
                                  lambda view, f, fn=fn: fn(view, f)))
        rounds.append(tuple(msgs))
    inputs = _require(obj, "inputs", where)
    if not isinstance(inputs, list) or len(inputs) != 2:
        raise SchemaError(f"{where}: inputs must list two function specs")
    ins = tuple(compile_fn(s, f"{where}.inputs[{i}]") for i, s in enumerate(inputs))
    key_size = _int(_require(obj, "key_size", where), f"{where}.key_size", 1)
    kspec = _require(obj, "key_maps", where)
    if not isinstance(kspec, list) or len(kspec) != 3:
        raise SchemaError(f"{where}: key_maps must list K1, K2, K3")
    if kspec[0] == "map":
        raise SchemaError(f"{where}: K1 defines the key and cannot be 'map'")
    k1 = compile_fn(kspec[0], f"{where}.key_maps[0]")
    k2 = (lambda u, f: 0) if kspec[1] == "map" else compile_fn(kspec[1], f"{where}.key_maps[1]")
    k3 = (lambda u, x, f: 0) if kspec[2] == "map" else compile_fn(kspec[2], f"{where}.key_maps[2]")
    p = CtProtocol(n, tuple(u_sizes), tuple(rounds),
                   (lambda t, f, u, g=ins[0]: g(t, u, f), lambda t, f, u, g=ins[1]: g(t, u, f)),
                   key_size, (lambda u, f: k1(u, f), lambda u, f: k2(u, f), lambda u, x, f: k3(u, x, f)),
                   restriction=restriction, u_probs=obj.get("u_probs"))
    object.__setattr__(p, "_map_estimators", "map" in kspec[1:])
    return p


def needs_map_estimators(p: CtProtocol) -> bool:
    return bool(getattr(p, "_map_estimators", False))


# ----------------------------------------------------------------------------
# partitions


def parse_partition(spec: str, m: int) -> FractionalPartition | None:
    """``lp`` (None), a set partition ``"0,1|2"``, or weights ``"0,1=0.5;1,2=0.5;0,2=0.5"``."""
    spec = spec.strip()
    if spec == "lp":
        return None
    try:
        if "=" in spec:
            weights = {}
            for part in spec.split(";"):
                block, w = part.split("=")
                weights[frozenset(int(i) for i in block.split(","))] = float(w)
            return FractionalPartition(m, weights)
        blocks = tuple(frozenset(int(i) for i in b.split(",")) for b in spec.split("|"))
        p = Partition(blocks)
        if p.m != m:
            raise ValueError(f"partition covers {p.m} terminals, law has {m}")
        return partition_to_fractional(p)
    except ValueError as exc:
        raise SchemaError(f"partition {spec!r}: {exc}") from exc

"""Strict JSON instance files: parsing, serialization and structural equality.

A file is an object with the sections ``mdp`` (required), ``ambiguity``,
``kernel``, ``cost_ambiguity``, ``avar``, ``soc`` and ``oracle``. Per-state
data is keyed by state name and per-action data by action name, so files stay
readable; vectors over next states are plain lists in state order. Unknown
keys anywhere are rejected, and every error names the offending field path.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .ambiguity import (FiniteKernelSet, Polytope, RRect, SaRect, Singleton, SrRect, SRect,
                        UnionOfPolytopes, require_valid_model)
from .cost import CostSaRect, CostSingleton, CostSRect, FiniteCostSet, require_valid_cost_model
from .exceptions import DrmdpError, ValidationError
from .mdp import MdpInstance, check_kernel, require_valid
from .risk import AvarSpec
from .soc import SocSpec
from .static import OracleConfig

SECTIONS = ("mdp", "ambiguity", "kernel", "cost_ambiguity", "avar", "soc", "oracle")


class FileFormatError(ValidationError):
    """Malformed or schema-violating instance file."""


@dataclass(eq=False)
class ProblemFile:
    """In-memory content of an instance file."""

    instance: MdpInstance
    ambiguity: Optional[list] = None
    kernel: Optional[list] = None
    cost_ambiguity: Optional[list] = None
    avar: Optional[AvarSpec] = None
    soc: Optional[SocSpec] = None
    oracle: Optional[OracleConfig] = None

    def __eq__(self, other):
        return isinstance(other, ProblemFile) and structurally_equal(self, other)


# ---------------------------------------------------------------------------
# Parsing


class _Reader:
    """Schema walker that tracks the JSON path for error messages."""

    def __init__(self, path="$"):
        self.path = path

    def at(self, key):
        suffix = f"[{key}]" if isinstance(key, int) else f".{key}"
        return _Reader(self.path + suffix)

    def fail(self, message):
        raise FileFormatError(f"{self.path}: {message}", [f"{self.path}: {message}"])

    def obj(self, value, required=(), optional=()):
        if not isinstance(value, dict):
            self.fail(f"expected an object, got {type(value).__name__}")
        unknown = sorted(set(value) - set(required) - set(optional))
        if unknown:
            self.fail(f"unknown key(s) {', '.join(map(repr, unknown))}")
        missing = [k for k in required if k not in value]
        if missing:
            self.fail(f"missing key(s) {', '.join(map(repr, missing))}")
        return value

    def lst(self, value, length=None):
        if not isinstance(value, list):
            self.fail(f"expected a list, got {type(value).__name__}")
        if length is not None and len(value) != length:
            self.fail(f"expected {length} entries, got {len(value)}")
        return value

    def number(self, value):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            self.fail(f"expected a number, got {json.dumps(value)}")
        return float(value)

    def integer(self, value):
        if isinstance(value, bool) or not isinstance(value, int):
            self.fail(f"expected an integer, got {json.dumps(value)}")
        return value

    def boolean(self, value):
        if not isinstance(value, bool):
            self.fail(f"expected true or false, got {json.dumps(value)}")
        return value

    def name(self, value):
        if not isinstance(value, str) or not value:
            self.fail("expected a non-empty string")
        return value

    def array(self, value, ndim):
        """Numeric nested list of exactly ``ndim`` levels."""
        try:
            arr = np.array(value, dtype=float)
        except (TypeError, ValueError):
            self.fail(f"expected a rectangular numeric array of depth {ndim}")
        if arr.ndim != ndim or arr.size == 0 or _has_bool(value):
            self.fail(f"expected a non-empty numeric array of depth {ndim}")
        if not np.all(np.isfinite(arr)):
            self.fail("non-finite number")
        return arr

    def keyed(self, value, names):
        """Object keyed by exactly ``names``, returned as a list in ``names`` order."""
        self.obj(value, required=names)
        return [value[n] for n in names]


def _has_bool(value):
    if isinstance(value, bool):
        return True
    return isinstance(value, list) and any(_has_bool(v) for v in value)


def _vector(reader, value, n, next_names=None):
    """Next-state vector as a list or as a sparse ``{name: value}`` object."""
    if isinstance(value, dict) and next_names is not None:
        out = np.zeros(n)
        reader.obj(value, optional=next_names)
        for k, v in value.items():
            out[next_names.index(k)] = reader.at(k).number(v)
        return out
    arr = reader.array(value, 1)
    if arr.size != n:
        reader.fail(f"expected {n} entries, got {arr.size}")
    return arr


def _state_blocks(reader, value, instance, t, scalar_ok=False):
    """``{state: {action: vector}}`` into a list of ``(n_actions, n_next)`` arrays."""
    states = list(instance.states[t])
    nxt = list(instance.states[t + 1])
    blocks = []
    for s, per_state in enumerate(reader.keyed(value, states)):
        rs = reader.at(states[s])
        acts = list(instance.actions[t][s])
        rows = []
        for a, row in enumerate(rs.keyed(per_state, acts)):
            ra = rs.at(acts[a])
            if scalar_ok and not isinstance(row, (list, dict)):
                rows.append(np.full(len(nxt), ra.number(row)))
            else:
                rows.append(_vector(ra, row, len(nxt), nxt))
        blocks.append(np.array(rows))
    return blocks


def _stage_layers(reader, value, instance, parse_stage):
    reader.lst(value, instance.horizon)
    return [parse_stage(reader.at(t), v, t) for t, v in enumerate(value)]


def _parse_mdp(reader, value, costs_required=True):
    keys = ("states", "actions", "costs", "terminal_cost", "initial_state")
    required = keys if costs_required else tuple(k for k in keys if k != "costs")
    reader.obj(value, required=required, optional=keys)
    rs = reader.at("states")
    states = [[rs.at(t).at(i).name(x) for i, x in enumerate(rs.at(t).lst(layer))]
              for t, layer in enumerate(rs.lst(value["states"]))]
    if len(states) < 2:
        rs.fail("need at least two stages of states")
    for t, layer in enumerate(states):
        if not layer:
            rs.at(t).fail("empty state layer")
        if len(set(layer)) != len(layer):
            rs.at(t).fail("duplicate state names")
    T = len(states) - 1
    ra = reader.at("actions")
    ra.lst(value["actions"], T)
    actions = []
    for t, layer in enumerate(value["actions"]):
        rt = ra.at(t)
        per_state = rt.keyed(layer, states[t])
        acts = []
        for s, names in enumerate(per_state):
            rn = rt.at(states[t][s])
            names = [rn.at(i).name(a) for i, a in enumerate(rn.lst(names))]
            if not names:
                rn.fail("empty action set")
            if len(set(names)) != len(names):
                rn.fail("duplicate action names")
            acts.append(names)
        actions.append(acts)
    rt = reader.at("terminal_cost")
    raw = value["terminal_cost"]
    if isinstance(raw, dict):
        terminal = np.array([rt.at(n).number(v) for n, v in zip(states[-1], rt.keyed(raw, states[-1]))])
    else:
        terminal = _vector(rt, raw, len(states[-1]))
    init = reader.at("initial_state").name(value["initial_state"])
    if init not in states[0]:
        reader.at("initial_state").fail(f"{init!r} is not a first-stage state")
    skeleton = MdpInstance(states, actions,
                           [[np.zeros((len(a), len(states[t + 1]))) for a in acts] for t, acts in enumerate(actions)],
                           terminal, init)
    if "costs" not in value:
        return skeleton
    costs = _stage_layers(reader.at("costs"), value["costs"], skeleton,
                          lambda r, v, t: _state_blocks(r, v, skeleton, t, scalar_ok=True))
    return skeleton.with_costs(costs)


def _parse_polytope(reader, value, flatten=False):
    value = reader.obj(value, optional=("vertices", "A", "b", "E", "f"))
    if "vertices" in value:
        if set(value) != {"vertices"}:
            reader.fail("give either 'vertices' or halfspaces, not both")
        raw = value["vertices"]
        arr = reader.at("vertices").array(raw, 3) if flatten and _depth(raw) == 3 else None
        if arr is None:
            arr = reader.at("vertices").array(raw, 2)
        return Polytope(arr.reshape(arr.shape[0], -1))
    if not ({"A", "b"} <= set(value) or {"E", "f"} <= set(value)):
        reader.fail("need 'vertices', or 'A' with 'b' and/or 'E' with 'f'")
    parts = {}
    for lhs, rhs in (("A", "b"), ("E", "f")):
        if (lhs in value) != (rhs in value):
            reader.fail(f"'{lhs}' and '{rhs}' must be given together")
        if lhs in value:
            parts[lhs] = reader.at(lhs).array(value[lhs], 2)
            parts[rhs] = reader.at(rhs).array(value[rhs], 1)
    try:
        return Polytope(**parts)
    except ValidationError as exc:
        reader.fail(str(exc))


def _depth(value):
    d = 0
    while isinstance(value, list) and value:
        d += 1
        value = value[0]
    return d


def _parse_kernel_stage(reader, value, instance, t):
    return _state_blocks(reader, value, instance, t)


def _parse_s_rect(reader, value, instance, t, cls):
    reader.obj(value, required=("type", "sets"))
    states = list(instance.states[t])
    rs = reader.at("sets")
    unions = []
    for s, pieces in enumerate(rs.keyed(value["sets"], states)):
        rp = rs.at(states[s])
        polys = [_parse_polytope(rp.at(i), p, flatten=True) for i, p in enumerate(rp.lst(pieces))]
        if not polys:
            rp.fail("empty union")
        shape = (instance.n_actions(t, s), instance.n_states(t + 1))
        for i, p in enumerate(polys):
            if p.dim != shape[0] * shape[1]:
                rp.at(i).fail(f"dimension {p.dim}, expected {shape[0]} x {shape[1]}")
        unions.append(UnionOfPolytopes(polys, shape))
    return cls(unions)


def _parse_r_rect(reader, value, instance, t):
    reader.obj(value, required=("type", "factors", "coefficients"))
    rf = reader.at("factors")
    factors = [rf.at(i).array(W, 2) for i, W in enumerate(rf.lst(value["factors"]))]
    if not factors:
        rf.fail("need at least one factor")
    for i, W in enumerate(factors):
        if W.shape[1] != instance.n_states(t + 1):
            rf.at(i).fail(f"vectors of length {W.shape[1]}, expected {instance.n_states(t + 1)}")
    states = list(instance.states[t])
    rc = reader.at("coefficients")
    coeffs = []
    for s, per_state in enumerate(rc.keyed(value["coefficients"], states)):
        rs = rc.at(states[s])
        acts = list(instance.actions[t][s])
        rows = []
        for a, row in enumerate(rs.keyed(per_state, acts)):
            arr = rs.at(acts[a]).array(row, 1)
            if arr.size != len(factors):
                rs.at(acts[a]).fail(f"expected {len(factors)} coefficients")
            rows.append(arr)
        coeffs.append(np.array(rows))
    return RRect(factors, coeffs)


def _parse_stage_model(reader, value, instance, t, cost=False):
    reader.obj(value, required=("type",), optional=("sets", "factors", "coefficients", "beta", "s_part",
                                                     "r_part", "kernels", "hull", "kernel", "costs", "cost"))
    kind = value["type"]
    allowed = ("sa_rect", "s_rect", "finite", "singleton") if cost else \
        ("sa_rect", "s_rect", "r_rect", "sr_rect", "finite", "singleton")
    if kind not in allowed:
        reader.at("type").fail(f"unknown model type {kind!r}; expected one of {', '.join(allowed)}")
    table_key = "costs" if cost else "kernels"
    single_key = "cost" if cost else "kernel"
    if kind == "sa_rect":
        reader.obj(value, required=("type", "sets"))
        states = list(instance.states[t])
        rs = reader.at("sets")
        sets = []
        for s, per_state in enumerate(rs.keyed(value["sets"], states)):
            r = rs.at(states[s])
            acts = list(instance.actions[t][s])
            row = []
            for a, p in enumerate(r.keyed(per_state, acts)):
                poly = _parse_polytope(r.at(acts[a]), p)
                if poly.dim != instance.n_states(t + 1):
                    r.at(acts[a]).fail(f"dimension {poly.dim}, expected {instance.n_states(t + 1)}")
                row.append(poly)
            sets.append(row)
        return (CostSaRect if cost else SaRect)(sets)
    if kind == "s_rect":
        return _parse_s_rect(reader, value, instance, t, CostSRect if cost else SRect)
    if kind == "r_rect":
        return _parse_r_rect(reader, value, instance, t)
    if kind == "sr_rect":
        reader.obj(value, required=("type", "beta", "s_part", "r_part"))
        beta = reader.at("beta").number(value["beta"])
        s_part = _parse_s_rect(reader.at("s_part"), value["s_part"], instance, t, SRect)
        r_part = _parse_r_rect(reader.at("r_part"), value["r_part"], instance, t)
        if value["s_part"].get("type") != "s_rect" or value["r_part"].get("type") != "r_rect":
            reader.fail("'s_part' must have type s_rect and 'r_part' type r_rect")
        return SrRect(beta, s_part, r_part)
    if kind == "finite":
        reader.obj(value, required=("type", table_key), optional=("hull",))
        rk = reader.at(table_key)
        tables = [_state_blocks(rk.at(i), k, instance, t) for i, k in enumerate(rk.lst(value[table_key]))]
        if not tables:
            rk.fail("empty list")
        hull = reader.at("hull").boolean(value.get("hull", False))
        return (FiniteCostSet if cost else FiniteKernelSet)(tables, hull=hull)
    reader.obj(value, required=("type", single_key))
    table = _state_blocks(reader.at(single_key), value[single_key], instance, t)
    return (CostSingleton if cost else Singleton)(table)


def _parse_avar(reader, value, instance):
    reader.obj(value, required=("alpha", "reference_kernel"))
    alpha = reader.at("alpha").number(value["alpha"])
    if not 0.0 < alpha <= 1.0:
        reader.at("alpha").fail(f"risk level must lie in (0, 1], got {alpha}")
    ref = _stage_layers(reader.at("reference_kernel"), value["reference_kernel"], instance,
                        lambda r, v, t: _parse_kernel_stage(r, v, instance, t))
    return AvarSpec(alpha, ref)


def _parse_soc(reader, value, skeleton):
    reader.obj(value, required=("noise", "transition", "costs", "noise_ambiguity"))
    T = skeleton.horizon
    rn = reader.at("noise")
    noise = [[rn.at(t).at(i).name(x) for i, x in enumerate(rn.at(t).lst(layer))]
             for t, layer in enumerate(rn.lst(value["noise"], T))]
    transition, costs = [], []
    rt, rc = reader.at("transition"), reader.at("costs")
    rt.lst(value["transition"], T)
    rc.lst(value["costs"], T)
    for t in range(T):
        states = list(skeleton.states[t])
        nxt = list(skeleton.states[t + 1])
        t_layer, c_layer = [], []
        for s, (tr, cs) in enumerate(zip(rt.at(t).keyed(value["transition"][t], states),
                                         rc.at(t).keyed(value["costs"][t], states))):
            acts = list(skeleton.actions[t][s])
            rts, rcs = rt.at(t).at(states[s]), rc.at(t).at(states[s])
            t_acts, c_acts = [], []
            for a, (f, c) in enumerate(zip(rts.keyed(tr, acts), rcs.keyed(cs, acts))):
                rf = rts.at(acts[a])
                rf.lst(f, len(noise[t]))
                idx = []
                for i, name in enumerate(f):
                    if name not in nxt:
                        rf.at(i).fail(f"{name!r} is not a stage-{t + 2} state")
                    idx.append(nxt.index(name))
                t_acts.append(np.array(idx, dtype=int))
                arr = rcs.at(acts[a]).array(c, 1)
                if arr.size != len(noise[t]):
                    rcs.at(acts[a]).fail(f"expected {len(noise[t])} noise costs")
                c_acts.append(arr)
            t_layer.append(t_acts)
            c_layer.append(c_acts)
        transition.append(t_layer)
        costs.append(c_layer)
    rq = reader.at("noise_ambiguity")
    polys = [_parse_polytope(rq.at(t), p) for t, p in enumerate(rq.lst(value["noise_ambiguity"], T))]
    spec = SocSpec(skeleton, noise, transition, costs, polys)
    problems = spec.validate()
    if problems:
        reader.fail("; ".join(problems))
    return spec


def _parse_oracle(reader, value):
    names = [f.name for f in fields(OracleConfig)]
    reader.obj(value, optional=names)
    kw = {k: reader.at(k).integer(v) for k, v in value.items()}
    try:
        return OracleConfig(**kw)
    except ValueError as exc:
        reader.fail(str(exc))


def parse_problem(document) -> ProblemFile:
    """Build and validate a :class:`ProblemFile` from a decoded JSON document."""
    root = _Reader()
    root.obj(document, required=("mdp",), optional=SECTIONS)
    if not any(k in document for k in ("ambiguity", "cost_ambiguity", "avar", "soc")):
        root.fail("need at least one of 'ambiguity', 'cost_ambiguity', 'avar' or 'soc'")
    has_soc = "soc" in document
    instance = _parse_mdp(root.at("mdp"), document["mdp"], costs_required=not has_soc)
    _wrap(root.at("mdp"), require_valid, instance)
    out = ProblemFile(instance)
    if "ambiguity" in document:
        r = root.at("ambiguity")
        out.ambiguity = _stage_layers(r, document["ambiguity"], instance,
                                      lambda rr, v, t: _parse_stage_model(rr, v, instance, t))
        _wrap(r, require_valid_model, out.ambiguity, instance)
    if "kernel" in document:
        r = root.at("kernel")
        kernel = _stage_layers(r, document["kernel"], instance,
                               lambda rr, v, t: _parse_kernel_stage(rr, v, instance, t))
        _wrap(r, check_kernel, instance, kernel)
        out.kernel = kernel
    if "cost_ambiguity" in document:
        r = root.at("cost_ambiguity")
        if out.kernel is None:
            root.fail("'cost_ambiguity' needs a nominal 'kernel'")
        out.cost_ambiguity = _stage_layers(r, document["cost_ambiguity"], instance,
                                           lambda rr, v, t: _parse_stage_model(rr, v, instance, t, cost=True))
        _wrap(r, require_valid_cost_model, out.cost_ambiguity, instance)
    if "avar" in document:
        out.avar = _parse_avar(root.at("avar"), document["avar"], instance)
        _wrap(root.at("avar"), check_kernel, instance, out.avar.reference_kernel)
    if has_soc:
        out.soc = _parse_soc(root.at("soc"), document["soc"], instance)
    if "oracle" in document:
        out.oracle = _parse_oracle(root.at("oracle"), document["oracle"])
    return out


def _wrap(reader, fn, *args):
    try:
        return fn(*args)
    except ValidationError as exc:
        reader.fail(str(exc))


def loads(text) -> ProblemFile:
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        msg = f"line {exc.lineno}, column {exc.colno}: {exc.msg}"
        raise FileFormatError(msg, [msg]) from None
    return parse_problem(document)


def load(path) -> ProblemFile:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise FileFormatError(f"{path}: cannot read ({exc.strerror})", [str(exc)]) from None
    try:
        return loads(text)
    except FileFormatError as exc:
        raise FileFormatError(f"{path}: {exc}", exc.violations) from None


# ---------------------------------------------------------------------------
# Serialization


def _num(x):
    x = float(x)
    return int(x) if x.is_integer() and abs(x) < 2 ** 53 else x


def _list(arr):
    arr = np.asarray(arr, dtype=float)
    if arr.ndim == 0:
        return _num(arr)
    return [_list(a) for a in arr]


def _blocks(instance, t, blocks):
    return {name: {act: _list(blocks[s][a]) for a, act in enumerate(instance.actions[t][s])}
            for s, name in enumerate(instance.states[t])}


def _polytope(p: Polytope):
    if p.is_vertex_list:
        return {"vertices": _list(p.vertices)}
    A, b, E, f = p.halfspaces
    out = {}
    if A.size:
        out.update(A=_list(A), b=_list(b))
    if E.size:
        out.update(E=_list(E), f=_list(f))
    return out


def _s_rect(stage, instance, t):
    return {"type": "s_rect",
            "sets": {name: [_polytope(p) for p in stage.sets[s].pieces] for s, name in enumerate(instance.states[t])}}


def _r_rect(stage, instance, t):
    return {"type": "r_rect", "factors": [_list(W) for W in stage.factors],
            "coefficients": _blocks(instance, t, stage.coefficients)}


def _stage_model(stage, instance, t, cost=False):
    if isinstance(stage, SaRect):
        return {"type": "sa_rect", "sets": {name: {act: _polytope(stage.sets[s][a])
                                                  for a, act in enumerate(instance.actions[t][s])}
                                           for s, name in enumerate(instance.states[t])}}
    if isinstance(stage, SRect):
        return _s_rect(stage, instance, t)
    if isinstance(stage, RRect):
        return _r_rect(stage, instance, t)
    if isinstance(stage, SrRect):
        return {"type": "sr_rect", "beta": _num(stage.beta), "s_part": _s_rect(stage.s_part, instance, t),
                "r_part": _r_rect(stage.r_part, instance, t)}
    if isinstance(stage, FiniteKernelSet):
        key = "costs" if cost else "kernels"
        return {"type": "finite", "hull": stage.hull, key: [_blocks(instance, t, k) for k in stage.kernels]}
    if isinstance(stage, Singleton):
        return {"type": "singleton", ("cost" if cost else "kernel"): _blocks(instance, t, stage.kernel)}
    raise DrmdpError(f"cannot serialize stage model {type(stage).__name__}")


def to_document(problem: ProblemFile) -> dict:
    inst = problem.instance
    T = inst.horizon
    mdp = {
        "states": [list(layer) for layer in inst.states],
        "actions": [{name: list(inst.actions[t][s]) for s, name in enumerate(inst.states[t])} for t in range(T)],
        "costs": [_blocks(inst, t, inst.costs[t]) for t in range(T)],
        "terminal_cost": {name: _num(v) for name, v in zip(inst.states[-1], inst.terminal_cost)},
        "initial_state": inst.states[0][inst.initial_state],
    }
    doc = {"mdp": mdp}
    if problem.ambiguity is not None:
        doc["ambiguity"] = [_stage_model(st, inst, t) for t, st in enumerate(problem.ambiguity)]
    if problem.kernel is not None:
        doc["kernel"] = [_blocks(inst, t, k) for t, k in enumerate(problem.kernel)]
    if problem.cost_ambiguity is not None:
        doc["cost_ambiguity"] = [_stage_model(st, inst, t, cost=True) for t, st in enumerate(problem.cost_ambiguity)]
    if problem.avar is not None:
        doc["avar"] = {"alpha": _num(problem.avar.alpha),
                       "reference_kernel": [_blocks(inst, t, k) for t, k in enumerate(problem.avar.reference_kernel)]}
    if problem.soc is not None:
        soc = problem.soc
        doc["soc"] = {
            "noise": [list(n) for n in soc.noise],
            "transition": [{name: {act: [inst.states[t + 1][i] for i in soc.transition[t][s][a]]
                                   for a, act in enumerate(inst.actions[t][s])}
                            for s, name in enumerate(inst.states[t])} for t in range(T)],
            "costs": [_blocks(inst, t, soc.costs[t]) for t in range(T)],
            "noise_ambiguity": [_polytope(p) for p in soc.noise_ambiguity],
        }
    if problem.oracle is not None:
        doc["oracle"] = {f.name: getattr(problem.oracle, f.name) for f in fields(OracleConfig)}
    return doc


def dumps(problem: ProblemFile) -> str:
    """JSON text; floats use Python's shortest repr, which round-trips exactly."""
    return render_json(to_document(problem)) + "\n"


def render_json(value, indent=0):
    """Indented JSON that keeps flat lists of scalars on one line."""
    pad = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {render_json(v, indent + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + "  " * indent + "}"
    if isinstance(value, list) and any(isinstance(v, (list, dict)) for v in value):
        items = [pad + render_json(v, indent + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + "  " * indent + "]"
    return json.dumps(value)


def dump(problem: ProblemFile, path):
    Path(path).write_text(dumps(problem), encoding="utf-8")


# ---------------------------------------------------------------------------
# Structural equality


def structurally_equal(a, b):
    """Field-by-field equality of parsed objects, arrays compared exactly."""
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a_arr, b_arr = np.asarray(a), np.asarray(b)
        return a_arr.shape == b_arr.shape and np.array_equal(a_arr, b_arr)
    if type(a) is not type(b):
        if isinstance(a, (int, float)) and isinstance(b, (int, float)) and not isinstance(a, bool):
            return float(a) == float(b)
        if isinstance(a, (list, tuple)) and isinstance(b, (list, tuple)):
            return len(a) == len(b) and all(structurally_equal(x, y) for x, y in zip(a, b))
        return False
    if isinstance(a, Polytope):
        if a.is_vertex_list != b.is_vertex_list:
            return False
        return structurally_equal(a.vertices if a.is_vertex_list else a.halfspaces,
                                  b.vertices if b.is_vertex_list else b.halfspaces)
    if isinstance(a, MdpInstance):
        return a == b
    if isinstance(a, (list, tuple)):
        return len(a) == len(b) and all(structurally_equal(x, y) for x, y in zip(a, b))
    if isinstance(a, dict):
        return a.keys() == b.keys() and all(structurally_equal(a[k], b[k]) for k in a)
    if hasattr(a, "__dict__"):
        return structurally_equal(vars(a), vars(b))
    return a == b

"""Model zoo and the JSON system-file format.

A system file looks like::

    {
      "name": "toy2x2",
      "n": 2,
      "parameters": {"a": "1", "b": "2"},
      "A": [
        ["a", "0"],
        ["0", "b"]
      ],
      ...
    }

Matrix entries are strings holding rational expressions in the parameters
(``"-a"``, ``"3/5"``, ``"c1^2"``).  They are evaluated exactly with a small
AST walker; nothing is passed to ``eval``.
"""
from __future__ import annotations

import ast
import json
import operator
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import InvalidSystem
from .kalman import SystemSpec
from .polymat import ConstMatrix

__all__ = [
    "SystemFile",
    "ZOO",
    "ALIASES",
    "zoo_names",
    "zoo_file",
    "load_system",
    "parse_system",
    "emit_system",
    "evaluate_expression",
]


_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
}


def evaluate_expression(text: str, params: dict[str, Fraction] | None = None) -> Fraction:
    """Exact value of a rational expression.

    >>> evaluate_expression("-3/5 + a^2", {"a": Fraction(2)})
    Fraction(17, 5)
    """
    params = params or {}
    try:
        tree = ast.parse(str(text).strip().replace("^", "**"), mode="eval")
    except SyntaxError as exc:
        raise InvalidSystem(f"cannot parse expression {text!r}") from exc

    def ev(node) -> Fraction:
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, int) \
                and not isinstance(node.value, bool):
            return Fraction(node.value)
        if isinstance(node, ast.Constant) and isinstance(node.value, float):
            raise InvalidSystem(f"decimal literal in {text!r}; write it as p/q")
        if isinstance(node, ast.Name):
            if node.id not in params:
                raise InvalidSystem(f"unknown parameter {node.id!r} in {text!r}")
            return params[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if isinstance(node.op, ast.Pow):
                base, exp = ev(node.left), ev(node.right)
                if exp.denominator != 1 or abs(exp) > 64:
                    raise InvalidSystem(f"exponent must be a small integer in {text!r}")
                return base ** int(exp)
            op = _BINOPS.get(type(node.op))
            if op is not None:
                left, right = ev(node.left), ev(node.right)
                if op is operator.truediv and right == 0:
                    raise InvalidSystem(f"division by zero in {text!r}")
                return op(left, right)
        raise InvalidSystem(f"unsupported syntax in {text!r}")

    return ev(tree)


@dataclass
class SystemFile:
    name: str
    n: int
    A: list[list[str]]
    Ba: list[list[str]]
    Bs: list[list[str]]
    parameters: dict[str, str] = field(default_factory=dict)
    options: dict = field(default_factory=dict)
    cancellations: dict[str, str] = field(default_factory=dict)
    description: str = ""

    def parameter_values(self, overrides: dict[str, str] | None = None) -> dict[str, Fraction]:
        values: dict[str, Fraction] = {}
        raw = dict(self.parameters)
        for k, v in (overrides or {}).items():
            if k not in raw:
                raise InvalidSystem(f"unknown parameter {k!r} (known: {sorted(raw)})")
            raw[k] = v
        for k, v in raw.items():
            values[k] = evaluate_expression(v)
        return values

    def to_spec(self, overrides: dict[str, str] | None = None) -> SystemSpec:
        vals = self.parameter_values(overrides)
        mats = {}
        for key in ("A", "Ba", "Bs"):
            grid = getattr(self, key)
            if len(grid) != self.n or any(len(r) != self.n for r in grid):
                raise InvalidSystem(f"{key} must be {self.n}x{self.n}")
            rows = []
            for i, row in enumerate(grid):
                out = []
                for j, e in enumerate(row):
                    try:
                        out.append(evaluate_expression(e, vals))
                    except InvalidSystem as exc:
                        raise InvalidSystem(f"{key}[{i}][{j}]: {exc}") from None
                rows.append(out)
            mats[key] = ConstMatrix.from_rows(rows)
        return SystemSpec(mats["A"], mats["Ba"], mats["Bs"], self.name)

    def active_cancellations(self, overrides: dict[str, str] | None = None) -> list[str]:
        """Names of the cancellation equalities (``lhs = rhs``) holding at the parameters."""
        vals = self.parameter_values(overrides)
        hits = []
        for label, eq in self.cancellations.items():
            lhs, rhs = eq.split("=")
            if evaluate_expression(lhs, vals) == evaluate_expression(rhs, vals):
                hits.append(f"{eq.strip()} ({label})")
        return hits


def _row(items) -> str:
    return "[" + ", ".join(json.dumps(str(x)) for x in items) + "]"


def emit_system(sf: SystemFile) -> str:
    """Canonical text: fixed key order, one matrix row per line, trailing newline."""
    lines = ["{"]
    body = [f'  "name": {json.dumps(sf.name)}']
    if sf.description:
        body.append(f'  "description": {json.dumps(sf.description)}')
    body.append(f'  "n": {sf.n}')
    body.append(f'  "parameters": {json.dumps(sf.parameters)}')
    for key in ("A", "Ba", "Bs"):
        rows = ",\n".join("    " + _row(r) for r in getattr(sf, key))
        body.append(f'  "{key}": [\n{rows}\n  ]')
    if sf.cancellations:
        body.append(f'  "cancellations": {json.dumps(sf.cancellations)}')
    if sf.options:
        body.append(f'  "options": {json.dumps(sf.options, sort_keys=True)}')
    lines.append(",\n".join(body))
    lines.append("}")
    return "\n".join(lines) + "\n"


def parse_system(text: str) -> SystemFile:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InvalidSystem(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise InvalidSystem("system file must be a JSON object")
    missing = [k for k in ("name", "n", "A", "Ba", "Bs") if k not in data]
    if missing:
        raise InvalidSystem(f"missing keys: {', '.join(missing)}")
    n = data["n"]
    if not isinstance(n, int) or n < 1:
        raise InvalidSystem("n must be a positive integer")

    def grid(key):
        g = data[key]
        if not isinstance(g, list) or not all(isinstance(r, list) for r in g):
            raise InvalidSystem(f"{key} must be a list of rows")
        for i, r in enumerate(g):
            for j, e in enumerate(r):
                if not isinstance(e, (str, int)) or isinstance(e, bool):
                    raise InvalidSystem(f"{key}[{i}][{j}] must be a string like \"p/q\"")
        return [[str(e) for e in r] for r in g]

    return SystemFile(
        name=str(data["name"]), n=n, A=grid("A"), Ba=grid("Ba"), Bs=grid("Bs"),
        parameters={str(k): str(v) for k, v in data.get("parameters", {}).items()},
        options=dict(data.get("options", {})),
        cancellations={str(k): str(v) for k, v in data.get("cancellations", {}).items()},
        description=str(data.get("description", "")),
    )


# -- the zoo -------------------------------------------------------------------

def _g(rows: str) -> list[list[str]]:
    return [r.split() for r in rows.strip().splitlines()]


ZOO: dict[str, SystemFile] = {
    "damped-wave": SystemFile(
        "damped-wave", 2,
        _g("0 1\n1 0"), _g("0 0\n0 0"), _g("1 0\n0 0"),
        description="u_t + v_x + u = 0, v_t + u_x = 0"),
    "toy2x2": SystemFile(
        "toy2x2", 2,
        _g("a 0\n0 b"), _g("0 1\n-1 0"), _g("1 0\n0 0"),
        {"a": "1", "b": "2"}, cancellations={"equal speeds": "a = b"},
        description="diagonal transport coupled by a skew term"),
    "toy3x3": SystemFile(
        "toy3x3", 3,
        _g("0 a 0\na 0 0\n0 0 b"), _g("0 0 1\n0 0 0\n-1 0 0"), _g("1 0 0\n0 0 0\n0 0 0"),
        {"a": "1", "b": "2"}, cancellations={"equal speeds": "a^2 = b^2"}),
    "sugimoto": SystemFile(
        "sugimoto", 3,
        _g("a 0 0\n0 0 0\n0 0 0"),
        _g("0 Omega 0\n-Omega 0 omega\n0 -omega 0"),
        _g("0 0 0\n0 epsilon 0\n0 0 0"),
        {"a": "1", "Omega": "1", "omega": "1", "epsilon": "1"},
        description="linearized thermoelastic plate with rotational inertia"),
    "timoshenko": SystemFile(
        "timoshenko", 4,
        _g("0 -1 0 0\n-1 0 0 0\n0 0 0 -a\n0 0 -a 0"),
        _g("0 0 0 1\n0 0 0 0\n0 0 0 0\n-1 0 0 0"),
        _g("0 0 0 0\n0 0 0 0\n0 0 0 0\n0 0 0 b"),
        {"a": "2", "b": "1"}, cancellations={"equal wave speed": "a^2 = 1"},
        description="damped Timoshenko beam, first-order form"),
    "timoshenko-memory": SystemFile(
        "timoshenko-memory", 5,
        _g("0 0 -1 0 0\n0 0 0 -c1 c2\n-1 0 0 0 0\n0 -c1 0 0 0\n0 c2 0 0 0"),
        _g("0 1 0 0 0\n-1 0 0 0 0\n0 0 0 0 0\n0 0 0 0 0\n0 0 0 0 0"),
        _g("0 0 0 0 0\n0 0 0 0 0\n0 0 0 0 0\n0 0 0 0 0\n0 0 0 0 mu"),
        {"c1": "1", "c2": "1", "mu": "1"},
        cancellations={"equal wave speed": "c1^2 + c2^2 = 1"},
        description="Timoshenko beam with memory damping, first-order form"),
}

ALIASES = {"2x2": "toy2x2", "3x3": "toy3x3"}


def zoo_names() -> list[str]:
    return list(ZOO)


def zoo_file(name: str) -> SystemFile:
    key = ALIASES.get(name, name)
    if key not in ZOO:
        raise InvalidSystem(f"unknown zoo model {name!r}; known: {', '.join(ZOO)}")
    return ZOO[key]


def load_system(ref: str) -> SystemFile:
    """A path to a JSON system file, or ``zoo:<name>``."""
    if ref.startswith("zoo:"):
        return zoo_file(ref[4:])
    path = Path(ref)
    if not path.is_file():
        raise InvalidSystem(f"no such file: {ref}")
    return parse_system(path.read_text())

"""Problem files: a small TOML dialect describing a rational vector field.

Example::

    name = "scalar cubic"
    variables = ["y"]
    alpha = [1]
    k = "2"

    [[components]]
    terms = [["-1", [1]], ["1", [3]]]

Coefficients are strings holding exact rational expressions; they may use
named parameters from a ``[parameters]`` table. An optional ``denominator``
list next to ``terms`` turns a component into a rational function.
"""

from __future__ import annotations

import ast
import re
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import mpmath

from .errors import ProblemParseError
from .field import MultiPoly, RationalFn, RationalVectorField

_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
}


def rational_expr(text: str, params=None) -> Fraction:
    """Evaluate an arithmetic expression exactly over the rationals.

    >>> rational_expr("-(1 + s)/3", {"s": Fraction(2)})
    Fraction(-1, 1)
    """
    params = params or {}
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse coefficient {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return Fraction(str(node.value))
        if isinstance(node, ast.Name):
            if node.id not in params:
                raise ValueError(f"unknown parameter {node.id!r}")
            return params[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if type(node.op) in _BINOPS:
                return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
            if isinstance(node.op, ast.Pow):
                e = ev(node.right)
                if e.denominator != 1:
                    raise ValueError(f"non-integer power in {text!r}")
                return ev(node.left) ** int(e)
        raise ValueError(f"unsupported syntax in coefficient {text!r}")

    try:
        return ev(tree)
    except ZeroDivisionError as exc:
        raise ValueError(f"division by zero in {text!r}") from exc


_MP_FUNCS = {"sqrt": mpmath.sqrt, "exp": mpmath.exp, "log": mpmath.log}


def real_expr(text: str, params=None):
    """Evaluate an expression to an mpmath number; allows sqrt, exp, log and pi.

    Rational subexpressions stay exact until they meet an irrational function.
    """
    params = dict(params or {})
    try:
        tree = ast.parse(str(text).strip(), mode="eval")
    except SyntaxError as exc:
        raise ValueError(f"cannot parse expression {text!r}") from exc

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return mpmath.mpmathify(str(node.value))
        if isinstance(node, ast.Name):
            if node.id == "pi":
                return +mpmath.pi
            if node.id not in params:
                raise ValueError(f"unknown name {node.id!r}")
            v = params[node.id]
            return mpmath.mpf(v.numerator) / v.denominator if isinstance(v, Fraction) else v
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.UAdd, ast.USub)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp):
            if type(node.op) in _BINOPS:
                return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
            if isinstance(node.op, ast.Pow):
                return ev(node.left) ** ev(node.right)
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _MP_FUNCS and len(node.args) == 1 and not node.keywords):
            return _MP_FUNCS[node.func.id](ev(node.args[0]))
        raise ValueError(f"unsupported syntax in expression {text!r}")

    return ev(tree)


@dataclass
class ComponentSpec:
    terms: list
    denominator: list | None = None


@dataclass
class ProblemSpec:
    name: str
    variables: list
    alpha: list
    k: str
    components: list
    parameters: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    description: str = ""

    @property
    def n(self):
        return len(self.variables)

    def parameter_values(self) -> dict:
        vals = {}
        for name, expr in self.parameters.items():
            vals[name] = rational_expr(expr, vals)
        return vals

    def to_field(self) -> RationalVectorField:
        params = self.parameter_values()
        n = self.n
        comps = []
        for comp in self.components:
            num = MultiPoly.from_terms(
                ((rational_expr(c, params), e) for c, e in comp.terms), n
            )
            if comp.denominator:
                den = MultiPoly.from_terms(
                    ((rational_expr(c, params), e) for c, e in comp.denominator), n
                )
            else:
                den = None
            comps.append(RationalFn(num, den))
        return RationalVectorField(
            tuple(comps), tuple(self.alpha), rational_expr(self.k, params), tuple(self.variables)
        )


def _locate(text, needle):
    if text is None:
        return None, None
    for i, line in enumerate(text.splitlines(), start=1):
        col = line.find(needle)
        if col >= 0:
            return i, col + 1
    return None, None


def _fail(msg, text=None, needle=None):
    line, col = _locate(text, needle) if needle else (None, None)
    raise ProblemParseError(msg, line, col)


def _terms(raw, n, where, text):
    if not isinstance(raw, list) or not raw:
        _fail(f"{where} must be a nonempty list of [coefficient, exponents] pairs", text, where.split(".")[-1])
    out = []
    for t in raw:
        if not (isinstance(t, list) and len(t) == 2 and isinstance(t[1], list)):
            _fail(f"malformed term {t!r} in {where}", text, str(t[0]) if isinstance(t, list) and t else None)
        coeff, exps = t
        if not all(isinstance(e, int) and e >= 0 for e in exps) or len(exps) != n:
            _fail(f"exponent vector {exps!r} in {where} must hold {n} nonnegative integers",
                  text, str(exps).replace(" ", "")[:3])
        out.append((str(coeff), [int(e) for e in exps]))
    return out


def parse_problem(text: str) -> ProblemSpec:
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ProblemParseError(f"invalid TOML: {exc}", line, col) from None

    for key in ("variables", "alpha", "k", "components"):
        if key not in data:
            raise ProblemParseError(f"missing required key {key!r}")
    variables = data["variables"]
    if not isinstance(variables, list) or not all(isinstance(v, str) for v in variables):
        _fail("variables must be a list of names", text, "variables")
    n = len(variables)
    alpha = data["alpha"]
    if not isinstance(alpha, list) or len(alpha) != n or not all(
        isinstance(a, int) and a >= 0 for a in alpha
    ) or not any(alpha):
        _fail(f"alpha must be {n} nonnegative integers, not all zero", text, "alpha")
    comps_raw = data["components"]
    if not isinstance(comps_raw, list) or len(comps_raw) != n:
        _fail(f"expected {n} [[components]] tables", text, "[[components]]")
    comps = []
    for i, c in enumerate(comps_raw):
        terms = _terms(c.get("terms"), n, f"components[{i}].terms", text)
        den = c.get("denominator")
        den = _terms(den, n, f"components[{i}].denominator", text) if den is not None else None
        comps.append(ComponentSpec(terms, den))
    params = {str(k): str(v) for k, v in data.get("parameters", {}).items()}
    seeds = {}
    for kind, pts in data.get("seeds", {}).items():
        if kind not in ("balance", "horizon"):
            _fail(f"unknown seed table {kind!r}", text, kind)
        if not all(isinstance(p, list) and len(p) == n for p in pts):
            _fail(f"seeds.{kind} must be a list of points of length {n}", text, kind)
        seeds[kind] = [[float(x) for x in p] for p in pts]
    spec = ProblemSpec(
        name=str(data.get("name", "")),
        variables=list(variables),
        alpha=[int(a) for a in alpha],
        k=str(data["k"]),
        components=comps,
        parameters=params,
        seeds=seeds,
        tolerances={str(k): float(v) for k, v in data.get("tolerances", {}).items()},
        description=str(data.get("description", "")),
    )
    # surface expression errors now, with a location when we can find one
    try:
        vals = {}
        for name, expr in params.items():
            vals[name] = rational_expr(expr, vals)
        k = rational_expr(spec.k, vals)
        if k <= 0:
            _fail("k must be positive", text, "k =")
        for comp in comps:
            for coeff, _ in comp.terms + (comp.denominator or []):
                try:
                    rational_expr(coeff, vals)
                except ValueError as exc:
                    _fail(str(exc), text, f'"{coeff}"')
        spec.to_field()
    except ValueError as exc:
        raise ProblemParseError(str(exc)) from None
    except ZeroDivisionError:
        raise ProblemParseError("a component has a zero denominator") from None
    return spec


def load_problem(path) -> ProblemSpec:
    return parse_problem(Path(path).read_text())


def _q(s):
    return '"' + str(s).replace("\\", "\\\\").replace('"', '\\"') + '"'


def _fmt_terms(terms):
    return "[" + ", ".join(f"[{_q(c)}, [{', '.join(str(e) for e in exps)}]]" for c, exps in terms) + "]"


def serialize_problem(spec: ProblemSpec) -> str:
    """Canonical text form; parse_problem(serialize_problem(s)) reproduces s."""
    lines = []
    lines.append(f"name = {_q(spec.name)}")
    if spec.description:
        lines.append(f"description = {_q(spec.description)}")
    lines.append("variables = [" + ", ".join(_q(v) for v in spec.variables) + "]")
    lines.append("alpha = [" + ", ".join(str(a) for a in spec.alpha) + "]")
    lines.append(f"k = {_q(spec.k)}")
    if spec.parameters:
        lines.append("")
        lines.append("[parameters]")
        for name, expr in spec.parameters.items():
            lines.append(f"{name} = {_q(expr)}")
    if spec.tolerances:
        lines.append("")
        lines.append("[tolerances]")
        for name in sorted(spec.tolerances):
            lines.append(f"{name} = {spec.tolerances[name]!r}")
    if spec.seeds:
        lines.append("")
        lines.append("[seeds]")
        for kind in sorted(spec.seeds):
            pts = ", ".join("[" + ", ".join(repr(float(x)) for x in p) + "]" for p in spec.seeds[kind])
            lines.append(f"{kind} = [{pts}]")
    for comp in spec.components:
        lines.append("")
        lines.append("[[components]]")
        lines.append(f"terms = {_fmt_terms(comp.terms)}")
        if comp.denominator:
            lines.append(f"denominator = {_fmt_terms(comp.denominator)}")
    return "\n".join(lines) + "\n"


@dataclass
class ExpansionSpec:
    terms: list
    problem: str = ""
    t_max: float = 0.0
    window: tuple = (1e-6, 1e-2)


def parse_expansion(text: str, variables=None) -> ExpansionSpec:
    """Truncated series file: ``[[terms]]`` tables with component, coefficient, power."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+), column (\d+)", str(exc))
        line, col = (int(m.group(1)), int(m.group(2))) if m else (None, None)
        raise ProblemParseError(f"invalid TOML: {exc}", line, col) from None
    terms = data.get("terms")
    if not isinstance(terms, list) or not terms:
        raise ProblemParseError("expansion needs at least one [[terms]] table")
    out = []
    for t in terms:
        comp = t.get("component")
        if isinstance(comp, str):
            if not variables or comp not in variables:
                _fail(f"unknown component {comp!r}", text, comp)
            comp = list(variables).index(comp)
        if not isinstance(comp, int) or comp < 0 or (variables and comp >= len(variables)):
            _fail(f"bad component {comp!r}", text, "component")
        for key in ("coefficient", "power"):
            if key not in t:
                _fail(f"term is missing {key!r}", text, "[[terms]]")
        out.append((comp, str(t["coefficient"]), str(t["power"])))
    window = tuple(float(w) for w in data.get("window", (1e-6, 1e-2)))
    return ExpansionSpec(out, str(data.get("problem", "")), float(data.get("t_max", 0.0)), window)


def builtin_problem_dir() -> Path:
    return Path(__file__).parent / "problems"


def builtin_problem(name: str) -> ProblemSpec:
    return load_problem(builtin_problem_dir() / f"{name}.toml")

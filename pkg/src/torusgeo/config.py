"""Run configuration: INI parsing and a small whitelisted expression language.

Field-valued entries (``a``, ``f``, ``u0``, ``u1``, ``exact``) are either
arithmetic expressions in the grid coordinates or ``file:PATH`` references to
CSV dumps. Expressions admit the names ``x``, ``y``, ``t``, ``pi``, the
functions ``sin`` and ``cos``, numeric literals, ``+ - * / **`` and unary
minus; nothing else parses. Evaluation is vectorized over the grid.
"""

from __future__ import annotations

import ast
import configparser
import math
import os
from dataclasses import dataclass

import numpy as np

from .mesh import GridSpec, ScalarField, SpaceField, read_scalar_csv, read_space_csv
from .operator import ProblemSpec


class ConfigError(ValueError):
    """Malformed configuration file or expression."""


_ALLOWED_FUNCS = {"sin": np.sin, "cos": np.cos}
_ALLOWED_CONSTS = {"pi": math.pi}
_BINOPS = {
    ast.Add: lambda a, b: a + b,
    ast.Sub: lambda a, b: a - b,
    ast.Mult: lambda a, b: a * b,
    ast.Div: lambda a, b: a / b,
    ast.Pow: lambda a, b: a**b,
}


def compile_expression(text: str, variables: tuple[str, ...]):
    """Compile a whitelisted arithmetic expression to a vectorized callable.

    ``variables`` lists the coordinate names the expression may reference
    (e.g. ``("t", "x")``). The returned callable takes those names as keyword
    arguments (numpy arrays or scalars) and evaluates the expression.
    Anything outside the whitelist raises ConfigError at compile time.
    """
    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError as exc:
        raise ConfigError(f"cannot parse expression {text!r}: {exc.msg}") from None

    names = set(variables)

    def check(node: ast.AST) -> None:
        if isinstance(node, ast.Expression):
            check(node.body)
        elif isinstance(node, ast.Constant):
            if not isinstance(node.value, (int, float)):
                raise ConfigError(f"literal {node.value!r} not allowed in {text!r}")
        elif isinstance(node, ast.Name):
            if node.id not in names and node.id not in _ALLOWED_CONSTS:
                raise ConfigError(
                    f"name {node.id!r} not allowed in {text!r}; "
                    f"allowed names: {sorted(names | set(_ALLOWED_CONSTS))}"
                )
        elif isinstance(node, ast.BinOp):
            if type(node.op) not in _BINOPS:
                raise ConfigError(f"operator {type(node.op).__name__} not allowed in {text!r}")
            check(node.left)
            check(node.right)
        elif isinstance(node, ast.UnaryOp):
            if not isinstance(node.op, (ast.USub, ast.UAdd)):
                raise ConfigError(f"operator {type(node.op).__name__} not allowed in {text!r}")
            check(node.operand)
        elif isinstance(node, ast.Call):
            if not isinstance(node.func, ast.Name) or node.func.id not in _ALLOWED_FUNCS:
                raise ConfigError(f"only {sorted(_ALLOWED_FUNCS)} calls are allowed in {text!r}")
            if node.keywords or len(node.args) != 1:
                raise ConfigError(f"{node.func.id} takes exactly one positional argument in {text!r}")
            check(node.args[0])
        else:
            raise ConfigError(f"syntax {type(node).__name__} not allowed in {text!r}")

    check(tree)

    def evaluate(node: ast.AST, env: dict):
        if isinstance(node, ast.Expression):
            return evaluate(node.body, env)
        if isinstance(node, ast.Constant):
            return float(node.value)
        if isinstance(node, ast.Name):
            if node.id in env:
                return env[node.id]
            return _ALLOWED_CONSTS[node.id]
        if isinstance(node, ast.BinOp):
            return _BINOPS[type(node.op)](evaluate(node.left, env), evaluate(node.right, env))
        if isinstance(node, ast.UnaryOp):
            val = evaluate(node.operand, env)
            return -val if isinstance(node.op, ast.USub) else +val
        if isinstance(node, ast.Call):
            return _ALLOWED_FUNCS[node.func.id](evaluate(node.args[0], env))
        raise AssertionError(f"unreachable node {node!r}")

    def fn(**kwargs):
        unknown = set(kwargs) - names
        if unknown:
            raise ConfigError(f"unexpected variables {sorted(unknown)} for expression {text!r}")
        return evaluate(tree, kwargs)

    return fn


@dataclass
class ProblemConfig:
    spatial_dim: int
    nodes_per_axis: int
    time_nodes: int
    spatial_period: float
    a: str
    b: float
    f: str
    u0: str
    u1: str
    exact: str | None = None


@dataclass
class SolverConfig:
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    damping_fraction: float = 0.95
    continuation_steps: int = 10
    min_step_shrink: float = 1e-4
    refinements: int = 0


@dataclass
class SweepConfig:
    epsilons: tuple[float, ...] = ()


@dataclass
class ScanConfig:
    k: int = 1
    n: int = 3
    trials: int = 100000
    seed: int = 42
    hermitian: bool = False
    threshold: float = -1e-9
    batch_size: int = 4096
    comparison_pairs: int = 10000


@dataclass
class OutputConfig:
    directory: str = "out"


@dataclass
class RunConfig:
    problem: ProblemConfig | None = None
    solver: SolverConfig = None
    sweep: SweepConfig = None
    scan: ScanConfig = None
    output: OutputConfig = None
    base_dir: str = "."

    def __post_init__(self) -> None:
        if self.solver is None:
            self.solver = SolverConfig()
        if self.sweep is None:
            self.sweep = SweepConfig()
        if self.scan is None:
            self.scan = ScanConfig()
        if self.output is None:
            self.output = OutputConfig()


_SECTIONS = {
    "problem": {
        "spatial_dim",
        "nodes_per_axis",
        "time_nodes",
        "spatial_period",
        "a",
        "b",
        "f",
        "u0",
        "u1",
        "exact",
    },
    "solver": {
        "newton_tol",
        "max_newton_iters",
        "damping_fraction",
        "continuation_steps",
        "min_step_shrink",
        "refinements",
    },
    "sweep": {"epsilons"},
    "scan": {
        "k",
        "n",
        "trials",
        "seed",
        "hermitian",
        "threshold",
        "batch_size",
        "comparison_pairs",
    },
    "output": {"directory"},
}

_PROBLEM_REQUIRED = ("spatial_dim", "nodes_per_axis", "time_nodes", "a", "f", "u0", "u1")


def _get_typed(section, key: str, kind, where: str):
    raw = section[key]
    try:
        if kind is bool:
            low = raw.strip().lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except (TypeError, ValueError):
        raise ConfigError(
            f"key {key!r} in [{where}] must be {kind.__name__}, got {raw!r}"
        ) from None


def load_config(path) -> RunConfig:
    """Parse an INI run configuration; unknown sections or keys are errors."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path!r}: {exc}") from None

    for section in parser.sections():
        if section not in _SECTIONS:
            raise ConfigError(f"unknown section [{section}]; known: {sorted(_SECTIONS)}")
        extra = set(parser[section]) - _SECTIONS[section]
        if extra:
            raise ConfigError(
                f"unknown keys {sorted(extra)} in [{section}]; "
                f"known: {sorted(_SECTIONS[section])}"
            )

    cfg = RunConfig(base_dir=os.path.dirname(os.path.abspath(path)))

    if parser.has_section("problem"):
        sec = parser["problem"]
        missing = [key for key in _PROBLEM_REQUIRED if key not in sec]
        if missing:
            raise ConfigError(f"missing required keys {missing} in [problem]")
        cfg.problem = ProblemConfig(
            spatial_dim=_get_typed(sec, "spatial_dim", int, "problem"),
            nodes_per_axis=_get_typed(sec, "nodes_per_axis", int, "problem"),
            time_nodes=_get_typed(sec, "time_nodes", int, "problem"),
            spatial_period=(
                _get_typed(sec, "spatial_period", float, "problem")
                if "spatial_period" in sec
                else 2.0 * math.pi
            ),
            a=sec["a"].strip(),
            b=_get_typed(sec, "b", float, "problem") if "b" in sec else 0.0,
            f=sec["f"].strip(),
            u0=sec["u0"].strip(),
            u1=sec["u1"].strip(),
            exact=sec["exact"].strip() if "exact" in sec else None,
        )

    if parser.has_section("solver"):
        sec = parser["solver"]
        kw = {}
        for key, kind in (
            ("newton_tol", float),
            ("max_newton_iters", int),
            ("damping_fraction", float),
            ("continuation_steps", int),
            ("min_step_shrink", float),
            ("refinements", int),
        ):
            if key in sec:
                kw[key] = _get_typed(sec, key, kind, "solver")
        cfg.solver = SolverConfig(**kw)
        if cfg.solver.refinements < 0:
            raise ConfigError("refinements must be nonnegative")

    if parser.has_section("sweep"):
        sec = parser["sweep"]
        if "epsilons" not in sec:
            raise ConfigError("section [sweep] requires key 'epsilons'")
        parts = [p for chunk in sec["epsilons"].split(",") for p in chunk.split()]
        try:
            eps = tuple(float(p) for p in parts)
        except ValueError:
            raise ConfigError(f"epsilons must be a list of floats, got {sec['epsilons']!r}") from None
        if not eps:
            raise ConfigError("epsilons must be nonempty")
        cfg.sweep = SweepConfig(epsilons=eps)

    if parser.has_section("scan"):
        sec = parser["scan"]
        kw = {}
        for key, kind in (
            ("k", int),
            ("n", int),
            ("trials", int),
            ("seed", int),
            ("hermitian", bool),
            ("threshold", float),
            ("batch_size", int),
            ("comparison_pairs", int),
        ):
            if key in sec:
                kw[key] = _get_typed(sec, key, kind, "scan")
        cfg.scan = ScanConfig(**kw)
        if not 1 <= cfg.scan.k <= cfg.scan.n:
            raise ConfigError(f"scan requires 1 <= k <= n, got k={cfg.scan.k}, n={cfg.scan.n}")

    if parser.has_section("output"):
        cfg.output = OutputConfig(directory=parser["output"]["directory"].strip())

    return cfg


_SPACE_VARS = {1: ("x",), 2: ("x", "y")}
_FIELD_VARS = {1: ("t", "x"), 2: ("t", "x", "y")}


def _resolve(path: str, base_dir: str) -> str:
    return path if os.path.isabs(path) else os.path.join(base_dir, path)


def build_space_field(expr: str, grid: GridSpec, base_dir: str = ".") -> SpaceField:
    """Evaluate a space-only expression (or load a file reference) on a grid."""
    if expr.startswith("file:"):
        return read_space_csv(_resolve(expr[5:].strip(), base_dir), grid)
    fn = compile_expression(expr, _SPACE_VARS[grid.spatial_dim])
    env = dict(zip(_SPACE_VARS[grid.spatial_dim], grid.spatial_meshes()))
    values = np.asarray(fn(**env), dtype=float)
    return SpaceField(grid, np.broadcast_to(values, grid.spatial_shape).copy())


def build_scalar_field(expr: str, grid: GridSpec, base_dir: str = ".") -> ScalarField:
    """Evaluate a spacetime expression (or load a file reference) on a grid."""
    if expr.startswith("file:"):
        return read_scalar_csv(_resolve(expr[5:].strip(), base_dir), grid)
    fn = compile_expression(expr, _FIELD_VARS[grid.spatial_dim])
    env = dict(zip(_FIELD_VARS[grid.spatial_dim], grid.field_meshes()))
    values = np.asarray(fn(**env), dtype=float)
    return ScalarField(grid, np.broadcast_to(values, grid.field_shape).copy())


def build_grid(cfg: RunConfig, refine: int = 0) -> GridSpec:
    """Grid for the configured problem, dyadically refined ``refine`` times."""
    if cfg.problem is None:
        raise ConfigError("configuration has no [problem] section")
    prob = cfg.problem
    factor = 2**refine
    return GridSpec(
        spatial_dim=prob.spatial_dim,
        nodes_per_axis=prob.nodes_per_axis * factor,
        time_nodes=(prob.time_nodes - 1) * factor + 1,
        spatial_period=prob.spatial_period,
    )


def build_problem(cfg: RunConfig, refine: int = 0) -> ProblemSpec:
    """Instantiate the configured problem on its (possibly refined) grid.

    File-backed fields pin the grid they were written on, so they refuse
    refinement; expression fields evaluate on any grid.
    """
    if cfg.problem is None:
        raise ConfigError("configuration has no [problem] section")
    prob = cfg.problem
    grid = build_grid(cfg, refine)
    if refine > 0:
        for key, expr in (("a", prob.a), ("f", prob.f), ("u0", prob.u0), ("u1", prob.u1)):
            if expr.startswith("file:"):
                raise ConfigError(f"field {key!r} is file-backed and cannot be refined")
    return ProblemSpec(
        grid=grid,
        a=build_space_field(prob.a, grid, cfg.base_dir),
        b=prob.b,
        f=build_scalar_field(prob.f, grid, cfg.base_dir),
        u0=build_space_field(prob.u0, grid, cfg.base_dir),
        u1=build_space_field(prob.u1, grid, cfg.base_dir),
    )


def build_exact(cfg: RunConfig, refine: int = 0) -> ScalarField | None:
    """Reference solution field when the config provides one."""
    if cfg.problem is None or cfg.problem.exact is None:
        return None
    return build_scalar_field(cfg.problem.exact, build_grid(cfg, refine), cfg.base_dir)


def solve_options(cfg: RunConfig):
    """SolveOptions drawn from the [solver] section."""
    from .solver import SolveOptions

    sol = cfg.solver
    return SolveOptions(
        newton_tol=sol.newton_tol,
        max_newton_iters=sol.max_newton_iters,
        damping_fraction=sol.damping_fraction,
        continuation_steps=sol.continuation_steps,
        min_step_shrink=sol.min_step_shrink,
    )

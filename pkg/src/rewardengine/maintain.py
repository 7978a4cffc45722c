"""Maintainability analysis: missing annotations, type mismatches via shallow
local inference, unreachable code, inconsistent signatures, unused code.

Inference is deliberately shallow and flow-sensitive over SSA: literals,
casts, declared annotations, and operator result types; everything else is
unknown, and unknown never fires a finding. Lambdas and nested functions are
exempt from annotation requirements, matching common strict-checker defaults.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass

from rewardengine.frontend.cfg import Cfg
from rewardengine.frontend.ssa import (
    ASSIGN, AUG, LOOPVAR, NAMEDEXPR, PHI,
    SsaFunction, SsaModule, Version, to_ssa_module,
)
from rewardengine.frontend.syntax import ParsedModule
from rewardengine.taint import Finding, _scan_root

MISSING_ANNOTATION = "missing-annotation"
TYPE_MISMATCH = "type-mismatch"
UNREACHABLE_CODE = "unreachable-code"
SIGNATURE_INCONSISTENCY = "signature-inconsistency"
UNUSED_CODE = "unused-code"

INT, FLOAT, STR, BOOL = "int", "float", "str", "bool"
NONE, LIST, DICT, TUPLE, SET, UNKNOWN = "none", "list", "dict", "tuple", "set", "unknown"

_NUMERIC = {INT, FLOAT, BOOL}
_CASTS = {"int": INT, "float": FLOAT, "str": STR, "bool": BOOL,
          "list": LIST, "dict": DICT, "tuple": TUPLE, "set": SET}


@dataclass(frozen=True)
class Ann:
    """A declared annotation reduced to the shallow type lattice."""
    base: str
    optional: bool = False

    @property
    def known(self) -> bool:
        return self.base != UNKNOWN


UNKNOWN_ANN = Ann(UNKNOWN)


def parse_annotation(node: ast.expr | None) -> Ann:
    if node is None:
        return UNKNOWN_ANN
    if isinstance(node, ast.Constant) and node.value is None:
        return Ann(NONE)
    if isinstance(node, ast.Name):
        if node.id in _CASTS:
            return Ann(_CASTS[node.id])
        if node.id in ("List", "Dict", "Tuple", "Set"):
            return Ann(_CASTS[node.id.lower()])
        return UNKNOWN_ANN
    if isinstance(node, ast.Subscript):
        head = node.value
        if isinstance(head, ast.Name):
            if head.id == "Optional":
                inner = parse_annotation(node.slice)
                return Ann(inner.base, optional=True)
            if head.id in ("List", "list"):
                return Ann(LIST)
            if head.id in ("Dict", "dict"):
                return Ann(DICT)
            if head.id in ("Tuple", "tuple"):
                return Ann(TUPLE)
            if head.id in ("Set", "set"):
                return Ann(SET)
            if head.id == "Union":
                return _union_annotation(_subscript_args(node))
        return UNKNOWN_ANN
    if isinstance(node, ast.BinOp) and isinstance(node.op, ast.BitOr):
        return _union_annotation([node.left, node.right])
    return UNKNOWN_ANN


def _subscript_args(node: ast.Subscript) -> list[ast.expr]:
    if isinstance(node.slice, ast.Tuple):
        return list(node.slice.elts)
    return [node.slice]


def _union_annotation(parts: list[ast.expr]) -> Ann:
    anns = [parse_annotation(p) for p in parts]
    non_none = [a for a in anns if a.base != NONE]
    has_none = any(a.base == NONE for a in anns) or any(a.optional for a in anns)
    if len(non_none) == 1:
        return Ann(non_none[0].base, optional=has_none)
    return Ann(UNKNOWN, optional=has_none)


def assignable(declared: Ann, actual: str) -> bool:
    """Conservative: unknown on either side never fires."""
    if actual == UNKNOWN or not declared.known:
        return True
    if actual == NONE:
        return declared.optional or declared.base == NONE
    if actual == declared.base:
        return True
    if declared.base == FLOAT and actual in (INT, BOOL):
        return True
    if declared.base == INT and actual == BOOL:
        return True
    return False


# --- shallow type inference over SSA -----------------------------------------


def _literal_type(value: object) -> str:
    if isinstance(value, bool):
        return BOOL
    if isinstance(value, int):
        return INT
    if isinstance(value, float):
        return FLOAT
    if isinstance(value, str):
        return STR
    if value is None:
        return NONE
    return UNKNOWN


_ADD_TABLE: dict[tuple[str, str], str] = {}


def _widen(a: str, b: str) -> str:
    return FLOAT if FLOAT in (a, b) else INT


def binop_result(op: ast.operator, left: str, right: str) -> tuple[str, bool]:
    """(result type, is_mismatch). Unknown operands are silent."""
    if left == UNKNOWN or right == UNKNOWN:
        return UNKNOWN, False
    if isinstance(op, ast.Add):
        if left in _NUMERIC and right in _NUMERIC:
            return _widen(left, right), False
        if left == right and left in (STR, LIST, TUPLE):
            return left, False
        return UNKNOWN, True
    if isinstance(op, ast.Mult):
        if left in _NUMERIC and right in _NUMERIC:
            return _widen(left, right), False
        if (left in (STR, LIST, TUPLE) and right in (INT, BOOL)):
            return left, False
        if (right in (STR, LIST, TUPLE) and left in (INT, BOOL)):
            return right, False
        return UNKNOWN, True
    if isinstance(op, ast.Mod):
        if left == STR:  # percent formatting
            return STR, False
        if left in _NUMERIC and right in _NUMERIC:
            return _widen(left, right), False
        return UNKNOWN, True
    if isinstance(op, ast.Div):
        if left in _NUMERIC and right in _NUMERIC:
            return FLOAT, False
        return UNKNOWN, True
    if isinstance(op, (ast.Sub, ast.FloorDiv, ast.Pow)):
        if left in _NUMERIC and right in _NUMERIC:
            return _widen(left, right), False
        return UNKNOWN, True
    return UNKNOWN, False  # bit ops etc: stay silent


@dataclass
class FunctionSig:
    name: str
    node: ast.AST
    params: list[tuple[str, Ann]]
    returns: Ann
    has_return_annotation: bool


def collect_signatures(tree: ast.Module) -> dict[str, FunctionSig]:
    """Unqualified name -> signature of every function (last definition wins)."""
    sigs: dict[str, FunctionSig] = {}
    for node in ast.walk(tree):
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            params = [(a.arg, parse_annotation(a.annotation))
                      for a in [*node.args.posonlyargs, *node.args.args]]
            sigs[node.name] = FunctionSig(
                name=node.name,
                node=node,
                params=params,
                returns=parse_annotation(node.returns),
                has_return_annotation=node.returns is not None,
            )
    return sigs


class TypeEnv:
    """Per-version inferred types for one SSA function."""

    def __init__(self, ssa: SsaFunction, sigs: dict[str, FunctionSig]):
        self.ssa = ssa
        self.sigs = sigs
        self.types: dict[Version, str] = {v: UNKNOWN for v in ssa.defs}
        self._infer()

    def _infer(self) -> None:
        # declared parameter annotations seed the environment
        fn = self.ssa.cfg.func
        if isinstance(fn, (ast.FunctionDef, ast.AsyncFunctionDef)):
            for a in [*fn.args.posonlyargs, *fn.args.args, *fn.args.kwonlyargs]:
                ann = parse_annotation(a.annotation)
                v = Version(a.arg, 1)
                if v in self.types and ann.known and not ann.optional:
                    self.types[v] = ann.base
        for _ in range(len(self.types) + 2):
            changed = False
            for v, d in self.ssa.defs.items():
                new = self._def_type(d)
                if new != self.types[v] and self.types[v] == UNKNOWN:
                    self.types[v] = new
                    changed = True
            if not changed:
                break

    def _def_type(self, d) -> str:
        if d.kind == PHI:
            phi = next(p for phis in self.ssa.phis.values() for p in phis
                       if p.target == d.version)
            parts = {self.types[a] for a in phi.args.values()}
            if len(parts) == 1:
                return parts.pop()
            return UNKNOWN
        if d.kind == ASSIGN and d.value is not None:
            declared = None
            if isinstance(d.stmt, ast.AnnAssign):
                ann = parse_annotation(d.stmt.annotation)
                if ann.known and not ann.optional:
                    declared = ann.base
            inferred = self.expr_type(d.value)
            return declared or inferred
        if d.kind in (NAMEDEXPR,) and d.value is not None:
            return self.expr_type(d.value)
        return self.types.get(d.version, UNKNOWN)

    def expr_type(self, expr: ast.expr) -> str:
        if isinstance(expr, ast.Constant):
            return _literal_type(expr.value)
        if isinstance(expr, ast.Name):
            v = self.ssa.use_map.get(id(expr))
            return self.types.get(v, UNKNOWN) if v is not None else UNKNOWN
        if isinstance(expr, ast.JoinedStr):
            return STR
        if isinstance(expr, ast.BinOp):
            result, _ = binop_result(expr.op, self.expr_type(expr.left),
                                     self.expr_type(expr.right))
            return result
        if isinstance(expr, ast.UnaryOp):
            if isinstance(expr.op, ast.Not):
                return BOOL
            return self.expr_type(expr.operand)
        if isinstance(expr, ast.Compare):
            return BOOL
        if isinstance(expr, ast.BoolOp):
            return UNKNOWN
        if isinstance(expr, ast.List):
            return LIST
        if isinstance(expr, ast.Dict):
            return DICT
        if isinstance(expr, ast.Tuple):
            return TUPLE
        if isinstance(expr, ast.Set):
            return SET
        if isinstance(expr, ast.ListComp):
            return LIST
        if isinstance(expr, ast.DictComp):
            return DICT
        if isinstance(expr, ast.SetComp):
            return SET
        if isinstance(expr, ast.IfExp):
            a, b = self.expr_type(expr.body), self.expr_type(expr.orelse)
            return a if a == b else UNKNOWN
        if isinstance(expr, ast.Call):
            return self._call_type(expr)
        return UNKNOWN

    def _call_type(self, call: ast.Call) -> str:
        if isinstance(call.func, ast.Name):
            name = call.func.id
            if name in _CASTS:
                return _CASTS[name]
            if name == "len":
                return INT
            if name == "repr":
                return STR
            if name == "input":
                return STR
            sig = self.sigs.get(name)
            if sig is not None and sig.returns.known and not sig.returns.optional:
                return sig.returns.base
        return UNKNOWN


# --- checks -------------------------------------------------------------------


def _top_level_functions(tree: ast.Module):
    """Functions requiring annotations: module-level defs and class methods,
    but not functions nested inside other functions."""
    def walk(body, inside_class):
        for stmt in body:
            if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
                yield stmt, inside_class
            elif isinstance(stmt, ast.ClassDef):
                yield from walk(stmt.body, True)

    yield from walk(tree.body, False)


def check_annotations(tree: ast.Module) -> list[Finding]:
    """One finding per unannotated parameter and per missing return
    annotation; self/cls receivers exempt."""
    findings = []
    for fn, is_method in _top_level_functions(tree):
        args = [*fn.args.posonlyargs, *fn.args.args]
        for i, a in enumerate(args):
            if is_method and i == 0 and a.arg in ("self", "cls"):
                continue
            if a.annotation is None:
                findings.append(Finding(
                    kind=MISSING_ANNOTATION,
                    message=f"parameter {a.arg!r} of {fn.name!r} lacks a type annotation",
                    line=a.lineno, col=a.col_offset))
        for a in [*fn.args.kwonlyargs]:
            if a.annotation is None:
                findings.append(Finding(
                    kind=MISSING_ANNOTATION,
                    message=f"parameter {a.arg!r} of {fn.name!r} lacks a type annotation",
                    line=a.lineno, col=a.col_offset))
        if fn.returns is None:
            findings.append(Finding(
                kind=MISSING_ANNOTATION,
                message=f"function {fn.name!r} lacks a return type annotation",
                line=fn.lineno, col=fn.col_offset))
    findings.sort(key=Finding.sort_key)
    return findings


def check_types(ssa: SsaFunction, env: TypeEnv) -> list[Finding]:
    """Mismatches where operand types are known and incompatible; unknown
    types never fire."""
    findings = []
    seen: set[int] = set()
    for bid in sorted(ssa.cfg.blocks):
        block = ssa.cfg.blocks[bid]
        if not block.reachable:
            continue
        for stmt in block.statements:
            root = _scan_root(stmt)
            for node in ast.walk(root):
                if id(node) in seen:
                    continue
                seen.add(id(node))
                if isinstance(node, ast.BinOp):
                    left, right = env.expr_type(node.left), env.expr_type(node.right)
                    _result, mismatch = binop_result(node.op, left, right)
                    if mismatch:
                        findings.append(Finding(
                            kind=TYPE_MISMATCH,
                            message=f"unsupported operand types: {left} and {right}",
                            line=node.lineno, col=node.col_offset))
                elif isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
                    sig = env.sigs.get(node.func.id)
                    if sig is None:
                        continue
                    for i, arg in enumerate(node.args):
                        if i >= len(sig.params) or isinstance(arg, ast.Starred):
                            continue
                        pname, ann = sig.params[i]
                        actual = env.expr_type(arg)
                        if ann.known and not assignable(ann, actual):
                            findings.append(Finding(
                                kind=TYPE_MISMATCH,
                                message=f"argument {i + 1} to {sig.name!r} has type "
                                        f"{actual}, expected {ann.base}",
                                line=arg.lineno, col=arg.col_offset))
            if isinstance(stmt, ast.AnnAssign) and stmt.value is not None:
                ann = parse_annotation(stmt.annotation)
                actual = env.expr_type(stmt.value)
                if ann.known and not assignable(ann, actual):
                    findings.append(Finding(
                        kind=TYPE_MISMATCH,
                        message=f"assignment of {actual} to variable declared {ann.base}",
                        line=stmt.lineno, col=stmt.col_offset))
    findings.sort(key=Finding.sort_key)
    return findings


def check_unreachable(cfg: Cfg) -> list[Finding]:
    """One finding per maximal unreachable region, at its first statement."""
    unreachable = {b.block_id for b in cfg.blocks.values()
                   if not b.reachable and b.statements}
    findings = []
    for bid in sorted(unreachable):
        # region head: no unreachable predecessor also carrying statements
        if any(e.src in unreachable for e in cfg.predecessors(bid)):
            continue
        first = cfg.blocks[bid].statements[0]
        findings.append(Finding(
            kind=UNREACHABLE_CODE,
            message="statement is unreachable",
            line=getattr(first, "lineno", 0), col=getattr(first, "col_offset", 0)))
    findings.sort(key=Finding.sort_key)
    return findings


def _falls_off_end(cfg: Cfg) -> bool:
    for e in cfg.predecessors(cfg.exit):
        if not cfg.blocks[e.src].reachable:
            continue
        stmts = cfg.blocks[e.src].statements
        last = stmts[-1] if stmts else None
        if not isinstance(last, (ast.Return, ast.Raise)):
            return True
        if isinstance(last, ast.Return) and last.value is None:
            return True
    return False


def check_signatures(tree: ast.Module,
                     cfgs_by_func: dict[int, Cfg],
                     envs_by_func: dict[int, TypeEnv]) -> list[Finding]:
    """Return statements disagreeing with the declared return annotation, and
    implicit-none paths under a non-optional annotation."""
    findings = []
    for node in ast.walk(tree):
        if not isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            continue
        if node.returns is None:
            continue
        declared = parse_annotation(node.returns)
        if not declared.known:
            continue
        env = envs_by_func.get(id(node))
        cfg = cfgs_by_func.get(id(node))
        for inner in ast.walk(node):
            if isinstance(inner, ast.Return) and inner.value is not None:
                if _owner_function(tree, inner) is not node:
                    continue
                actual = env.expr_type(inner.value) if env else UNKNOWN
                if not assignable(declared, actual):
                    findings.append(Finding(
                        kind=SIGNATURE_INCONSISTENCY,
                        message=f"{node.name!r} declared to return {declared.base} "
                                f"but returns {actual}",
                        line=inner.lineno, col=inner.col_offset))
        if declared.base != NONE and not declared.optional and cfg is not None:
            if _falls_off_end(cfg):
                findings.append(Finding(
                    kind=SIGNATURE_INCONSISTENCY,
                    message=f"{node.name!r} declared to return {declared.base} "
                            f"but a path returns no value",
                    line=node.lineno, col=node.col_offset))
    findings.sort(key=Finding.sort_key)
    return findings


def _owner_function(tree: ast.Module, target: ast.Return):
    """The innermost function containing `target`."""
    owner = None

    def visit(node, current):
        nonlocal owner
        for child in ast.iter_child_nodes(node):
            if child is target:
                owner = current
                return
            nxt = child if isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef)) else current
            visit(child, nxt)

    visit(tree, None)
    return owner


def _loads_in(node: ast.AST) -> set[str]:
    return {n.id for n in ast.walk(node)
            if isinstance(n, ast.Name) and isinstance(n.ctx, ast.Load)}


def check_unused(module: SsaModule, tree: ast.Module) -> list[Finding]:
    """Unused local variables (last version defined, never read) and unused
    imports. Names starting with underscore are exempt."""
    findings = []
    for name, fn in sorted(module.functions.items()):
        if fn.cfg.func is None:
            continue
        loads = _loads_in(fn.cfg.func)
        last: dict[str, Version] = {}
        for v in fn.defs:
            if v.index > last.get(v.name, Version(v.name, -1)).index:
                last[v.name] = v
        for var, v in sorted(last.items()):
            d = fn.defs[v]
            if d.kind not in (ASSIGN, AUG, NAMEDEXPR, LOOPVAR):
                continue
            if var.startswith("_") or var in loads or var in fn.params:
                continue
            findings.append(Finding(
                kind=UNUSED_CODE,
                message=f"local variable {var!r} is assigned but never used",
                line=d.span[0], col=d.span[1]))
    module_loads = _loads_in(tree)
    attr_roots = {n.attr for n in ast.walk(tree) if isinstance(n, ast.Attribute)}
    for stmt in ast.walk(tree):
        if isinstance(stmt, (ast.Import, ast.ImportFrom)):
            for alias in stmt.names:
                if alias.name == "*":
                    continue
                bound = alias.asname or alias.name.split(".")[0]
                if bound.startswith("_") or bound in module_loads or bound in attr_roots:
                    continue
                findings.append(Finding(
                    kind=UNUSED_CODE,
                    message=f"import {bound!r} is never used",
                    line=stmt.lineno, col=stmt.col_offset))
    findings.sort(key=Finding.sort_key)
    return findings


# --- verdict ------------------------------------------------------------------


@dataclass(frozen=True)
class MaintainabilityReport:
    findings: tuple[Finding, ...]

    @property
    def clean(self) -> bool:
        return not self.findings


def maintainability_verdict(parsed: ParsedModule) -> MaintainabilityReport:
    """All five check families, deterministically ordered."""
    tree = parsed.tree
    module = to_ssa_module(tree)
    sigs = collect_signatures(tree)

    envs_by_func: dict[int, TypeEnv] = {}
    cfgs_by_func: dict[int, Cfg] = {}
    all_findings: list[Finding] = []

    module_env = TypeEnv(module.module, sigs)
    all_findings.extend(check_types(module.module, module_env))
    for name, fn in sorted(module.functions.items()):
        env = TypeEnv(fn, sigs)
        if fn.cfg.func is not None:
            envs_by_func[id(fn.cfg.func)] = env
            cfgs_by_func[id(fn.cfg.func)] = fn.cfg
        all_findings.extend(check_types(fn, env))

    all_findings.extend(check_annotations(tree))
    for cfg in [module.module.cfg, *(fn.cfg for fn in module.functions.values())]:
        all_findings.extend(check_unreachable(cfg))
    all_findings.extend(check_signatures(tree, cfgs_by_func, envs_by_func))
    all_findings.extend(check_unused(module, tree))
    all_findings.sort(key=Finding.sort_key)
    return MaintainabilityReport(findings=tuple(all_findings))

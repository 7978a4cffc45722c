"""Flow-sensitive, context-insensitive taint analysis over SSA.

The lattice is binary per variable version: untainted < tainted, join = or.
Transfer functions: results of source calls are tainted; any expression with
a tainted operand is tainted (string formatting, concatenation, and
interpolation included); sanitizer calls clear taint; opaque constructs
propagate taint conservatively; phi-nodes join. Sink calls whose dangerous
argument is tainted yield findings, unless the call matches a structural
safe-sink exemption (e.g. parameterized query execution).

Functions are summarized once (params-to-return flow), never re-analyzed per
call site; recursive functions get the conservative summary.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

from rewardengine.frontend.ssa import (
    AUG, EXTERNAL, FIELDSTORE, OPAQUE, PARAM, PHI,
    Definition, SsaFunction, SsaModule, Version,
)

SEVERITY_VULNERABILITY = "vulnerability"


class TaintEngineError(RuntimeError):
    pass


# --- rule packs ---------------------------------------------------------------


@dataclass(frozen=True)
class CallPattern:
    """Dotted suffix matched case-sensitively against a call's name chain:
    pattern "execute" matches cur.execute(...), "sys.stdin.read" matches
    sys.stdin.read()."""

    pattern: str

    def parts(self) -> tuple[str, ...]:
        return tuple(self.pattern.split("."))


@dataclass(frozen=True)
class SinkPattern:
    pattern: str
    args: tuple[int, ...]  # dangerous positional argument indices

    def parts(self) -> tuple[str, ...]:
        return tuple(self.pattern.split("."))


@dataclass(frozen=True)
class SafeSinkForm:
    """Parameterized-execution exemption: the query argument must be an
    untainted literal (or concatenation of literals) containing at least one
    placeholder token, with parameters bound via a separate argument."""

    kind: str
    sink_pattern: str
    query_arg: int = 0
    params_arg: int = 1
    placeholders: tuple[str, ...] = ("?",)


@dataclass(frozen=True)
class StructuralRule:
    """Non-dataflow detector shape (CSRF): a state-changing handler
    registration without a token-check pattern in the handler body."""

    handler_decorators: tuple[str, ...]
    state_methods: tuple[str, ...]
    token_checks: tuple[str, ...]


@dataclass(frozen=True)
class RulePack:
    cwe: int
    name: str
    sources: tuple[CallPattern, ...] = ()
    sinks: tuple[SinkPattern, ...] = ()
    sanitizers: tuple[CallPattern, ...] = ()
    safe_sink_forms: tuple[SafeSinkForm, ...] = ()
    structural: StructuralRule | None = None

    def __post_init__(self):
        if self.cwe <= 0:
            raise ValueError("rule pack needs a positive CWE id")
        if not self.sinks and self.structural is None:
            raise ValueError(f"rule pack CWE-{self.cwe} can never fire: no sinks")


# --- findings -----------------------------------------------------------------


@dataclass(frozen=True)
class FlowHop:
    line: int
    col: int
    text: str


@dataclass(frozen=True)
class Finding:
    kind: str               # "vulnerability" or a maintainability category
    message: str
    line: int
    col: int
    cwe: int | None = None
    path: tuple[FlowHop, ...] = ()

    def sort_key(self):
        return (self.line, self.col, self.cwe or 0, self.kind, self.message)

    def to_record(self) -> dict:
        record = {
            "kind": self.kind,
            "cwe_id": f"CWE-{self.cwe}" if self.cwe else None,
            "message": self.message,
            "path": [{"line": h.line, "col": h.col, "text": h.text} for h in self.path],
        }
        return record


@dataclass(frozen=True)
class FunctionSummary:
    name: str
    params_to_return: bool
    has_internal_flow: bool


# --- call-name matching -------------------------------------------------------


def call_name_chain(func: ast.expr) -> tuple[str, ...]:
    parts: list[str] = []
    node = func
    while isinstance(node, ast.Attribute):
        parts.append(node.attr)
        node = node.value
    if isinstance(node, ast.Name):
        parts.append(node.id)
    elif isinstance(node, ast.Call):
        parts.append("()")
    return tuple(reversed(parts))


def chain_matches(pattern_parts: tuple[str, ...], chain: tuple[str, ...]) -> bool:
    if not pattern_parts or len(pattern_parts) > len(chain):
        return False
    return chain[-len(pattern_parts):] == pattern_parts


def _match_any(patterns, func: ast.expr) -> bool:
    chain = call_name_chain(func)
    return any(chain_matches(p.parts(), chain) for p in patterns)


def _matching_sinks(rules: RulePack, func: ast.expr) -> list[SinkPattern]:
    chain = call_name_chain(func)
    return [s for s in rules.sinks if chain_matches(s.parts(), chain)]


# --- taint propagation --------------------------------------------------------


class _TaintSolver:
    def __init__(self, ssa: SsaFunction, rules: RulePack,
                 summaries: dict[str, FunctionSummary] | None = None,
                 taint_params: bool = False):
        self.ssa = ssa
        self.rules = rules
        self.summaries = summaries or {}
        self.taint_params = taint_params
        self.taint: dict[Version, bool] = {v: False for v in ssa.defs}

    def solve(self) -> dict[Version, bool]:
        versions = list(self.ssa.defs)
        bound = len(versions) + 2  # binary lattice: |versions| x height + slack
        for _ in range(bound):
            changed = False
            for v in versions:
                new = self._transfer(self.ssa.defs[v])
                if new and not self.taint[v]:
                    self.taint[v] = True
                    changed = True
            if not changed:
                return self.taint
        raise TaintEngineError(
            f"taint fixpoint failed to converge within {bound} passes")

    def _transfer(self, d: Definition) -> bool:
        if d.kind == EXTERNAL:
            return False
        if d.kind == PARAM:
            return self.taint_params
        if d.kind == PHI:
            phi = next(p for phis in self.ssa.phis.values() for p in phis
                       if p.target == d.version)
            return any(self.taint[v] for v in phi.args.values())
        if d.kind in (AUG, FIELDSTORE):
            prev = self.taint[d.prev] if d.prev is not None else False
            return prev or (d.value is not None and self.expr_taint(d.value))
        if d.kind == OPAQUE:
            return d.stmt is not None and self._opaque_taint(d.stmt)
        if d.value is not None:
            return self.expr_taint(d.value)
        return False

    def _opaque_taint(self, stmt: ast.AST) -> bool:
        for child in ast.walk(stmt):
            if isinstance(child, ast.Call) and _match_any(self.rules.sources, child.func):
                return True
            if isinstance(child, ast.Name) and isinstance(child.ctx, ast.Load):
                v = self.ssa.use_map.get(id(child))
                if v is not None and self.taint[v]:
                    return True
        return False

    def expr_taint(self, expr: ast.expr) -> bool:
        """Taint of an expression under the current (or final) variable map."""
        if isinstance(expr, ast.Constant):
            return False
        if isinstance(expr, ast.Name):
            v = self.ssa.use_map.get(id(expr))
            return bool(v is not None and self.taint[v])
        if isinstance(expr, ast.Call):
            return self._call_taint(expr)
        if isinstance(expr, ast.Attribute):
            return self.expr_taint(expr.value)
        if isinstance(expr, ast.Subscript):
            return self.expr_taint(expr.value) or self.expr_taint(expr.slice)
        if isinstance(expr, ast.BinOp):
            return self.expr_taint(expr.left) or self.expr_taint(expr.right)
        if isinstance(expr, ast.UnaryOp):
            return self.expr_taint(expr.operand)
        if isinstance(expr, ast.BoolOp):
            return any(self.expr_taint(v) for v in expr.values)
        if isinstance(expr, ast.Compare):
            return self.expr_taint(expr.left) or any(self.expr_taint(c) for c in expr.comparators)
        if isinstance(expr, ast.JoinedStr):
            return any(self.expr_taint(v) for v in expr.values)
        if isinstance(expr, ast.FormattedValue):
            return self.expr_taint(expr.value)
        if isinstance(expr, ast.IfExp):
            return self.expr_taint(expr.body) or self.expr_taint(expr.orelse)
        if isinstance(expr, (ast.Tuple, ast.List, ast.Set)):
            return any(self.expr_taint(e) for e in expr.elts)
        if isinstance(expr, ast.Dict):
            return any(self.expr_taint(v) for v in expr.values) or any(
                self.expr_taint(k) for k in expr.keys if k is not None)
        if isinstance(expr, ast.Starred):
            return self.expr_taint(expr.value)
        if isinstance(expr, ast.NamedExpr):
            return self.expr_taint(expr.value)
        if isinstance(expr, ast.Lambda):
            return False
        if isinstance(expr, (ast.Await, ast.Yield, ast.YieldFrom)):
            return expr.value is not None and self.expr_taint(expr.value)
        if isinstance(expr, ast.Slice):
            return any(self.expr_taint(p) for p in (expr.lower, expr.upper, expr.step)
                       if p is not None)
        # unknown expression shape: conservative join over everything inside
        return self._opaque_taint(expr)

    def _call_taint(self, call: ast.Call) -> bool:
        if _match_any(self.rules.sanitizers, call.func):
            return False
        if _match_any(self.rules.sources, call.func):
            return True
        args_tainted = any(self.expr_taint(a) for a in call.args) or any(
            self.expr_taint(kw.value) for kw in call.keywords)
        chain = call_name_chain(call.func)
        if len(chain) == 1 and chain[0] in self.summaries:
            summary = self.summaries[chain[0]]
            base_tainted = False
            callee_flow = summary.params_to_return and args_tainted
        else:
            # unknown callee: conservative — tainted args flow through
            base_tainted = isinstance(call.func, ast.Attribute) and self.expr_taint(call.func.value)
            callee_flow = args_tainted
        return callee_flow or base_tainted


def propagate(ssa: SsaFunction, rules: RulePack,
              summaries: dict[str, FunctionSummary] | None = None,
              taint_params: bool = False) -> dict[Version, bool]:
    """Least-fixpoint taint map for every variable version."""
    return _TaintSolver(ssa, rules, summaries, taint_params).solve()


# --- literal resolution (parameterized-query exemption) -----------------------


def _literal_string(ssa: SsaFunction, expr: ast.expr, depth: int = 0) -> str | None:
    """Resolve an expression to a compile-time string: literals, literal
    concatenation, or a variable whose single (non-phi) definition is one."""
    if depth > 16:
        return None
    if isinstance(expr, ast.Constant) and isinstance(expr.value, str):
        return expr.value
    if isinstance(expr, ast.BinOp) and isinstance(expr.op, ast.Add):
        left = _literal_string(ssa, expr.left, depth + 1)
        right = _literal_string(ssa, expr.right, depth + 1)
        if left is not None and right is not None:
            return left + right
        return None
    if isinstance(expr, ast.JoinedStr):
        if any(isinstance(v, ast.FormattedValue) for v in expr.values):
            return None
        return "".join(v.value for v in expr.values
                       if isinstance(v, ast.Constant) and isinstance(v.value, str))
    if isinstance(expr, ast.Name):
        v = ssa.use_map.get(id(expr))
        if v is None:
            return None
        d = ssa.defs.get(v)
        if d is not None and d.kind not in (PHI, AUG, FIELDSTORE) and d.value is not None:
            return _literal_string(ssa, d.value, depth + 1)
    return None


def _safe_form_match(ssa: SsaFunction, rules: RulePack, call: ast.Call,
                     taint: dict[Version, bool], arg_index: int) -> bool:
    solver = _TaintSolver(ssa, rules)
    solver.taint = taint
    chain = call_name_chain(call.func)
    for form in rules.safe_sink_forms:
        if form.kind != "parameterized_call":
            continue
        if not chain_matches(tuple(form.sink_pattern.split(".")), chain):
            continue
        if len(call.args) <= form.params_arg or len(call.args) <= form.query_arg:
            continue
        if arg_index != form.params_arg:
            continue
        query = call.args[form.query_arg]
        if solver.expr_taint(query):
            continue
        text = _literal_string(ssa, query)
        if text is None:
            continue
        if any(tok in text for tok in form.placeholders):
            return True
    return False


# --- flow reconstruction ------------------------------------------------------


def _expr_span(expr: ast.AST) -> tuple[int, int]:
    return (getattr(expr, "lineno", 0), getattr(expr, "col_offset", 0))


def _short(node: ast.AST) -> str:
    try:
        return ast.unparse(node).split("\n")[0][:80]
    except Exception:
        return type(node).__name__


class _PathBuilder:
    def __init__(self, ssa: SsaFunction, rules: RulePack,
                 solver: _TaintSolver):
        self.ssa = ssa
        self.rules = rules
        self.solver = solver

    def source_call_in(self, expr: ast.AST) -> ast.Call | None:
        for child in ast.walk(expr):
            if isinstance(child, ast.Call) and _match_any(self.rules.sources, child.func):
                return child
        return None

    def tainted_version_in(self, expr: ast.AST) -> Version | None:
        for child in ast.walk(expr):
            if isinstance(child, ast.Name):
                v = self.ssa.use_map.get(id(child))
                if v is not None and self.solver.taint.get(v):
                    return v
        return None

    def hops_for_version(self, version: Version, visited: set[Version]) -> list[FlowHop]:
        if version in visited:
            return []
        visited.add(version)
        d = self.ssa.defs[version]
        if d.kind == PHI:
            phi = next(p for phis in self.ssa.phis.values() for p in phis
                       if p.target == version)
            for arg in phi.args.values():
                if self.solver.taint.get(arg):
                    return self.hops_for_version(arg, visited)
            return []
        if d.kind == PARAM:
            return [FlowHop(*_span_of(d), f"tainted parameter {version.name}")]
        here = FlowHop(*_span_of(d), f"{version.name} <- {_short(d.value) if d.value is not None else d.kind}")
        if d.value is not None:
            src = self.source_call_in(d.value)
            if src is not None and self.solver.expr_taint(src):
                return [FlowHop(*_expr_span(src), f"source {_short(src)}"), here]
        for operand in self._tainted_operands(d):
            return self.hops_for_version(operand, visited) + [here]
        return [here]

    def _tainted_operands(self, d: Definition) -> list[Version]:
        out = []
        if d.prev is not None and self.solver.taint.get(d.prev):
            out.append(d.prev)
        scan_root = d.value if d.value is not None else d.stmt
        if scan_root is not None:
            for child in ast.walk(scan_root):
                if isinstance(child, ast.Name):
                    v = self.ssa.use_map.get(id(child))
                    if v is not None and self.solver.taint.get(v):
                        out.append(v)
        return out

    def build(self, arg: ast.expr, sink_call: ast.Call) -> tuple[FlowHop, ...]:
        hops: list[FlowHop] = []
        direct = self.source_call_in(arg)
        if direct is not None and self.solver.expr_taint(direct):
            hops.append(FlowHop(*_expr_span(direct), f"source {_short(direct)}"))
        else:
            v = self.tainted_version_in(arg)
            if v is not None:
                hops.extend(self.hops_for_version(v, set()))
        hops.append(FlowHop(*_expr_span(sink_call),
                            f"sink {_short(sink_call.func)}({_short(arg)})"))
        return tuple(hops)


def _span_of(d: Definition) -> tuple[int, int]:
    if d.span != (0, 0):
        return d.span
    if d.stmt is not None:
        return _expr_span(d.stmt)
    return (0, 0)


# --- finding extraction -------------------------------------------------------


def _iter_call_sites(ssa: SsaFunction):
    """All Call nodes in reachable blocks, with their enclosing statement."""
    seen: set[int] = set()
    for bid in sorted(ssa.cfg.blocks):
        block = ssa.cfg.blocks[bid]
        if not block.reachable:
            continue
        for stmt in block.statements:
            for child in ast.walk(_scan_root(stmt)):
                if isinstance(child, ast.Call) and id(child) not in seen:
                    seen.add(id(child))
                    yield stmt, child


def _scan_root(stmt: ast.AST) -> ast.AST:
    """Only the expressions owned by this block-level statement: compound
    bodies live in their own blocks (or their own Cfg, for functions)."""
    def bundle(exprs):
        return ast.Tuple(elts=[e for e in exprs if e is not None], ctx=ast.Load())

    if isinstance(stmt, (ast.If, ast.While)):
        return stmt.test
    if isinstance(stmt, (ast.For, ast.AsyncFor)):
        return bundle([stmt.iter])
    if isinstance(stmt, ast.Try):
        return bundle([])
    if isinstance(stmt, ast.ExceptHandler):
        return bundle([stmt.type])
    if isinstance(stmt, (ast.With, ast.AsyncWith)):
        return bundle([item.context_expr for item in stmt.items])
    if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
        return bundle([*stmt.decorator_list, *stmt.args.defaults,
                       *stmt.args.kw_defaults])
    if isinstance(stmt, ast.ClassDef):
        return bundle([*stmt.decorator_list, *stmt.bases,
                       *[kw.value for kw in stmt.keywords]])
    return stmt


def find_flows(ssa: SsaFunction, rules: RulePack,
               taint: dict[Version, bool],
               summaries: dict[str, FunctionSummary] | None = None) -> list[Finding]:
    """One Finding per (sink call, dangerous argument position) whose argument
    is tainted and not covered by a safe-sink exemption."""
    solver = _TaintSolver(ssa, rules, summaries)
    solver.taint = taint
    paths = _PathBuilder(ssa, rules, solver)
    findings: list[Finding] = []
    for _stmt, call in _iter_call_sites(ssa):
        sinks = _matching_sinks(rules, call.func)
        if not sinks:
            continue
        dangerous = sorted({i for s in sinks for i in s.args})
        for i in dangerous:
            if i >= len(call.args):
                continue
            arg = call.args[i]
            if not solver.expr_taint(arg):
                continue
            if _safe_form_match(ssa, rules, call, taint, i):
                continue
            chain = ".".join(call_name_chain(call.func))
            findings.append(Finding(
                kind=SEVERITY_VULNERABILITY,
                cwe=rules.cwe,
                message=f"CWE-{rules.cwe} ({rules.name}): tainted data reaches "
                        f"{chain}() argument {i}",
                line=call.lineno,
                col=call.col_offset,
                path=paths.build(arg, call),
            ))
    findings.sort(key=Finding.sort_key)
    return findings


# --- function summaries -------------------------------------------------------


def _local_callees(ssa: SsaFunction, known: set[str]) -> set[str]:
    out = set()
    for _stmt, call in _iter_call_sites(ssa):
        chain = call_name_chain(call.func)
        if len(chain) == 1 and chain[0] in known:
            out.add(chain[0])
    return out


def _return_taint(ssa: SsaFunction, taint: dict[Version, bool],
                  rules: RulePack,
                  summaries: dict[str, FunctionSummary]) -> bool:
    solver = _TaintSolver(ssa, rules, summaries)
    solver.taint = taint
    for bid, block in ssa.cfg.blocks.items():
        if not block.reachable:
            continue
        for stmt in block.statements:
            if isinstance(stmt, ast.Return) and stmt.value is not None:
                if solver.expr_taint(stmt.value):
                    return True
    return False


def summarize_function(ssa: SsaFunction, rules: RulePack,
                       summaries: dict[str, FunctionSummary] | None = None) -> FunctionSummary:
    """Sound params-to-return summary plus internal source-to-sink check."""
    summaries = summaries or {}
    taint = propagate(ssa, rules, summaries, taint_params=True)
    params_to_return = _return_taint(ssa, taint, rules, summaries)
    internal = propagate(ssa, rules, summaries, taint_params=False)
    has_internal = bool(find_flows(ssa, rules, internal, summaries))
    return FunctionSummary(ssa.name, params_to_return, has_internal)


def summarize_module(module: SsaModule, rules: RulePack) -> dict[str, FunctionSummary]:
    """Summaries for all functions, context-insensitively. Functions involved
    in (mutual) recursion get the conservative params-to-return = True."""
    # use unqualified names for call matching; last definition wins
    by_name: dict[str, SsaFunction] = {}
    for qualname, fn in module.functions.items():
        by_name[qualname.split(".")[-1].split("@")[0]] = fn
    known = set(by_name)
    callees = {name: _local_callees(fn, known) for name, fn in by_name.items()}

    # conservative treatment of call cycles: iterative DFS cycle detection
    in_cycle: set[str] = set()
    for start in by_name:
        stack = [(start, iter(callees[start]))]
        on_path = {start}
        while stack:
            node, it = stack[-1]
            advanced = False
            for nxt in it:
                if nxt in on_path:
                    in_cycle.update(on_path)
                elif nxt in by_name:
                    stack.append((nxt, iter(callees[nxt])))
                    on_path.add(nxt)
                    advanced = True
                    break
            if not advanced:
                stack.pop()
                on_path.discard(node)

    summaries: dict[str, FunctionSummary] = {}
    for name in in_cycle:
        summaries[name] = FunctionSummary(name, params_to_return=True,
                                          has_internal_flow=False)
    remaining = [n for n in by_name if n not in in_cycle]
    # topological-ish order: iterate until all summarized (acyclic remainder)
    while remaining:
        progressed = False
        for name in list(remaining):
            if all(c in summaries for c in callees[name] if c != name):
                summaries[name] = summarize_function(by_name[name], rules, summaries)
                remaining.remove(name)
                progressed = True
        if not progressed:  # defensive: should not happen after cycle pass
            for name in remaining:
                summaries[name] = FunctionSummary(name, True, False)
            break
    # refresh internal-flow bit for cycle members with full summary map
    for name in in_cycle:
        internal = propagate(by_name[name], rules, summaries, taint_params=False)
        summaries[name] = FunctionSummary(
            name, True, bool(find_flows(by_name[name], rules, internal, summaries)))
    return summaries


def analyze_module(module: SsaModule, rules: RulePack) -> list[Finding]:
    """Findings for one rule pack across the module body and every function."""
    summaries = summarize_module(module, rules)
    findings: list[Finding] = []
    taint = propagate(module.module, rules, summaries)
    findings.extend(find_flows(module.module, rules, taint, summaries))
    for name, fn in sorted(module.functions.items()):
        fn_taint = propagate(fn, rules, summaries, taint_params=False)
        findings.extend(find_flows(fn, rules, fn_taint, summaries))
    findings.sort(key=Finding.sort_key)
    return findings

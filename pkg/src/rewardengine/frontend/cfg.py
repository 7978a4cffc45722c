"""Control-flow graph construction over the Python AST.

One Cfg per function plus one for module top level. Blocks hold straight-line
statement sequences; a compound statement (if/while/for/try) appears as the
last statement of its header block and acts as the terminator. Edges carry
one of five labels. Statements following return/raise/break/continue land in
blocks with no path from entry; those blocks are flagged unreachable.

Constructs outside the supported imperative core (match, async bodies at
module level, etc.) become single opaque statements; downstream analyses
treat them conservatively.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

FALLTHROUGH = "fallthrough"
BRANCH_TRUE = "branch-true"
BRANCH_FALSE = "branch-false"
LOOP_BACK = "loop-back"
EXCEPTION = "exception"

#: statement kinds appended to a block as plain straight-line statements
_SIMPLE = (
    ast.Assign, ast.AugAssign, ast.AnnAssign, ast.Expr, ast.Import,
    ast.ImportFrom, ast.Pass, ast.Global, ast.Nonlocal, ast.Assert,
    ast.Delete, ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef,
)


@dataclass
class Block:
    block_id: int
    statements: list[ast.AST] = field(default_factory=list)
    reachable: bool = True


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    kind: str


class Cfg:
    """CFG for one function body or the module top level."""

    def __init__(self, name: str, func: ast.AST | None = None):
        self.name = name
        self.func = func
        self.blocks: dict[int, Block] = {}
        self.edges: list[Edge] = []
        self._succ: dict[int, list[Edge]] = {}
        self._pred: dict[int, list[Edge]] = {}
        self.entry = self._new_block()
        self.exit = self._new_block()

    def _new_block(self) -> int:
        bid = len(self.blocks)
        self.blocks[bid] = Block(bid)
        self._succ[bid] = []
        self._pred[bid] = []
        return bid

    def _add_edge(self, src: int, dst: int, kind: str) -> None:
        if src == self.exit or dst == self.entry:
            raise AssertionError("edges out of exit / into entry are forbidden")
        if any(e.dst == dst and e.kind == kind for e in self._succ[src]):
            return
        edge = Edge(src, dst, kind)
        self.edges.append(edge)
        self._succ[src].append(edge)
        self._pred[dst].append(edge)

    def successors(self, bid: int) -> list[Edge]:
        return self._succ[bid]

    def predecessors(self, bid: int) -> list[Edge]:
        return self._pred[bid]

    def reachable_from_entry(self) -> set[int]:
        seen = {self.entry}
        stack = [self.entry]
        while stack:
            b = stack.pop()
            for e in self._succ[b]:
                if e.dst not in seen:
                    seen.add(e.dst)
                    stack.append(e.dst)
        return seen

    def finalize(self) -> None:
        reachable = self.reachable_from_entry()
        for block in self.blocks.values():
            block.reachable = block.block_id in reachable

    def dump(self) -> str:
        """Stable textual form, one block per paragraph, for golden tests."""
        lines = [f"cfg {self.name}"]
        for bid in sorted(self.blocks):
            block = self.blocks[bid]
            tag = ""
            if bid == self.entry:
                tag = " (entry)"
            elif bid == self.exit:
                tag = " (exit)"
            if not block.reachable:
                tag += " (unreachable)"
            lines.append(f"block B{bid}{tag}:")
            for stmt in block.statements:
                lines.append(f"  {_stmt_repr(stmt)}")
            for e in sorted(self._succ[bid], key=lambda e: (e.dst, e.kind)):
                lines.append(f"  -> B{e.dst} [{e.kind}]")
            lines.append("")
        return "\n".join(lines).rstrip() + "\n"


def _stmt_repr(stmt: ast.AST) -> str:
    if isinstance(stmt, (ast.If, ast.While)):
        return f"branch {ast.unparse(stmt.test)}"
    if isinstance(stmt, (ast.For, ast.AsyncFor)):
        return f"for {ast.unparse(stmt.target)} in {ast.unparse(stmt.iter)}"
    if isinstance(stmt, ast.Try):
        return "try"
    if isinstance(stmt, ast.ExceptHandler):
        name = f" as {stmt.name}" if stmt.name else ""
        typ = ast.unparse(stmt.type) if stmt.type else "*"
        return f"except {typ}{name}"
    if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
        return f"def {stmt.name}(...)"
    if isinstance(stmt, ast.ClassDef):
        return f"class {stmt.name}"
    try:
        text = ast.unparse(stmt)
    except Exception:
        text = type(stmt).__name__
    return text.split("\n")[0]


def _is_constant_true(test: ast.expr) -> bool:
    return isinstance(test, ast.Constant) and bool(test.value)


class _Builder:
    def __init__(self, cfg: Cfg):
        self.cfg = cfg
        # innermost-first (header_id, after_id) pairs for break/continue
        self.loops: list[tuple[int, int]] = []
        # active exception handler entry blocks, all nesting levels
        self.handlers: list[int] = []

    def build(self, body: list[ast.stmt]) -> None:
        first = self.cfg._new_block()
        self.cfg._add_edge(self.cfg.entry, first, FALLTHROUGH)
        end = self.process(body, first)
        if end is not None:
            self.cfg._add_edge(end, self.cfg.exit, FALLTHROUGH)
        self.cfg.finalize()

    def _append(self, bid: int, stmt: ast.AST) -> None:
        self.cfg.blocks[bid].statements.append(stmt)
        for h in self.handlers:
            self.cfg._add_edge(bid, h, EXCEPTION)

    def process(self, stmts: list[ast.stmt], current: int | None) -> int | None:
        """Thread `stmts` through the graph starting at `current`; returns the
        open block where control continues, or None after a terminator."""
        for stmt in stmts:
            if current is None:
                # dead code after a terminator: fresh block, no in-edges
                current = self.cfg._new_block()
            if isinstance(stmt, _SIMPLE):
                self._append(current, stmt)
            elif isinstance(stmt, ast.Return):
                self._append(current, stmt)
                self.cfg._add_edge(current, self.cfg.exit, FALLTHROUGH)
                current = None
            elif isinstance(stmt, ast.Raise):
                self._append(current, stmt)
                if not self.handlers:
                    self.cfg._add_edge(current, self.cfg.exit, FALLTHROUGH)
                current = None
            elif isinstance(stmt, ast.Break):
                self._append(current, stmt)
                if self.loops:
                    self.cfg._add_edge(current, self.loops[-1][1], FALLTHROUGH)
                else:
                    self.cfg._add_edge(current, self.cfg.exit, FALLTHROUGH)
                current = None
            elif isinstance(stmt, ast.Continue):
                self._append(current, stmt)
                if self.loops:
                    self.cfg._add_edge(current, self.loops[-1][0], LOOP_BACK)
                else:
                    self.cfg._add_edge(current, self.cfg.exit, FALLTHROUGH)
                current = None
            elif isinstance(stmt, ast.If):
                current = self._process_if(stmt, current)
            elif isinstance(stmt, ast.While):
                current = self._process_while(stmt, current)
            elif isinstance(stmt, (ast.For, ast.AsyncFor)):
                current = self._process_for(stmt, current)
            elif isinstance(stmt, ast.Try):
                current = self._process_try(stmt, current)
            elif isinstance(stmt, (ast.With, ast.AsyncWith)):
                self._append(current, stmt)
                current = self.process(stmt.body, current)
            else:
                # opaque construct (match, etc.): single conservative statement
                self._append(current, stmt)
        return current

    def _process_if(self, stmt: ast.If, current: int) -> int | None:
        self._append(current, stmt)
        then_b = self.cfg._new_block()
        self.cfg._add_edge(current, then_b, BRANCH_TRUE)
        then_end = self.process(stmt.body, then_b)
        if stmt.orelse:
            else_b = self.cfg._new_block()
            self.cfg._add_edge(current, else_b, BRANCH_FALSE)
            else_end = self.process(stmt.orelse, else_b)
        else:
            else_end = current  # fall around the then-branch
        if then_end is None and (stmt.orelse and else_end is None):
            return None
        join = self.cfg._new_block()
        if then_end is not None:
            self.cfg._add_edge(then_end, join, FALLTHROUGH)
        if else_end is not None:
            kind = FALLTHROUGH if stmt.orelse else BRANCH_FALSE
            self.cfg._add_edge(else_end, join, kind)
        return join

    def _loop_body(self, stmt, header: int, after: int) -> None:
        body_b = self.cfg._new_block()
        self.cfg._add_edge(header, body_b, BRANCH_TRUE)
        self.loops.append((header, after))
        body_end = self.process(stmt.body, body_b)
        self.loops.pop()
        if body_end is not None:
            self.cfg._add_edge(body_end, header, LOOP_BACK)

    def _loop_exit(self, stmt, header: int, after: int) -> None:
        if stmt.orelse:
            else_b = self.cfg._new_block()
            self.cfg._add_edge(header, else_b, BRANCH_FALSE)
            else_end = self.process(stmt.orelse, else_b)
            if else_end is not None:
                self.cfg._add_edge(else_end, after, FALLTHROUGH)
        else:
            self.cfg._add_edge(header, after, BRANCH_FALSE)

    def _process_while(self, stmt: ast.While, current: int) -> int:
        header = self.cfg._new_block()
        self.cfg._add_edge(current, header, FALLTHROUGH)
        self._append(header, stmt)
        after = self.cfg._new_block()
        self._loop_body(stmt, header, after)
        if not _is_constant_true(stmt.test):
            self._loop_exit(stmt, header, after)
        return after

    def _process_for(self, stmt, current: int) -> int:
        header = self.cfg._new_block()
        self.cfg._add_edge(current, header, FALLTHROUGH)
        self._append(header, stmt)
        after = self.cfg._new_block()
        self._loop_body(stmt, header, after)
        self._loop_exit(stmt, header, after)
        return after

    def _process_try(self, stmt: ast.Try, current: int) -> int | None:
        handler_blocks = [self.cfg._new_block() for _ in stmt.handlers]
        self.handlers.extend(handler_blocks)
        body_b = self.cfg._new_block()
        self.cfg._add_edge(current, body_b, FALLTHROUGH)
        body_end = self.process(stmt.body, body_b)
        del self.handlers[len(self.handlers) - len(handler_blocks):]

        if stmt.orelse and body_end is not None:
            body_end = self.process(stmt.orelse, body_end)

        handler_ends = []
        for handler, h_b in zip(stmt.handlers, handler_blocks):
            self._append(h_b, handler)
            handler_ends.append(self.process(handler.body, h_b))

        open_ends = [e for e in [body_end, *handler_ends] if e is not None]
        if not open_ends and not stmt.finalbody:
            return None
        join = self.cfg._new_block()
        for e in open_ends:
            self.cfg._add_edge(e, join, FALLTHROUGH)
        if stmt.finalbody:
            return self.process(stmt.finalbody, join)
        return join if open_ends else None


def build_cfg(name: str, body: list[ast.stmt], func: ast.AST | None = None) -> Cfg:
    cfg = Cfg(name, func)
    _Builder(cfg).build(body)
    return cfg


@dataclass
class ModuleCfgs:
    module: Cfg
    functions: dict[str, Cfg]  # qualname -> Cfg

    def all_cfgs(self) -> list[Cfg]:
        return [self.module, *self.functions.values()]


def _walk_scope(body: list[ast.stmt], prefix: str, out: dict[str, Cfg]) -> None:
    for stmt in body:
        if isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
            qualname = f"{prefix}{stmt.name}"
            if qualname in out:  # redefinition: keep the last, suffix the first
                qualname = f"{qualname}@{stmt.lineno}"
            out[qualname] = build_cfg(qualname, stmt.body, func=stmt)
            _walk_scope(stmt.body, f"{qualname}.", out)
        elif isinstance(stmt, ast.ClassDef):
            _walk_scope(stmt.body, f"{prefix}{stmt.name}.", out)
        else:
            _walk_nested_stmts(stmt, prefix, out)


def _walk_nested_stmts(stmt: ast.stmt, prefix: str, out: dict[str, Cfg]) -> None:
    for field_name, value in ast.iter_fields(stmt):
        if isinstance(value, list) and value and isinstance(value[0], (ast.stmt, ast.ExceptHandler)):
            if field_name in ("body", "orelse", "finalbody"):
                _walk_scope(value, prefix, out)
            elif isinstance(value[0], ast.ExceptHandler):
                for handler in value:
                    _walk_scope(handler.body, prefix, out)


def build_cfgs(tree: ast.Module) -> ModuleCfgs:
    """Build the module-level Cfg and one Cfg per (possibly nested) function."""
    functions: dict[str, Cfg] = {}
    _walk_scope(tree.body, "", functions)
    return ModuleCfgs(module=build_cfg("<module>", tree.body), functions=functions)

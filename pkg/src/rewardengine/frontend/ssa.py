"""SSA conversion: versioned definitions, phi-nodes, and def-use chains.

Phi placement uses the standard dominance-frontier construction (dominators
via networkx); renaming is a dominator-tree walk. Every variable has an
implicit version 0 live at entry ("external": a parameter-less binding for
globals, builtins, and anything assigned outside the analyzed scope), which
keeps renaming total on arbitrary candidate code.

Attribute and subscript stores (a.b = x, a[i] = x) are modeled
field-insensitively as a new version of the base variable that folds in both
the prior version and the stored value.
"""

from __future__ import annotations

import ast
from dataclasses import dataclass, field

import networkx as nx

from rewardengine.frontend.cfg import Cfg, ModuleCfgs, build_cfgs

# definition kinds
ASSIGN = "assign"
AUG = "augassign"
FIELDSTORE = "fieldstore"
PARAM = "param"
EXTERNAL = "external"
PHI = "phi"
LOOPVAR = "loopvar"
IMPORT = "import"
BINDDEF = "binddef"       # def/class statement binding its own name
EXCEPT = "except"
WITHBIND = "with"
OPAQUE = "opaque"
NAMEDEXPR = "namedexpr"


@dataclass(frozen=True)
class Version:
    name: str
    index: int

    def __str__(self):
        return f"{self.name}_{self.index}"


@dataclass
class PhiNode:
    block: int
    var: str
    target: Version
    args: dict[int, Version] = field(default_factory=dict)  # pred block -> version


@dataclass
class Definition:
    version: Version
    kind: str
    stmt: ast.AST | None = None      # defining statement (or expr for walrus)
    value: ast.expr | None = None    # RHS expression when one exists
    prev: Version | None = None      # prior version folded in (aug/fieldstore)
    span: tuple[int, int] = (0, 0)


def _span(node: ast.AST | None) -> tuple[int, int]:
    if node is None:
        return (0, 0)
    return (getattr(node, "lineno", 0), getattr(node, "col_offset", 0))


class SsaFunction:
    """SSA form of one Cfg (a function body or the module top level)."""

    def __init__(self, cfg: Cfg, params: list[str]):
        self.cfg = cfg
        self.params = params
        self.phis: dict[int, list[PhiNode]] = {b: [] for b in cfg.blocks}
        self.defs: dict[Version, Definition] = {}
        # id(Name-load node) -> version it reads
        self.use_map: dict[int, Version] = {}
        # def-use chains: version -> use sites (Name nodes and PhiNodes)
        self.uses: dict[Version, list[object]] = {}
        # variable -> version visible at the exit block
        self.exit_env: dict[str, Version] = {}
        self._counters: dict[str, int] = {}

    @property
    def name(self) -> str:
        return self.cfg.name

    def new_version(self, var: str) -> Version:
        self._counters[var] = self._counters.get(var, 0) + 1
        return Version(var, self._counters[var])

    def add_def(self, d: Definition) -> None:
        if d.version in self.defs:
            raise AssertionError(f"duplicate definition of {d.version}")
        self.defs[d.version] = d
        self.uses.setdefault(d.version, [])

    def note_use(self, version: Version, site: object) -> None:
        self.uses.setdefault(version, []).append(site)

    def version_of_use(self, name_node: ast.Name) -> Version:
        return self.use_map[id(name_node)]

    def dump(self) -> str:
        """Stable SSA listing for golden tests."""
        lines = [f"ssa {self.cfg.name}"]
        for bid in sorted(self.cfg.blocks):
            block = self.cfg.blocks[bid]
            if bid == self.cfg.entry:
                lines.append(f"block B{bid} (entry):")
                for p in self.params:
                    lines.append(f"  param {p}_1")
            else:
                suffix = " (exit)" if bid == self.cfg.exit else ""
                if not block.reachable:
                    suffix += " (unreachable)"
                lines.append(f"block B{bid}{suffix}:")
            for phi in self.phis.get(bid, []):
                args = ", ".join(
                    f"B{pred}:{v}" for pred, v in sorted(phi.args.items())
                )
                lines.append(f"  {phi.target} = phi({args})")
            for stmt in block.statements:
                lines.append(f"  {_ssa_stmt_repr(self, stmt)}")
            lines.append("")
        return "\n".join(lines).rstrip() + "\n"


def _ssa_stmt_repr(ssa: SsaFunction, stmt: ast.AST) -> str:
    defined = [str(d.version) for d in ssa.defs.values() if d.stmt is stmt]
    try:
        text = ast.unparse(stmt).split("\n")[0]
    except Exception:
        text = type(stmt).__name__
    if defined:
        return f"{text}  ; defs {', '.join(sorted(defined))}"
    return text


@dataclass
class SsaModule:
    cfgs: ModuleCfgs
    module: SsaFunction
    functions: dict[str, SsaFunction]

    def all_functions(self) -> list[SsaFunction]:
        return [self.module, *self.functions.values()]


# --- assigned-variable discovery --------------------------------------------


def _store_names(target: ast.expr, out: list[str]) -> None:
    if isinstance(target, ast.Name):
        out.append(target.id)
    elif isinstance(target, (ast.Tuple, ast.List)):
        for elt in target.elts:
            _store_names(elt, out)
    elif isinstance(target, ast.Starred):
        _store_names(target.value, out)
    elif isinstance(target, (ast.Attribute, ast.Subscript)):
        base = _base_name(target)
        if base is not None:
            out.append(base)


def _base_name(node: ast.expr) -> str | None:
    while isinstance(node, (ast.Attribute, ast.Subscript)):
        node = node.value
    if isinstance(node, ast.Name):
        return node.id
    return None


def _import_names(stmt: ast.stmt) -> list[str]:
    names = []
    for alias in stmt.names:  # type: ignore[attr-defined]
        if alias.name == "*":
            continue
        bound = alias.asname or alias.name.split(".")[0]
        names.append(bound)
    return names


def _walrus_targets(node: ast.AST, out: list[str]) -> None:
    for child in ast.walk(node):
        if isinstance(child, ast.NamedExpr) and isinstance(child.target, ast.Name):
            out.append(child.target.id)


def stmt_assigned_names(stmt: ast.AST) -> list[str]:
    """Names (re)bound by one block-level statement, field-insensitively."""
    out: list[str] = []
    if isinstance(stmt, ast.Assign):
        for t in stmt.targets:
            _store_names(t, out)
        _walrus_targets(stmt.value, out)
    elif isinstance(stmt, ast.AugAssign):
        _store_names(stmt.target, out)
        _walrus_targets(stmt.value, out)
    elif isinstance(stmt, ast.AnnAssign):
        if stmt.value is not None:
            _store_names(stmt.target, out)
            _walrus_targets(stmt.value, out)
    elif isinstance(stmt, (ast.For, ast.AsyncFor)):
        _store_names(stmt.target, out)
        _walrus_targets(stmt.iter, out)
    elif isinstance(stmt, (ast.With, ast.AsyncWith)):
        for item in stmt.items:
            _walrus_targets(item.context_expr, out)
            if item.optional_vars is not None:
                _store_names(item.optional_vars, out)
    elif isinstance(stmt, ast.ExceptHandler):
        if stmt.name:
            out.append(stmt.name)
    elif isinstance(stmt, (ast.Import, ast.ImportFrom)):
        out.extend(_import_names(stmt))
    elif isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
        out.append(stmt.name)
    elif isinstance(stmt, (ast.If, ast.While)):
        _walrus_targets(stmt.test, out)
    elif isinstance(stmt, (ast.Expr, ast.Return, ast.Assert, ast.Raise)):
        for _f, v in ast.iter_fields(stmt):
            if isinstance(v, ast.AST):
                _walrus_targets(v, out)
    elif isinstance(stmt, ast.stmt):
        # opaque statement: every store inside counts as a def
        for child in ast.walk(stmt):
            if isinstance(child, ast.Name) and isinstance(child.ctx, ast.Store):
                out.append(child.id)
    return out


# --- expression walking for uses ---------------------------------------------


class _UseWalker:
    """Resolves Name loads (and walrus defs) in evaluation order against the
    renamer's current environment. Lambdas and comprehensions introduce their
    own scopes; names they bind are shadowed during the inner walk."""

    def __init__(self, renamer: "_Renamer"):
        self.renamer = renamer

    def walk(self, node: ast.expr | None, shadowed: frozenset[str] = frozenset()) -> None:
        if node is None:
            return
        if isinstance(node, ast.Name):
            if isinstance(node.ctx, ast.Load) and node.id not in shadowed:
                self.renamer.resolve_use(node)
            return
        if isinstance(node, ast.NamedExpr):
            self.walk(node.value, shadowed)
            if isinstance(node.target, ast.Name) and node.target.id not in shadowed:
                self.renamer.define(
                    node.target.id, NAMEDEXPR, stmt=node, value=node.value,
                    span=_span(node),
                )
            return
        if isinstance(node, ast.Lambda):
            inner = shadowed | frozenset(_arg_names(node.args))
            for default in [*node.args.defaults, *node.args.kw_defaults]:
                if default is not None:
                    self.walk(default, shadowed)
            self.walk(node.body, inner)
            return
        if isinstance(node, (ast.ListComp, ast.SetComp, ast.DictComp, ast.GeneratorExp)):
            inner = set(shadowed)
            for gen in node.generators:
                bound: list[str] = []
                _store_names(gen.target, bound)
                self.walk(gen.iter, frozenset(inner))
                inner.update(bound)
                for cond in gen.ifs:
                    self.walk(cond, frozenset(inner))
            if isinstance(node, ast.DictComp):
                self.walk(node.key, frozenset(inner))
                self.walk(node.value, frozenset(inner))
            else:
                self.walk(node.elt, frozenset(inner))
            return
        for child in ast.iter_child_nodes(node):
            if isinstance(child, ast.expr):
                self.walk(child, shadowed)
            elif isinstance(child, (ast.keyword, ast.FormattedValue)):
                self.walk(child.value, shadowed)
            elif isinstance(child, ast.comprehension):  # handled above
                continue


def _arg_names(args: ast.arguments) -> list[str]:
    names = [a.arg for a in [*args.posonlyargs, *args.args, *args.kwonlyargs]]
    if args.vararg:
        names.append(args.vararg.arg)
    if args.kwarg:
        names.append(args.kwarg.arg)
    return names


# --- renaming ----------------------------------------------------------------


class _Renamer:
    def __init__(self, ssa: SsaFunction):
        self.ssa = ssa
        self.cfg = ssa.cfg
        self.stacks: dict[str, list[Version]] = {}
        self.walker = _UseWalker(self)

    def current(self, var: str) -> Version:
        stack = self.stacks.get(var)
        if not stack:
            v0 = Version(var, 0)
            if v0 not in self.ssa.defs:
                self.ssa.add_def(Definition(v0, EXTERNAL))
            self.stacks[var] = [v0]
            return v0
        return stack[-1]

    def resolve_use(self, name_node: ast.Name) -> Version:
        v = self.current(name_node.id)
        self.ssa.use_map[id(name_node)] = v
        self.ssa.note_use(v, name_node)
        return v

    def define(self, var: str, kind: str, stmt=None, value=None, prev=None,
               span=(0, 0)) -> Version:
        v = self.ssa.new_version(var)
        self.ssa.add_def(Definition(v, kind, stmt=stmt, value=value, prev=prev, span=span))
        self.stacks.setdefault(var, [Version(var, 0)])
        if Version(var, 0) not in self.ssa.defs:
            self.ssa.add_def(Definition(Version(var, 0), EXTERNAL))
        self.stacks[var].append(v)
        self._pushed.append(var)
        return v

    # --- per-statement processing

    def process_stmt(self, stmt: ast.AST) -> None:
        walk = self.walker.walk
        if isinstance(stmt, ast.Assign):
            walk(stmt.value)
            for target in stmt.targets:
                self._assign_target(target, stmt, stmt.value)
        elif isinstance(stmt, ast.AugAssign):
            walk(stmt.value)
            if isinstance(stmt.target, ast.Name):
                old = self.current(stmt.target.id)
                self.ssa.note_use(old, stmt.target)
                self.define(stmt.target.id, AUG, stmt=stmt, value=stmt.value,
                            prev=old, span=_span(stmt))
            elif isinstance(stmt.target, (ast.Attribute, ast.Subscript)):
                self._field_store(stmt.target, stmt, stmt.value)
        elif isinstance(stmt, ast.AnnAssign):
            if stmt.value is not None:
                walk(stmt.value)
                self._assign_target(stmt.target, stmt, stmt.value)
        elif isinstance(stmt, (ast.Expr, ast.Return)):
            walk(stmt.value)
        elif isinstance(stmt, ast.Raise):
            walk(stmt.exc)
            walk(stmt.cause)
        elif isinstance(stmt, ast.Assert):
            walk(stmt.test)
            walk(stmt.msg)
        elif isinstance(stmt, (ast.If, ast.While)):
            walk(stmt.test)
        elif isinstance(stmt, (ast.For, ast.AsyncFor)):
            walk(stmt.iter)
            self._assign_target(stmt.target, stmt, stmt.iter, kind=LOOPVAR)
        elif isinstance(stmt, (ast.With, ast.AsyncWith)):
            for item in stmt.items:
                walk(item.context_expr)
                if item.optional_vars is not None:
                    self._assign_target(item.optional_vars, stmt,
                                        item.context_expr, kind=WITHBIND)
        elif isinstance(stmt, ast.ExceptHandler):
            walk(stmt.type)
            if stmt.name:
                self.define(stmt.name, EXCEPT, stmt=stmt, span=_span(stmt))
        elif isinstance(stmt, (ast.Import, ast.ImportFrom)):
            for name in _import_names(stmt):
                self.define(name, IMPORT, stmt=stmt, span=_span(stmt))
        elif isinstance(stmt, (ast.FunctionDef, ast.AsyncFunctionDef)):
            for dec in stmt.decorator_list:
                walk(dec)
            for default in [*stmt.args.defaults, *stmt.args.kw_defaults]:
                if default is not None:
                    walk(default)
            self.define(stmt.name, BINDDEF, stmt=stmt, span=_span(stmt))
        elif isinstance(stmt, ast.ClassDef):
            for dec in stmt.decorator_list:
                walk(dec)
            for base in stmt.bases:
                walk(base)
            self.define(stmt.name, BINDDEF, stmt=stmt, span=_span(stmt))
        elif isinstance(stmt, ast.Delete):
            for t in stmt.targets:
                if not isinstance(t, ast.Name):
                    walk(t)
        elif isinstance(stmt, (ast.Pass, ast.Global, ast.Nonlocal, ast.Break,
                               ast.Continue)):
            pass
        else:
            # opaque statement: conservative uses-then-defs over everything inside
            for child in ast.walk(stmt):
                if isinstance(child, ast.Name) and isinstance(child.ctx, ast.Load):
                    self.resolve_use(child)
            for var in stmt_assigned_names(stmt):
                self.define(var, OPAQUE, stmt=stmt, span=_span(stmt))

    def _assign_target(self, target: ast.expr, stmt: ast.AST, value: ast.expr,
                       kind: str = ASSIGN) -> None:
        if isinstance(target, ast.Name):
            self.define(target.id, kind, stmt=stmt, value=value, span=_span(target))
        elif isinstance(target, (ast.Tuple, ast.List)):
            for elt in target.elts:
                self._assign_target(elt, stmt, value, kind)
        elif isinstance(target, ast.Starred):
            self._assign_target(target.value, stmt, value, kind)
        elif isinstance(target, (ast.Attribute, ast.Subscript)):
            self._field_store(target, stmt, value)

    def _field_store(self, target: ast.expr, stmt: ast.AST, value: ast.expr) -> None:
        # walk index/attribute-chain uses (subscript indices read variables)
        node = target
        while isinstance(node, (ast.Attribute, ast.Subscript)):
            if isinstance(node, ast.Subscript):
                self.walker.walk(node.slice)
            node = node.value
        if isinstance(node, ast.Name):
            old = self.current(node.id)
            self.ssa.note_use(old, node)
            self.ssa.use_map[id(node)] = old
            self.define(node.id, FIELDSTORE, stmt=stmt, value=value, prev=old,
                        span=_span(target))
        else:
            self.walker.walk(node)

    # --- dominator-tree walk

    def run(self) -> None:
        cfg = self.cfg
        reachable = {b for b in cfg.blocks if cfg.blocks[b].reachable}
        graph = nx.DiGraph()
        graph.add_nodes_from(reachable)
        for e in cfg.edges:
            if e.src in reachable and e.dst in reachable:
                graph.add_edge(e.src, e.dst)
        idom = nx.immediate_dominators(graph, cfg.entry)
        frontiers = nx.dominance_frontiers(graph, cfg.entry)
        dom_children: dict[int, list[int]] = {b: [] for b in reachable}
        for b, d in idom.items():
            if b != d:
                dom_children[d].append(b)
        for children in dom_children.values():
            children.sort()

        # parameters define version 1 at entry
        for p in self.ssa.params:
            self.ssa.add_def(Definition(Version(p, 0), EXTERNAL))
            v = self.ssa.new_version(p)
            self.ssa.add_def(Definition(v, PARAM, stmt=self.cfg.func, span=_span(self.cfg.func)))

        # phi placement over dominance frontiers
        def_blocks: dict[str, set[int]] = {}
        for bid in reachable:
            for stmt in cfg.blocks[bid].statements:
                for var in stmt_assigned_names(stmt):
                    def_blocks.setdefault(var, set()).add(bid)
        for var in self.ssa.params:
            def_blocks.setdefault(var, set()).add(cfg.entry)
        for var, blocks in sorted(def_blocks.items()):
            # every var also has its implicit entry binding (version 0 / param)
            work = list(blocks | {cfg.entry})
            placed: set[int] = set()
            while work:
                b = work.pop()
                for fb in frontiers.get(b, ()):
                    npreds = len([e for e in cfg.predecessors(fb) if e.src in reachable])
                    if fb in placed or npreds < 2:
                        continue
                    placed.add(fb)
                    phi = PhiNode(block=fb, var=var, target=self.ssa.new_version(var))
                    self.ssa.phis[fb].append(phi)
                    self.ssa.add_def(Definition(phi.target, PHI, stmt=None))
                    if fb not in blocks:
                        work.append(fb)
        for phis in self.ssa.phis.values():
            phis.sort(key=lambda p: p.var)

        # renaming: iterative DFS over the dominator tree
        stack: list[tuple[str, int]] = [("enter", cfg.entry)]
        pushed_per_block: dict[int, list[str]] = {}
        while stack:
            action, bid = stack.pop()
            if action == "exit":
                for var in reversed(pushed_per_block.pop(bid, [])):
                    self.stacks[var].pop()
                continue
            self._pushed: list[str] = []
            if bid == cfg.entry:
                for p in self.ssa.params:
                    self.stacks.setdefault(p, [Version(p, 0)]).append(Version(p, 1))
                    self._pushed.append(p)
            for phi in self.ssa.phis[bid]:
                self.stacks.setdefault(phi.var, [Version(phi.var, 0)]).append(phi.target)
                self._pushed.append(phi.var)
            for stmt in cfg.blocks[bid].statements:
                self.process_stmt(stmt)
            if bid == cfg.exit:
                self.ssa.exit_env = {var: s[-1] for var, s in self.stacks.items() if s}
            for edge in cfg.successors(bid):
                if edge.dst not in reachable:
                    continue
                for phi in self.ssa.phis[edge.dst]:
                    incoming = self.current(phi.var)
                    phi.args[bid] = incoming
                    self.ssa.note_use(incoming, phi)
            pushed_per_block[bid] = self._pushed
            stack.append(("exit", bid))
            for child in reversed(dom_children[bid]):
                stack.append(("enter", child))

        # exit may be unreachable (e.g. infinite loop with no break)
        if not self.ssa.exit_env:
            self.ssa.exit_env = {}

        # unreachable blocks: rename linearly with a private environment each
        for bid in sorted(cfg.blocks):
            if bid in reachable:
                continue
            self.stacks = {}
            self._pushed = []
            for stmt in cfg.blocks[bid].statements:
                self.process_stmt(stmt)


def to_ssa(cfg: Cfg) -> SsaFunction:
    params: list[str] = []
    if cfg.func is not None and isinstance(cfg.func, (ast.FunctionDef, ast.AsyncFunctionDef)):
        params = _arg_names(cfg.func.args)
    ssa = SsaFunction(cfg, params)
    _Renamer(ssa).run()
    return ssa


def to_ssa_module(tree: ast.Module) -> SsaModule:
    cfgs = build_cfgs(tree)
    return SsaModule(
        cfgs=cfgs,
        module=to_ssa(cfgs.module),
        functions={name: to_ssa(c) for name, c in cfgs.functions.items()},
    )

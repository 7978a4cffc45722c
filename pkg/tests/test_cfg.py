import ast
import random

import pytest

from conftest import cfg_of, parse_ok
from progen import gen_branching
from rewardengine.frontend.cfg import (
    BRANCH_FALSE, BRANCH_TRUE, EXCEPTION, LOOP_BACK, build_cfgs,
)
from rewardengine.frontend.syntax import SyntaxFailure, parse


def module_cfg(source: str):
    return cfg_of(source).module


def bfs_reachable(cfg) -> set[int]:
    """Independent reachability oracle over the public edge list."""
    seen = {cfg.entry}
    frontier = [cfg.entry]
    while frontier:
        nxt = []
        for b in frontier:
            for e in cfg.edges:
                if e.src == b and e.dst not in seen:
                    seen.add(e.dst)
                    nxt.append(e.dst)
        frontier = nxt
    return seen


class TestShape:
    def test_straight_line_single_chain(self):
        cfg = module_cfg("a = 1\nb = a\nprint(b)\n")
        stmts = [s for b in cfg.blocks.values() for s in b.statements]
        assert len(stmts) == 3
        assert all(b.reachable for b in cfg.blocks.values())

    def test_if_else_diamond(self):
        cfg = module_cfg("a = 1\nif a:\n    b = 1\nelse:\n    b = 2\nc = b\n")
        kinds = {e.kind for e in cfg.edges}
        assert BRANCH_TRUE in kinds and BRANCH_FALSE in kinds

    def test_while_has_loop_back_edge(self):
        cfg = module_cfg("a = 5\nwhile a:\n    a = a - 1\nprint(a)\n")
        assert any(e.kind == LOOP_BACK for e in cfg.edges)

    def test_while_true_makes_after_unreachable(self):
        cfg = module_cfg("while True:\n    x = 1\nprint(x)\n")
        unreachable = [b for b in cfg.blocks.values()
                       if not b.reachable and b.statements]
        assert len(unreachable) == 1
        assert isinstance(unreachable[0].statements[0], ast.Expr)

    def test_code_after_return_unreachable(self):
        cfgs = cfg_of("def f():\n    return 1\n    x = 2\n")
        (fn_cfg,) = cfgs.functions.values()
        dead = [b for b in fn_cfg.blocks.values()
                if not b.reachable and b.statements]
        assert len(dead) == 1

    def test_break_exits_loop(self):
        cfg = module_cfg(
            "a = 1\nwhile a:\n    if a > 2:\n        break\n    a = a + 1\nprint(a)\n")
        assert all(b.reachable for b in cfg.blocks.values() if b.statements)

    def test_try_except_exception_edges(self):
        cfg = module_cfg(
            "try:\n    a = 1\n    b = 2\nexcept ValueError:\n    c = 3\n")
        exc_edges = [e for e in cfg.edges if e.kind == EXCEPTION]
        assert exc_edges, "try body must have an exception edge to its handler"
        handler_blocks = {e.dst for e in exc_edges}
        assert all(cfg.blocks[b].reachable for b in handler_blocks)

    def test_no_edges_out_of_exit(self):
        cfg = module_cfg("a = 1\nif a:\n    b = 2\n")
        assert not [e for e in cfg.edges if e.src == cfg.exit]

    def test_per_function_cfgs(self):
        cfgs = cfg_of("def f():\n    pass\n\nclass C:\n    def g(self):\n        pass\n")
        names = set(cfgs.functions)
        assert "f" in names
        assert any("g" in n for n in names)

    def test_redefinition_gets_distinct_cfg(self):
        cfgs = cfg_of("def f():\n    pass\n\ndef f():\n    return 1\n")
        assert len(cfgs.functions) == 2


class TestDump:
    def test_dump_is_stable(self):
        src = "a = 1\nif a:\n    b = 2\nelse:\n    b = 3\n"
        assert module_cfg(src).dump() == module_cfg(src).dump()
        assert "(entry)" in module_cfg(src).dump()
        assert "(exit)" in module_cfg(src).dump()


class TestSyntaxFrontend:
    def test_parse_failure_reports_location(self):
        failure = parse("def broken(:\n")
        assert isinstance(failure, SyntaxFailure)
        assert failure.line >= 1

    @pytest.mark.parametrize("source", ["", "\x00", "if", "(((", "def f(", "🎉 ="])
    def test_parse_total_on_garbage(self, source):
        result = parse(source)
        assert isinstance(result, (SyntaxFailure, type(parse_ok("x = 1"))))


class TestReachabilityOracle:
    def test_random_programs_match_bfs(self):
        rng = random.Random(20260824)
        for i in range(500):
            source = gen_branching(rng)
            tree = ast.parse(source)
            cfgs = build_cfgs(tree)
            for cfg in [cfgs.module, *cfgs.functions.values()]:
                expected = bfs_reachable(cfg)
                for block in cfg.blocks.values():
                    assert block.reachable == (block.block_id in expected), (
                        f"program {i} block {block.block_id}:\n{source}")

    def test_random_programs_cover_all_statements(self):
        rng = random.Random(7)
        for _ in range(200):
            source = gen_branching(rng)
            tree = ast.parse(source)
            cfg = build_cfgs(tree).module
            placed = [id(s) for b in cfg.blocks.values() for s in b.statements]
            assert len(placed) == len(set(placed)), "statement placed twice"

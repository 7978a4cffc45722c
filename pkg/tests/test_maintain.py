from conftest import parse_ok
from rewardengine.maintain import (
    Ann, assignable, maintainability_verdict, parse_annotation,
)


def kinds(source: str) -> list[str]:
    return [f.kind for f in maintainability_verdict(parse_ok(source)).findings]


def messages(source: str) -> list[str]:
    return [f.message for f in maintainability_verdict(parse_ok(source)).findings]


class TestAnnotationsCheck:
    def test_unannotated_params_and_return(self):
        src = "def f(a, b):\n    return a\n"
        assert kinds(src).count("missing-annotation") == 3

    def test_self_and_cls_exempt(self):
        src = (
            "class C:\n"
            "    def m(self, x: int) -> int:\n        return x\n"
            "    @classmethod\n"
            "    def k(cls) -> None:\n        pass\n"
        )
        assert "missing-annotation" not in kinds(src)

    def test_nested_functions_exempt(self):
        src = (
            "def outer() -> None:\n"
            "    def inner(x):\n        return x\n"
            "    inner(1)\n"
        )
        assert "missing-annotation" not in kinds(src)

    def test_fully_annotated_clean(self):
        assert kinds("def f(a: int, b: str = 'x') -> int:\n    return a\n") == []


class TestTypeChecks:
    def test_str_plus_int(self):
        assert "type-mismatch" in kinds('x = "a" + 1\n')

    def test_tracked_through_variables(self):
        assert "type-mismatch" in kinds('a = "s"\nb = 3\nc = a - b\n')

    def test_unknown_is_silent(self):
        assert kinds("a = mystery()\nb = a + 1\n") == []

    def test_annassign_mismatch(self):
        assert "type-mismatch" in kinds('x: int = "s"\n')

    def test_call_argument_mismatch(self):
        src = (
            "def f(a: int) -> int:\n    return a\n"
            "y = f('text')\nprint(y)\n"
        )
        assert "type-mismatch" in kinds(src)

    def test_numeric_widening_allowed(self):
        assert kinds("x: float = 1\ny: int = True\n") == []

    def test_optional_accepts_none(self):
        assert kinds("from typing import Optional\nx: Optional[int] = None\n") == []


class TestUnreachable:
    def test_code_after_return(self):
        src = "def f() -> int:\n    return 1\n    print('dead')\n"
        assert kinds(src).count("unreachable-code") == 1

    def test_one_finding_per_region(self):
        src = (
            "def f() -> int:\n"
            "    return 1\n"
            "    a = 1\n"
            "    b = 2\n"
            "    print(a + b)\n"
        )
        assert kinds(src).count("unreachable-code") == 1

    def test_while_true_tail(self):
        src = "def f() -> None:\n    while True:\n        pass\n    print('x')\n"
        assert "unreachable-code" in kinds(src)


class TestSignatures:
    def test_return_type_disagreement(self):
        src = "def f() -> int:\n    return 'x'\n"
        assert "signature-inconsistency" in kinds(src)

    def test_implicit_none_path(self):
        src = "def f(a: int) -> int:\n    if a:\n        return a\n"
        assert "signature-inconsistency" in kinds(src)

    def test_none_annotation_allows_fall_off(self):
        assert kinds("def f() -> None:\n    print('x')\n") == []

    def test_optional_return_allows_none(self):
        src = (
            "def f(a: int) -> int | None:\n"
            "    if a:\n        return a\n"
            "    return None\n"
        )
        assert kinds(src) == []


class TestUnused:
    def test_unused_local(self):
        src = "def f() -> int:\n    x = 1\n    return 2\n"
        assert "unused-code" in kinds(src)

    def test_underscore_exempt(self):
        src = "def f() -> int:\n    _x = 1\n    return 2\n"
        assert "unused-code" not in kinds(src)

    def test_unused_import(self):
        assert "unused-code" in kinds("import json\nprint('x')\n")

    def test_used_import_silent(self):
        assert kinds("import json\nprint(json.dumps({}))\n") == []


class TestVerdict:
    def test_clean_program(self):
        src = (
            "import math\n\n\n"
            "def area(radius: float) -> float:\n"
            "    return math.pi * radius * radius\n\n\n"
            "print(area(2.0))\n"
        )
        report = maintainability_verdict(parse_ok(src))
        assert report.clean
        assert report.findings == ()

    def test_findings_sorted_and_deterministic(self):
        src = "def f(a, b):\n    x = 'dead'\n    return 1\n"
        first = messages(src)
        assert first == messages(src)
        lines = [f.line for f in maintainability_verdict(parse_ok(src)).findings]
        assert lines == sorted(lines)


class TestAnnotationLattice:
    def test_parse_forms(self):
        import ast

        def ann(text):
            return parse_annotation(ast.parse(text, mode="eval").body)

        assert ann("int") == Ann("int")
        assert ann("Optional[str]") == Ann("str", optional=True)
        assert ann("int | None") == Ann("int", optional=True)
        assert ann("List[int]") == Ann("list")
        assert ann("SomeClass") == Ann("unknown")

    def test_assignable_rules(self):
        assert assignable(Ann("float"), "int")
        assert assignable(Ann("int"), "bool")
        assert not assignable(Ann("int"), "float")
        assert not assignable(Ann("str"), "int")
        assert assignable(Ann("int", optional=True), "none")
        assert not assignable(Ann("int"), "none")
        assert assignable(Ann("unknown"), "str")
        assert assignable(Ann("str"), "unknown")

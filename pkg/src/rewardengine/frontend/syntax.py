"""Total parsing front door: any text in, an AST or a localized failure out."""

from __future__ import annotations

import ast
from dataclasses import dataclass


@dataclass(frozen=True)
class SyntaxFailure:
    message: str
    line: int
    column: int


@dataclass(frozen=True)
class ParsedModule:
    tree: ast.Module
    source: str


def parse(source: str) -> ParsedModule | SyntaxFailure:
    """Parse candidate source. Never raises: malformed input (including
    adversarial byte soup, null bytes, or pathological nesting) yields a
    SyntaxFailure localizing the first error."""
    if not isinstance(source, str):
        try:
            source = source.decode("utf-8", errors="replace")
        except Exception:
            return SyntaxFailure("source is not text", 1, 0)
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        return SyntaxFailure(exc.msg or "invalid syntax", exc.lineno or 1, exc.offset or 0)
    except (ValueError, TypeError, RecursionError, MemoryError) as exc:
        return SyntaxFailure(f"unparseable source: {exc}", 1, 0)
    return ParsedModule(tree=tree, source=source)

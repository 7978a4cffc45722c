"""CWE detector registry: built-in rule packs, extension loading, dispatch.

Most packs are pure dataflow (source/sink/sanitizer) and run through the
taint engine. CWE-352 (CSRF) is structural: a state-changing request handler
registered without a token-check pattern anywhere in its body. The registry
supports both detector shapes.

Known false-negative shapes, by design (documented, not silently ignored):
taint carried through external files or databases between runs; sources read
via attribute access rather than calls (e.g. sys.argv); dynamic sink dispatch
(getattr). Adding a CWE means adding a pack file, never engine changes.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from rewardengine.frontend.syntax import ParsedModule, SyntaxFailure, parse
from rewardengine.frontend.ssa import to_ssa_module
from rewardengine.tasks import CandidateProgram
from rewardengine.taint import (
    CallPattern,
    Finding,
    RulePack,
    SafeSinkForm,
    SinkPattern,
    StructuralRule,
    analyze_module,
    call_name_chain,
    chain_matches,
)

import ast

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CweId:
    number: int
    name: str

    def __str__(self):
        return f"CWE-{self.number}"


class UnknownCweError(KeyError):
    def __init__(self, cwe: int, known: list[int]):
        self.cwe = cwe
        known_text = ", ".join(f"CWE-{k}" for k in sorted(known))
        super().__init__(f"no detector for CWE-{cwe}; known: {known_text}")


class RulePackError(ValueError):
    pass


# --- pack file format ---------------------------------------------------------


def rulepack_from_record(record: dict) -> RulePack:
    try:
        structural = None
        if record.get("structural"):
            s = record["structural"]
            structural = StructuralRule(
                handler_decorators=tuple(s["handler_decorators"]),
                state_methods=tuple(s["state_methods"]),
                token_checks=tuple(s["token_checks"]),
            )
        sinks = []
        for raw in record.get("sinks", []):
            if not raw.get("pattern"):
                raise ValueError(f"sink with empty pattern: {raw!r}")
            sinks.append(SinkPattern(raw["pattern"], tuple(raw.get("args", [0]))))
        return RulePack(
            cwe=record["cwe"],
            name=record["name"],
            sources=tuple(CallPattern(p) for p in record.get("sources", [])),
            sinks=tuple(sinks),
            sanitizers=tuple(CallPattern(p) for p in record.get("sanitizers", [])),
            safe_sink_forms=tuple(
                SafeSinkForm(
                    kind=f["kind"],
                    sink_pattern=f["sink_pattern"],
                    query_arg=f.get("query_arg", 0),
                    params_arg=f.get("params_arg", 1),
                    placeholders=tuple(f.get("placeholders", ["?"])),
                )
                for f in record.get("safe_sink_forms", [])
            ),
            structural=structural,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise RulePackError(f"malformed rule pack: {exc}") from exc


def rulepack_to_record(pack: RulePack) -> dict:
    return {
        "schema_version": 1,
        "cwe": pack.cwe,
        "name": pack.name,
        "sources": [p.pattern for p in pack.sources],
        "sinks": [{"pattern": s.pattern, "args": list(s.args)} for s in pack.sinks],
        "sanitizers": [p.pattern for p in pack.sanitizers],
        "safe_sink_forms": [
            {
                "kind": f.kind,
                "sink_pattern": f.sink_pattern,
                "query_arg": f.query_arg,
                "params_arg": f.params_arg,
                "placeholders": list(f.placeholders),
            }
            for f in pack.safe_sink_forms
        ],
        "structural": None if pack.structural is None else {
            "handler_decorators": list(pack.structural.handler_decorators),
            "state_methods": list(pack.structural.state_methods),
            "token_checks": list(pack.structural.token_checks),
        },
    }


def load_rulepack(path: str | Path) -> RulePack:
    path = Path(path)
    try:
        record = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise RulePackError(f"{path}: {exc}") from exc
    try:
        return rulepack_from_record(record)
    except ValueError as exc:
        raise RulePackError(f"{path}: {exc}") from exc


# --- registry -----------------------------------------------------------------


def _builtin_packs() -> dict[int, RulePack]:
    packs = {}
    for entry in resources.files("rewardengine.rulepacks").iterdir():
        if entry.name.endswith(".json"):
            pack = rulepack_from_record(json.loads(entry.read_text(encoding="utf-8")))
            packs[pack.cwe] = pack
    return packs


class DetectorRegistry:
    """Immutable after startup: built-in packs plus optional extension packs
    loaded from a directory. Extensions shadow built-ins by CWE id with a
    logged warning."""

    def __init__(self, extension_dir: str | Path | None = None):
        self._packs = _builtin_packs()
        if extension_dir is not None:
            for path in sorted(Path(extension_dir).glob("*.json")):
                pack = load_rulepack(path)
                if pack.cwe in self._packs:
                    logger.warning("extension pack %s shadows built-in CWE-%d",
                                   path.name, pack.cwe)
                self._packs[pack.cwe] = pack

    def cwe_ids(self) -> list[CweId]:
        return [CweId(c, p.name) for c, p in sorted(self._packs.items())]

    def known(self) -> list[int]:
        return sorted(self._packs)

    def pack(self, cwe: int) -> RulePack:
        try:
            return self._packs[cwe]
        except KeyError:
            raise UnknownCweError(cwe, self.known()) from None


# --- structural (CSRF-style) detection ---------------------------------------


def _decorator_chain(dec: ast.expr) -> tuple[str, ...]:
    if isinstance(dec, ast.Call):
        return call_name_chain(dec.func)
    return call_name_chain(dec)


def _is_state_changing(dec: ast.expr, rule: StructuralRule) -> bool:
    chain = _decorator_chain(dec)
    matched = any(chain_matches(tuple(p.split(".")), chain)
                  for p in rule.handler_decorators)
    if not matched:
        return False
    # bare @app.post / @router.delete style: the name itself implies the verb
    if chain and chain[-1].upper() in rule.state_methods:
        return True
    if isinstance(dec, ast.Call):
        for kw in dec.keywords:
            if kw.arg == "methods" and isinstance(kw.value, (ast.List, ast.Tuple, ast.Set)):
                for elt in kw.value.elts:
                    if isinstance(elt, ast.Constant) and str(elt.value).upper() in rule.state_methods:
                        return True
    return False


def _has_token_check(fn: ast.AST, rule: StructuralRule) -> bool:
    patterns = [tuple(p.split(".")) for p in rule.token_checks]
    for node in ast.walk(fn):
        chain: tuple[str, ...] | None = None
        if isinstance(node, ast.Call):
            chain = call_name_chain(node.func)
        elif isinstance(node, (ast.Name, ast.Attribute)):
            chain = call_name_chain(node)
        if chain and any(chain_matches(p, chain) for p in patterns):
            return True
    return False


def structural_findings(tree: ast.Module, pack: RulePack) -> list[Finding]:
    rule = pack.structural
    if rule is None:
        return []
    findings = []
    for node in ast.walk(tree):
        if not isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            continue
        state_changing = any(_is_state_changing(d, rule) for d in node.decorator_list)
        if state_changing and not _has_token_check(node, rule):
            findings.append(Finding(
                kind="vulnerability",
                cwe=pack.cwe,
                message=f"CWE-{pack.cwe} ({pack.name}): state-changing handler "
                        f"{node.name!r} has no token check",
                line=node.lineno,
                col=node.col_offset,
            ))
    findings.sort(key=Finding.sort_key)
    return findings


# --- dispatch -----------------------------------------------------------------


def detect(candidate: CandidateProgram, cwe_tags: list[int],
           registry: DetectorRegistry,
           parsed: ParsedModule | None = None) -> list[Finding]:
    """Union of the per-pack findings for the requested CWE tags, in a
    deterministic order. The candidate must parse; callers handle
    SyntaxFailure upstream."""
    if parsed is None:
        result = parse(candidate.source)
        if isinstance(result, SyntaxFailure):
            raise ValueError(
                f"candidate {candidate.candidate_id!r} does not parse: {result.message}")
        parsed = result
    packs = [registry.pack(c) for c in cwe_tags]
    if not packs:
        return []
    module = to_ssa_module(parsed.tree)
    findings: list[Finding] = []
    for pack in packs:
        if pack.sinks:
            findings.extend(analyze_module(module, pack))
        findings.extend(structural_findings(parsed.tree, pack))
    findings.sort(key=Finding.sort_key)
    return findings

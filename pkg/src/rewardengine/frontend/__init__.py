"""Parsing, control-flow graph construction, and SSA conversion."""

from rewardengine.frontend.syntax import ParsedModule, SyntaxFailure, parse
from rewardengine.frontend.cfg import Cfg, Edge, ModuleCfgs, build_cfgs
from rewardengine.frontend.ssa import SsaFunction, SsaModule, Version, to_ssa, to_ssa_module

__all__ = [
    "ParsedModule",
    "SyntaxFailure",
    "parse",
    "Cfg",
    "Edge",
    "ModuleCfgs",
    "build_cfgs",
    "SsaFunction",
    "SsaModule",
    "Version",
    "to_ssa",
    "to_ssa_module",
]

import sys
from pathlib import Path

import pytest

from rewardengine.detectors import DetectorRegistry
from rewardengine.frontend.cfg import build_cfgs
from rewardengine.frontend.ssa import SsaModule, to_ssa_module
from rewardengine.frontend.syntax import ParsedModule, parse
from rewardengine.harness import ResourceLimits

DATA_DIR = Path(__file__).resolve().parent / "data"
REPO_ROOT = Path(__file__).resolve().parents[1]
SHIM_PATH = REPO_ROOT / "shim" / "runner_shim.py"


@pytest.fixture(scope="session")
def registry() -> DetectorRegistry:
    return DetectorRegistry()


@pytest.fixture(scope="session")
def limits() -> ResourceLimits:
    return ResourceLimits(workers=4, shim_path=SHIM_PATH)


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA_DIR


def parse_ok(source: str) -> ParsedModule:
    parsed = parse(source)
    assert isinstance(parsed, ParsedModule), f"expected parseable source: {parsed}"
    return parsed


def ssa_of(source: str) -> SsaModule:
    return to_ssa_module(parse_ok(source).tree)


def cfg_of(source: str):
    return build_cfgs(parse_ok(source).tree)


@pytest.fixture(scope="session")
def python_exe() -> str:
    return sys.executable

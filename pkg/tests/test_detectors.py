import json

import pytest

from rewardengine.detectors import (
    DetectorRegistry, RulePackError, UnknownCweError, detect, load_rulepack,
    rulepack_from_record, rulepack_to_record, structural_findings,
)
from rewardengine.frontend.syntax import parse
from rewardengine.tasks import CandidateProgram

BUILTIN_CWES = [22, 78, 79, 89, 352]


def cand(source: str) -> CandidateProgram:
    return CandidateProgram("c", "t", source)


class TestRegistry:
    def test_builtin_cwes(self, registry):
        assert registry.known() == BUILTIN_CWES

    def test_cwe_ids_carry_names(self, registry):
        ids = {c.number: c.name for c in registry.cwe_ids()}
        assert ids[89] == "SQL Injection"
        assert str(registry.cwe_ids()[0]).startswith("CWE-")

    def test_unknown_cwe_lists_known(self, registry):
        with pytest.raises(UnknownCweError, match="CWE-9999.*CWE-22.*CWE-352"):
            registry.pack(9999)

    def test_extension_pack_loaded(self, tmp_path):
        record = rulepack_to_record(DetectorRegistry().pack(89))
        record["cwe"] = 943
        record["name"] = "Query Injection (generic)"
        (tmp_path / "cwe-943.json").write_text(json.dumps(record))
        registry = DetectorRegistry(extension_dir=tmp_path)
        assert 943 in registry.known()
        src = "q = input()\ncur.execute('x' + q)\n"
        assert detect(cand(src), [943], registry)

    def test_extension_shadows_builtin_with_warning(self, tmp_path, caplog):
        record = rulepack_to_record(DetectorRegistry().pack(89))
        record["sources"] = []  # neutered pack
        (tmp_path / "cwe-89.json").write_text(json.dumps(record))
        with caplog.at_level("WARNING"):
            registry = DetectorRegistry(extension_dir=tmp_path)
        assert "shadows built-in CWE-89" in caplog.text
        src = "q = input()\ncur.execute('x' + q)\n"
        assert detect(cand(src), [89], registry) == []


class TestRulePackIo:
    def test_round_trip_all_builtins(self, registry):
        for cwe in BUILTIN_CWES:
            pack = registry.pack(cwe)
            assert rulepack_from_record(rulepack_to_record(pack)) == pack

    def test_malformed_file(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(RulePackError):
            load_rulepack(path)

    def test_missing_required_field(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"name": "x", "sinks": [{"pattern": "run"}]}))
        with pytest.raises(RulePackError, match="malformed"):
            load_rulepack(path)

    def test_empty_sink_pattern_rejected(self):
        with pytest.raises(RulePackError, match="empty pattern"):
            rulepack_from_record(
                {"cwe": 1, "name": "x", "sinks": [{"pattern": ""}]})

    def test_degenerate_pack_rejected(self):
        with pytest.raises(RulePackError, match="can never fire"):
            rulepack_from_record({"cwe": 1, "name": "x", "sinks": []})


class TestDispatch:
    def test_multi_cwe_union(self, registry):
        src = (
            "import os\n"
            "x = input()\n"
            "os.system('ping ' + x)\n"
            "cur.execute('q' + x)\n"
        )
        both = detect(cand(src), [78, 89], registry)
        assert {f.cwe for f in both} == {78, 89}
        only78 = detect(cand(src), [78], registry)
        assert {f.cwe for f in only78} == {78}

    def test_additive_over_packs(self, registry):
        src = "x = input()\nos.system('a' + x)\ncur.execute('b' + x)\n"
        assert len(detect(cand(src), [78, 89], registry)) == (
            len(detect(cand(src), [78], registry))
            + len(detect(cand(src), [89], registry)))

    def test_unparseable_candidate_rejected(self, registry):
        with pytest.raises(ValueError, match="does not parse"):
            detect(cand("def broken(:"), [89], registry)

    def test_empty_tag_list_is_empty(self, registry):
        assert detect(cand("x = 1\n"), [], registry) == []

    def test_finding_records_are_json_safe(self, registry):
        src = "q = input()\ncur.execute('x' + q)\n"
        for finding in detect(cand(src), [89], registry):
            assert json.dumps(finding.to_record())


class TestStructural:
    def _findings(self, source: str, registry):
        return structural_findings(parse(source).tree, registry.pack(352))

    def test_post_handler_without_check(self, registry):
        src = (
            "@app.route('/x', methods=['POST'])\n"
            "def submit():\n    save()\n"
        )
        (finding,) = self._findings(src, registry)
        assert finding.cwe == 352
        assert "submit" in finding.message

    def test_verb_named_decorator(self, registry):
        src = "@router.delete('/x')\ndef drop():\n    erase()\n"
        assert len(self._findings(src, registry)) == 1

    def test_get_handler_silent(self, registry):
        src = "@app.route('/x')\ndef view():\n    return page()\n"
        assert self._findings(src, registry) == []

    def test_token_check_suppresses(self, registry):
        src = (
            "@app.route('/x', methods=['POST'])\n"
            "def submit():\n"
            "    validate_csrf(request.form['token'])\n"
            "    save()\n"
        )
        assert self._findings(src, registry) == []

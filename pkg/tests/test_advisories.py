import json

import pytest
from hypothesis import given, strategies as st

from argus.advisories import (
    CommunityIssue,
    OfflineFixtureTransport,
    Severity,
    aggregate_score,
    credibility_score,
    gate_finding,
    quality_score,
    query_authoritative,
    relevance_score,
    retrieve_community,
    severity_from_cvss,
    version_in_range,
)
from argus.deps import DependencyRecord, Ecosystem
from argus.errors import InvalidWeightsError
from tests.conftest import fixture_path


def issue(body="", title="", comments=0, cve=False, repo="primary", url=""):
    return CommunityIssue(title=title, body=body, comment_count=comments,
                          cve_linked=cve, repo=repo, url=url)


# --- relevance ---------------------------------------------------------------


def test_relevance_speculative_plus_security():
    assert relevance_score(issue("potential vulnerability in XML parser")) == 1.0


def test_relevance_cve_linked_penalty():
    assert relevance_score(issue("crash when loading file", cve=True)) == pytest.approx(0.4)


def test_relevance_empty_body_is_initial():
    assert relevance_score(issue("")) == 0.5


def test_relevance_whole_word_matching():
    # "potentially" must not trigger the whole-word "potential" rule
    assert relevance_score(issue("potentially broken parser")) == 0.5


def test_relevance_clamped_to_unit_interval():
    low = relevance_score(issue("", cve=True))
    assert 0.0 <= low <= 1.0


# --- credibility -------------------------------------------------------------


def test_credibility_zero_comments():
    assert credibility_score(issue(comments=0)) == pytest.approx(0.3)


def test_credibility_six_comments_hits_cap():
    assert credibility_score(issue(comments=6)) == pytest.approx(0.6)


def test_credibility_hundred_comments_capped():
    assert credibility_score(issue(comments=100)) == pytest.approx(0.6)


def test_credibility_exact_formula_range():
    for n in range(201):
        expected = 0.3 + min(n * 0.05, 0.3)
        assert abs(credibility_score(issue(comments=n)) - expected) < 1e-12


@given(st.integers(min_value=0, max_value=500), st.integers(min_value=0, max_value=500))
def test_credibility_monotone(a, b):
    ca, cb = credibility_score(issue(comments=a)), credibility_score(issue(comments=b))
    if a <= b:
        assert ca <= cb
    if a >= 6 and b >= 6:
        assert ca == cb == pytest.approx(0.6)


# --- quality -----------------------------------------------------------------


def test_quality_empty_body_zero():
    assert quality_score(issue("")) == 0.0


def test_quality_full_marks():
    body = (
        "A crafted payload reaches the parser and causes remote code execution. "
        "The injection path is clear from the stack trace. "
        + "x" * 420
        + "\n```java\nparser.parse(input);\n```\nProposed fix: validate the input."
    )
    assert len(body) >= 500
    assert quality_score(issue(body)) == pytest.approx(1.0)


def test_quality_prose_fixture_scores_04():
    with open(fixture_path("issue_prose.json"), "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    prose = CommunityIssue(**raw)
    assert quality_score(prose) == pytest.approx(0.4)


def test_quality_in_unit_interval():
    for body in ("", "short", "payload " * 100, "```\ncode\n```"):
        assert 0.0 <= quality_score(issue(body)) <= 1.0


# --- gate --------------------------------------------------------------------


def test_aggregate_worked_example():
    agg = aggregate_score(1.0, 0.6, 1.0)
    assert agg == pytest.approx(0.8667, abs=1e-4)
    assert agg >= 0.5


def test_aggregate_floor_from_credibility_alone():
    assert aggregate_score(0.0, 0.3, 0.0) == pytest.approx(0.1)


def test_gate_threshold_zero_passes_everything():
    finding = gate_finding(issue(""), threshold=0.0)
    assert finding.passed_gate


def test_gate_invalid_weights():
    with pytest.raises(InvalidWeightsError):
        aggregate_score(0.5, 0.5, 0.5, weights=(0.5, 0.5, 0.5))


def test_gate_scores_are_deterministic():
    i = issue("potential vulnerability payload injection", comments=3)
    assert gate_finding(i) == gate_finding(i)


# --- severity / versions -----------------------------------------------------


def test_severity_normalization_thresholds():
    assert severity_from_cvss(9.8) == Severity.CRITICAL
    assert severity_from_cvss(7.0) == Severity.HIGH
    assert severity_from_cvss(5.0) == Severity.MEDIUM
    assert severity_from_cvss(1.2) == Severity.LOW
    assert severity_from_cvss(None) == Severity.UNKNOWN


def test_version_range_checks():
    assert version_in_range("5.2.0", "<5.2.1") is True
    assert version_in_range("5.2.1", "<5.2.1") is False
    assert version_in_range("2.0", ">=1.0,<3.0") is True
    assert version_in_range("5.2.0", "*") is True
    assert version_in_range("not-a-version", "<1.0") is None


# --- retrieval ---------------------------------------------------------------


def poi_dep():
    return DependencyRecord(Ecosystem.MAVEN, "org.apache.poi:poi-ooxml", "5.2.0")


def test_offline_fixture_hit():
    transport = OfflineFixtureTransport(fixture_path("publiccms_mini", "advisories"))
    records = query_authoritative(poi_dep(), transport)
    assert [r.cve_id for r in records] == ["CVE-2025-31672"]
    assert records[0].severity == Severity.HIGH


def test_offline_fixture_miss_is_empty():
    transport = OfflineFixtureTransport(fixture_path("publiccms_mini", "advisories"))
    dep = DependencyRecord(Ecosystem.MAVEN, "com.absent:lib", "1.0")
    assert query_authoritative(dep, transport) == []


def test_version_filter_excludes_unaffected():
    transport = OfflineFixtureTransport(fixture_path("publiccms_mini", "advisories"))
    dep = DependencyRecord(Ecosystem.MAVEN, "org.apache.poi:poi-ooxml", "5.2.1")
    assert query_authoritative(dep, transport) == []


def test_duplicate_identifiers_merge(tmp_path):
    record = {"identifier": "GHSA-xxxx", "description": "d", "severity": "high"}
    for source in ("NVD", "GHSA"):
        (tmp_path / f"{source}__a__b.json").write_text(json.dumps([record]))
    transport = OfflineFixtureTransport(str(tmp_path))
    dep = DependencyRecord(Ecosystem.MAVEN, "a:b", "1.0")
    warnings = []
    records = query_authoritative(dep, transport, warnings=warnings)
    assert len(records) == 1
    assert warnings == []


def test_merge_order_independent(tmp_path):
    # same records scattered across sources in different files: output sorted
    (tmp_path / "NVD__a__b.json").write_text(json.dumps([
        {"identifier": "CVE-2", "severity": "low"},
        {"identifier": "CVE-1", "severity": "critical"},
    ]))
    (tmp_path / "OSV__a__b.json").write_text(json.dumps([
        {"identifier": "CVE-3", "severity": "high"},
    ]))
    transport = OfflineFixtureTransport(str(tmp_path))
    dep = DependencyRecord(Ecosystem.MAVEN, "a:b", "1.0")
    ids = [r.identifier for r in query_authoritative(dep, transport)]
    assert ids == ["CVE-1", "CVE-3", "CVE-2"]


def test_community_hierarchical_order():
    transport = OfflineFixtureTransport(fixture_path("community"))
    dep = DependencyRecord(Ecosystem.MAVEN, "org.datagear:datagear-analysis", "4.6.0")
    issues = retrieve_community(dep, transport)
    assert [i.repo for i in issues] == ["primary", "fork/acme"]


def test_community_cve_linked_first_within_repo(tmp_path):
    rows = [
        {"title": "a", "body": "", "repo": "primary", "cve_linked": False,
         "url": "u1", "comment_count": 0},
        {"title": "b", "body": "", "repo": "primary", "cve_linked": True,
         "url": "u2", "comment_count": 0},
    ]
    (tmp_path / "community__a__b.json").write_text(json.dumps(rows))
    transport = OfflineFixtureTransport(str(tmp_path))
    dep = DependencyRecord(Ecosystem.MAVEN, "a:b", "1.0")
    issues = retrieve_community(dep, transport)
    assert [i.url for i in issues] == ["u2", "u1"]

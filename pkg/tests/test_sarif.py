import json

import pytest

from argus.engine import import_sarif
from argus.errors import SarifError
from argus.model import load_program_graph, validate_flow
from tests.conftest import fixture_path


@pytest.fixture
def graph():
    return load_program_graph(fixture_path("sarif", "graph.json"))


def test_three_step_thread_flow_maps_to_one_flow(graph):
    result = import_sarif(fixture_path("sarif", "results.sarif"), graph)
    assert len(result.flows) == 1
    flow = result.flows[0]
    assert flow.edge_ids == ("e1", "e2")
    assert flow.source == "s1"
    assert flow.sink == "s3"
    assert validate_flow(flow, graph).ok


def test_unmappable_location_skips_whole_flow(graph):
    result = import_sarif(fixture_path("sarif", "results.sarif"), graph)
    assert len(result.skipped) == 1
    assert "app/other.py" in result.skipped[0]


def test_empty_sarif_yields_nothing(graph):
    result = import_sarif(fixture_path("sarif", "empty.sarif"), graph)
    assert result.flows == []
    assert result.skipped == []


def test_unsupported_version_raises(graph, tmp_path):
    path = tmp_path / "old.sarif"
    path.write_text(json.dumps({"version": "2.0.0", "runs": []}))
    with pytest.raises(SarifError):
        import_sarif(str(path), graph)


def test_malformed_sarif_raises(graph, tmp_path):
    path = tmp_path / "bad.sarif"
    path.write_text("{")
    with pytest.raises(SarifError):
        import_sarif(str(path), graph)


def test_missing_region_skips_with_diagnostic(graph, tmp_path):
    doc = {
        "version": "2.1.0",
        "runs": [{"results": [{"codeFlows": [{"threadFlows": [{
            "locations": [
                {"location": {"physicalLocation": {
                    "artifactLocation": {"uri": "app/handler.py"}}}},
            ]}]}]}]}],
    }
    path = tmp_path / "r.sarif"
    path.write_text(json.dumps(doc))
    result = import_sarif(str(path), graph)
    assert result.flows == []
    assert any("uri/startLine" in s for s in result.skipped)


def test_adjacent_nodes_without_edge_skip(graph, tmp_path):
    # s1 -> s3 directly: both anchors resolve but no graph edge joins them
    def loc(line):
        return {"location": {"physicalLocation": {
            "artifactLocation": {"uri": "app/handler.py"},
            "region": {"startLine": line}}}}

    doc = {
        "version": "2.1.0",
        "runs": [{"results": [{"codeFlows": [{"threadFlows": [{
            "locations": [loc(11), loc(31)]}]}]}]}],
    }
    path = tmp_path / "r.sarif"
    path.write_text(json.dumps(doc))
    result = import_sarif(str(path), graph)
    assert result.flows == []
    assert any("no edge" in s for s in result.skipped)

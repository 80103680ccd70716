"""Forward taint search and SARIF import.

The built-in engine enumerates simple paths (no repeated node) from
source nodes to target sinks over visible edges, pruning at sanitizer
nodes. Output order is deterministic: flows sort lexicographically by
their edge-id tuple, capped per sink.

External analyzers integrate through SARIF 2.1.0 code flows; thread-flow
locations are resolved to content nodes via the graph's anchor table.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Union

from argus.errors import SarifError, UnknownSinkError
from argus.model import (
    DEFAULT_MAX_FLOW_LENGTH,
    DataFlow,
    FlowOrigin,
    FlowTriple,
    ProgramGraph,
    TaintRole,
    validate_flow,
)

DEFAULT_MAX_FLOWS_PER_SINK = 32


@dataclass(frozen=True)
class FlowQuery:
    sinks: tuple[str, ...]
    source_ids: Optional[tuple[str, ...]] = None
    source_kind: Optional[str] = None
    max_length: int = DEFAULT_MAX_FLOW_LENGTH
    max_flows_per_sink: int = DEFAULT_MAX_FLOWS_PER_SINK
    respect_visibility: bool = True

    def __post_init__(self):
        if self.max_length < 1:
            raise ValueError("max_length must be >= 1")
        if self.max_flows_per_sink < 1:
            raise ValueError("max_flows_per_sink must be >= 1")


def select_sources(graph: ProgramGraph, query: FlowQuery) -> list[str]:
    if query.source_ids is not None:
        return sorted(query.source_ids)
    sources = graph.nodes_by_role(TaintRole.SOURCE)
    if query.source_kind is not None:
        sources = [n for n in sources if n.source_kind == query.source_kind]
    return [n.id for n in sources]


def forward_search(graph: ProgramGraph, query: FlowQuery) -> list[DataFlow]:
    """Enumerate taint flows from sources to each queried sink.

    Raises :class:`UnknownSinkError` for sink ids absent from the graph.
    Flows never pass through sanitizer nodes, use only forward-visible
    edges when ``respect_visibility`` is set, and have fewer than
    ``max_length`` triples.
    """
    for sink in query.sinks:
        if sink not in graph.nodes:
            raise UnknownSinkError(sink)
    sources = select_sources(graph, query)
    out: list[DataFlow] = []
    for sink in sorted(query.sinks):
        paths: list[tuple[FlowTriple, ...]] = []
        for source in sources:
            if source == sink:
                continue
            _enumerate_paths(graph, source, sink, query, [], {source}, paths)
        paths.sort(key=lambda p: tuple(t.edge.id for t in p))
        for p in paths[: query.max_flows_per_sink]:
            out.append(DataFlow(triples=p, origin=FlowOrigin.FORWARD,
                                max_length_bound=query.max_length))
    return out


def _enumerate_paths(
    graph: ProgramGraph,
    current: str,
    sink: str,
    query: FlowQuery,
    prefix: list[FlowTriple],
    visited: set[str],
    paths: list[tuple[FlowTriple, ...]],
) -> None:
    if len(prefix) >= query.max_length - 1:
        return
    for edge in graph.outgoing(current):
        if query.respect_visibility and not edge.visible_to_forward:
            continue
        nxt = edge.dst
        if nxt in visited:
            continue
        triple = FlowTriple(current, edge, nxt)
        if nxt == sink:
            paths.append(tuple(prefix + [triple]))
            continue
        if graph.nodes[nxt].taint_role == TaintRole.SANITIZER:
            continue
        visited.add(nxt)
        prefix.append(triple)
        _enumerate_paths(graph, nxt, sink, query, prefix, visited, paths)
        prefix.pop()
        visited.remove(nxt)


# ---------------------------------------------------------------------------
# SARIF import


@dataclass
class SarifImportResult:
    flows: list[DataFlow] = field(default_factory=list)
    skipped: list[str] = field(default_factory=list)


def import_sarif(
    path: str,
    graph: ProgramGraph,
    *,
    max_length: int = DEFAULT_MAX_FLOW_LENGTH,
) -> SarifImportResult:
    """Map SARIF thread flows onto graph nodes via the anchor table.

    Each location must resolve through a (file, line-range) anchor and
    consecutive nodes must be joined by a graph edge; otherwise the whole
    flow is skipped with a diagnostic, never emitted partially.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise SarifError(f"{path}: cannot parse SARIF: {exc}") from exc
    version = doc.get("version")
    if version != "2.1.0":
        raise SarifError(f"{path}: unsupported SARIF version {version!r}")

    result = SarifImportResult()
    for run in doc.get("runs", []):
        for res in run.get("results", []):
            for code_flow in res.get("codeFlows", []):
                for thread_flow in code_flow.get("threadFlows", []):
                    _import_thread_flow(thread_flow, graph, max_length, result)
    return result


def _resolve_anchor(graph: ProgramGraph, uri: str, line: int) -> Optional[str]:
    for anchor in graph.anchors:
        if anchor.file == uri and anchor.start_line <= line <= anchor.end_line:
            return anchor.node_id
    return None


def _import_thread_flow(
    thread_flow: dict,
    graph: ProgramGraph,
    max_length: int,
    result: SarifImportResult,
) -> None:
    node_ids: list[str] = []
    for loc in thread_flow.get("locations", []):
        phys = loc.get("location", {}).get("physicalLocation", loc.get("physicalLocation", {}))
        uri = phys.get("artifactLocation", {}).get("uri")
        line = phys.get("region", {}).get("startLine")
        if uri is None or line is None:
            result.skipped.append("thread flow skipped: location lacks uri/startLine")
            return
        node_id = _resolve_anchor(graph, uri, int(line))
        if node_id is None:
            result.skipped.append(
                f"thread flow skipped: no anchor for {uri}:{line}"
            )
            return
        node_ids.append(node_id)
    if len(node_ids) < 2:
        if node_ids:
            result.skipped.append("thread flow skipped: fewer than two resolvable steps")
        return
    triples: list[FlowTriple] = []
    for a, b in zip(node_ids, node_ids[1:]):
        edges = [e for e in graph.outgoing(a) if e.dst == b]
        if not edges:
            result.skipped.append(
                f"thread flow skipped: no edge between {a!r} and {b!r}"
            )
            return
        triples.append(FlowTriple(a, edges[0], b))
    flow = DataFlow(triples=tuple(triples), origin=FlowOrigin.FORWARD,
                    max_length_bound=max_length)
    verdict = validate_flow(flow, graph)
    if not verdict.ok:
        result.skipped.append(
            "thread flow skipped: imported flow fails validation: "
            + "; ".join(verdict.violations)
        )
        return
    result.flows.append(flow)

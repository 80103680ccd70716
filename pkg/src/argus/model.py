"""Program-graph data model and the data-flow type.

The graph is a language-neutral description of a codebase: content nodes
(variables, parameters, fields, collection slots, call arguments/returns),
access-path edges recording how content propagates between them, function
declarations, and call edges. A data flow is an ordered list of
(from_node, edge, to_node) triples whose consecutive endpoints chain
together; the flow length is strictly bounded by the configured maximum.

Graphs are immutable after load and safe for concurrent reads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from argus.errors import GraphIntegrityError, GraphParseError

FORMAT_VERSION = "1"

DEFAULT_MAX_FLOW_LENGTH = 64


class NodeKind(str, Enum):
    VARIABLE = "variable"
    PARAMETER = "parameter"
    FIELD = "field"
    COLLECTION_ELEMENT = "collection-element"
    CALL_ARGUMENT = "call-argument"
    CALL_RETURN = "call-return"


class TaintRole(str, Enum):
    NONE = "none"
    SOURCE = "source"
    SINK = "sink"
    SANITIZER = "sanitizer"


class EdgeKind(str, Enum):
    ASSIGN = "assign"
    CALL_PASS = "call-pass"
    RETURN = "return"
    FIELD_WRITE = "field-write"
    FIELD_READ = "field-read"
    COLLECTION_PUT = "collection-put"
    COLLECTION_GET = "collection-get"


@dataclass(frozen=True)
class ContentNode:
    id: str
    kind: NodeKind
    label: str
    function_id: Optional[str] = None
    taint_role: TaintRole = TaintRole.NONE
    source_kind: Optional[str] = None
    sink_kind: Optional[str] = None

    def __post_init__(self):
        if self.taint_role == TaintRole.SANITIZER and (self.source_kind or self.sink_kind):
            raise GraphIntegrityError(
                f"sanitizer node {self.id!r} must not carry source_kind/sink_kind",
                self.id,
            )


@dataclass(frozen=True)
class AccessPathEdge:
    id: str
    src: str
    dst: str
    kind: EdgeKind
    visible_to_forward: bool = True
    guard_tags: frozenset[str] = frozenset()
    # Synthesized edges bridging a caller-tree gap; never present in graph
    # documents, only in stitched flows and reports.
    bridged: bool = False

    def __post_init__(self):
        if self.src == self.dst and self.kind != EdgeKind.ASSIGN:
            raise GraphIntegrityError(
                f"edge {self.id!r}: self-loop only permitted for assign edges",
                self.id,
            )


@dataclass(frozen=True)
class FunctionDecl:
    id: str
    name: str
    parameters: tuple[str, ...] = ()
    return_node: Optional[str] = None
    is_entry_point: bool = False


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    call_site_node: str


@dataclass(frozen=True)
class Anchor:
    """Maps a (file, line range) region onto a content node.

    Used to resolve SARIF locations back into the graph.
    """

    file: str
    start_line: int
    end_line: int
    node_id: str


class ProgramGraph:
    """Immutable program graph with id-indexed lookups."""

    def __init__(
        self,
        nodes: Iterable[ContentNode],
        edges: Iterable[AccessPathEdge],
        functions: Iterable[FunctionDecl],
        call_edges: Iterable[CallEdge] = (),
        source_files: Sequence[str] = (),
        anchors: Iterable[Anchor] = (),
    ):
        self.nodes: dict[str, ContentNode] = {}
        for n in nodes:
            if n.id in self.nodes:
                raise GraphIntegrityError(f"duplicate node id {n.id!r}", n.id)
            self.nodes[n.id] = n
        self.edges: dict[str, AccessPathEdge] = {}
        for e in edges:
            if e.id in self.edges:
                raise GraphIntegrityError(f"duplicate edge id {e.id!r}", e.id)
            self.edges[e.id] = e
        self.functions: dict[str, FunctionDecl] = {}
        for f in functions:
            if f.id in self.functions:
                raise GraphIntegrityError(f"duplicate function id {f.id!r}", f.id)
            self.functions[f.id] = f
        self.call_edges: tuple[CallEdge, ...] = tuple(call_edges)
        self.source_files: tuple[str, ...] = tuple(source_files)
        self.anchors: tuple[Anchor, ...] = tuple(anchors)
        self._check_integrity()
        # Outgoing edges per node, ordered by edge id for determinism.
        self._out: dict[str, tuple[AccessPathEdge, ...]] = {}
        by_src: dict[str, list[AccessPathEdge]] = {}
        for e in self.edges.values():
            by_src.setdefault(e.src, []).append(e)
        for src, es in by_src.items():
            self._out[src] = tuple(sorted(es, key=lambda e: e.id))

    def _check_integrity(self):
        if not self.functions:
            raise GraphIntegrityError("graph declares no functions", "<functions>")
        for n in self.nodes.values():
            if n.function_id is not None and n.function_id not in self.functions:
                raise GraphIntegrityError(
                    f"node {n.id!r} references unknown function {n.function_id!r}",
                    n.function_id,
                )
        for e in self.edges.values():
            for endpoint in (e.src, e.dst):
                if endpoint not in self.nodes:
                    raise GraphIntegrityError(
                        f"edge {e.id!r} references unknown node {endpoint!r}", endpoint
                    )
        for f in self.functions.values():
            seen: set[str] = set()
            for pid in f.parameters:
                node = self.nodes.get(pid)
                if node is None:
                    raise GraphIntegrityError(
                        f"function {f.id!r} references unknown parameter {pid!r}", pid
                    )
                if node.kind != NodeKind.PARAMETER or node.function_id != f.id:
                    raise GraphIntegrityError(
                        f"function {f.id!r}: node {pid!r} is not a parameter it owns", pid
                    )
                if pid in seen:
                    raise GraphIntegrityError(
                        f"function {f.id!r}: duplicate parameter {pid!r}", pid
                    )
                seen.add(pid)
            if f.return_node is not None and f.return_node not in self.nodes:
                raise GraphIntegrityError(
                    f"function {f.id!r} references unknown return node", f.return_node
                )
        for ce in self.call_edges:
            if ce.caller not in self.functions:
                raise GraphIntegrityError(f"call edge caller {ce.caller!r} unknown", ce.caller)
            if ce.callee not in self.functions:
                raise GraphIntegrityError(f"call edge callee {ce.callee!r} unknown", ce.callee)
            site = self.nodes.get(ce.call_site_node)
            if site is None:
                raise GraphIntegrityError(
                    f"call edge site {ce.call_site_node!r} unknown", ce.call_site_node
                )
            if site.kind not in (NodeKind.CALL_ARGUMENT, NodeKind.CALL_RETURN):
                raise GraphIntegrityError(
                    f"call site {ce.call_site_node!r} must be a call-argument or "
                    "call-return node",
                    ce.call_site_node,
                )

    def outgoing(self, node_id: str) -> tuple[AccessPathEdge, ...]:
        return self._out.get(node_id, ())

    def nodes_by_role(self, role: TaintRole) -> list[ContentNode]:
        return sorted(
            (n for n in self.nodes.values() if n.taint_role == role),
            key=lambda n: n.id,
        )

    def with_sinks(self, sink_kinds: Mapping[str, str]) -> "ProgramGraph":
        """Return a copy with the given node ids marked as sinks.

        ``sink_kinds`` maps node id -> sink category tag. Nodes already
        marked keep their original role; sanitizers are never re-marked.
        """
        new_nodes = []
        for n in self.nodes.values():
            if n.id in sink_kinds and n.taint_role == TaintRole.NONE:
                n = replace(n, taint_role=TaintRole.SINK, sink_kind=sink_kinds[n.id])
            new_nodes.append(n)
        return ProgramGraph(
            new_nodes,
            self.edges.values(),
            self.functions.values(),
            self.call_edges,
            self.source_files,
            self.anchors,
        )


@dataclass(frozen=True)
class FlowTriple:
    from_node: str
    edge: AccessPathEdge
    to_node: str


class FlowOrigin(str, Enum):
    FORWARD = "forward"
    STITCHED = "stitched"


@dataclass(frozen=True)
class DataFlow:
    triples: tuple[FlowTriple, ...]
    origin: FlowOrigin = FlowOrigin.FORWARD
    max_length_bound: int = DEFAULT_MAX_FLOW_LENGTH

    @property
    def source(self) -> str:
        return self.triples[0].from_node

    @property
    def sink(self) -> str:
        return self.triples[-1].to_node

    @property
    def edge_ids(self) -> tuple[str, ...]:
        return tuple(t.edge.id for t in self.triples)

    @property
    def has_bridged_edge(self) -> bool:
        return any(t.edge.bridged for t in self.triples)

    def to_dict(self) -> dict:
        return {
            "origin": self.origin.value,
            "max_length_bound": self.max_length_bound,
            "triples": [
                {
                    "from": t.from_node,
                    "edge": _edge_to_dict(t.edge, include_bridged=True),
                    "to": t.to_node,
                }
                for t in self.triples
            ],
        }


@dataclass
class FlowValidation:
    ok: bool
    violations: list[str] = field(default_factory=list)


def validate_flow(
    flow: DataFlow,
    graph: ProgramGraph,
    *,
    allow_bridged: bool = False,
    require_endpoint_roles: bool = True,
) -> FlowValidation:
    """Check a flow against its graph.

    Accepts iff every triple's edge exists in the graph with matching
    endpoints, consecutive triples chain together, the length is strictly
    below the flow's bound, and the endpoints carry source/sink roles.
    With ``allow_bridged`` synthesized bridge edges are exempt from the
    existence check (their continuity still counts). Intermediate flows
    targeting surrogate nodes disable ``require_endpoint_roles``.
    """
    violations: list[str] = []
    n = len(flow.triples)
    if n == 0:
        return FlowValidation(False, ["flow has no triples (length must be >= 1)"])
    if n >= flow.max_length_bound:
        violations.append(
            f"flow length {n} violates bound {flow.max_length_bound} (need n < bound)"
        )
    for pos, t in enumerate(flow.triples, start=1):
        if t.edge.bridged:
            if not allow_bridged:
                violations.append(f"triple {pos}: bridged edge {t.edge.id!r} not permitted")
        else:
            known = graph.edges.get(t.edge.id)
            if known is None:
                violations.append(f"triple {pos}: edge {t.edge.id!r} not in graph")
            elif (known.src, known.dst) != (t.from_node, t.to_node):
                violations.append(
                    f"triple {pos}: edge {t.edge.id!r} endpoints "
                    f"({known.src!r}->{known.dst!r}) do not match triple"
                )
        if (t.edge.src, t.edge.dst) != (t.from_node, t.to_node):
            violations.append(f"triple {pos}: triple endpoints disagree with its edge")
        if t.from_node not in graph.nodes:
            violations.append(f"triple {pos}: unknown node {t.from_node!r}")
        if t.to_node not in graph.nodes:
            violations.append(f"triple {pos}: unknown node {t.to_node!r}")
        if pos >= 2 and flow.triples[pos - 2].to_node != t.from_node:
            violations.append(
                f"triple {pos}: continuity broken "
                f"({flow.triples[pos - 2].to_node!r} != {t.from_node!r})"
            )
    if require_endpoint_roles:
        src = graph.nodes.get(flow.source)
        if src is not None and src.taint_role != TaintRole.SOURCE:
            violations.append(f"first node {flow.source!r} is not a source")
        dst = graph.nodes.get(flow.sink)
        if dst is not None and dst.taint_role != TaintRole.SINK:
            violations.append(f"last node {flow.sink!r} is not a sink")
    return FlowValidation(not violations, violations)


# ---------------------------------------------------------------------------
# Interchange format


_NODE_FIELDS = {"id", "kind", "function_id", "label", "taint_role", "source_kind", "sink_kind"}
_EDGE_FIELDS = {"id", "from", "to", "kind", "visible_to_forward", "guard_tags"}
_FUNCTION_FIELDS = {"id", "name", "parameters", "return_node", "is_entry_point"}
_CALL_EDGE_FIELDS = {"caller", "callee", "call_site_node"}
_TOP_FIELDS = {"format_version", "functions", "nodes", "edges", "call_edges", "source_files", "anchors"}
_ANCHOR_FIELDS = {"file", "start_line", "end_line", "node_id"}


def _check_fields(obj: dict, allowed: set[str], what: str, strict: bool, warnings: list[str]):
    unknown = set(obj) - allowed
    if unknown:
        msg = f"{what}: unknown field(s) {sorted(unknown)}"
        if strict:
            raise GraphParseError(msg)
        warnings.append(msg)


def load_program_graph(path, *, strict: bool = True, warnings: Optional[list[str]] = None) -> ProgramGraph:
    """Load and validate a program-graph JSON document.

    Raises :class:`GraphParseError` for malformed documents and
    :class:`GraphIntegrityError` (naming the offending id) for dangling or
    duplicate references. In lenient mode unknown fields are appended to
    ``warnings`` instead of rejected.
    """
    if warnings is None:
        warnings = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise GraphParseError(f"{path}: not valid JSON: {exc}") from exc
    return graph_from_dict(doc, strict=strict, warnings=warnings)


def graph_from_dict(doc: dict, *, strict: bool = True, warnings: Optional[list[str]] = None) -> ProgramGraph:
    if warnings is None:
        warnings = []
    if not isinstance(doc, dict):
        raise GraphParseError("graph document must be a JSON object")
    if doc.get("format_version") != FORMAT_VERSION:
        raise GraphParseError(
            f"unsupported or missing format_version (expected {FORMAT_VERSION!r})"
        )
    _check_fields(doc, _TOP_FIELDS, "document", strict, warnings)
    try:
        nodes = []
        for raw in doc.get("nodes", []):
            _check_fields(raw, _NODE_FIELDS, f"node {raw.get('id')!r}", strict, warnings)
            nodes.append(
                ContentNode(
                    id=str(raw["id"]),
                    kind=NodeKind(raw["kind"]),
                    label=str(raw.get("label", "")),
                    function_id=raw.get("function_id"),
                    taint_role=TaintRole(raw.get("taint_role", "none")),
                    source_kind=raw.get("source_kind"),
                    sink_kind=raw.get("sink_kind"),
                )
            )
        edges = []
        for raw in doc.get("edges", []):
            _check_fields(raw, _EDGE_FIELDS, f"edge {raw.get('id')!r}", strict, warnings)
            edges.append(
                AccessPathEdge(
                    id=str(raw["id"]),
                    src=str(raw["from"]),
                    dst=str(raw["to"]),
                    kind=EdgeKind(raw["kind"]),
                    visible_to_forward=bool(raw.get("visible_to_forward", True)),
                    guard_tags=frozenset(raw.get("guard_tags", [])),
                )
            )
        functions = []
        for raw in doc.get("functions", []):
            _check_fields(raw, _FUNCTION_FIELDS, f"function {raw.get('id')!r}", strict, warnings)
            functions.append(
                FunctionDecl(
                    id=str(raw["id"]),
                    name=str(raw.get("name", raw["id"])),
                    parameters=tuple(raw.get("parameters", [])),
                    return_node=raw.get("return_node"),
                    is_entry_point=bool(raw.get("is_entry_point", False)),
                )
            )
        call_edges = []
        for raw in doc.get("call_edges", []):
            _check_fields(raw, _CALL_EDGE_FIELDS, "call edge", strict, warnings)
            call_edges.append(
                CallEdge(
                    caller=str(raw["caller"]),
                    callee=str(raw["callee"]),
                    call_site_node=str(raw["call_site_node"]),
                )
            )
        anchors = []
        for raw in doc.get("anchors", []):
            _check_fields(raw, _ANCHOR_FIELDS, "anchor", strict, warnings)
            anchors.append(
                Anchor(
                    file=str(raw["file"]),
                    start_line=int(raw["start_line"]),
                    end_line=int(raw["end_line"]),
                    node_id=str(raw["node_id"]),
                )
            )
    except KeyError as exc:
        raise GraphParseError(f"missing required field {exc.args[0]!r}") from exc
    except ValueError as exc:
        raise GraphParseError(f"invalid enum or numeric value: {exc}") from exc
    return ProgramGraph(
        nodes,
        edges,
        functions,
        call_edges,
        source_files=doc.get("source_files", []),
        anchors=anchors,
    )


def _edge_to_dict(e: AccessPathEdge, *, include_bridged: bool = False) -> dict:
    out = {
        "id": e.id,
        "from": e.src,
        "to": e.dst,
        "kind": e.kind.value,
        "visible_to_forward": e.visible_to_forward,
        "guard_tags": sorted(e.guard_tags),
    }
    if include_bridged and e.bridged:
        out["bridged"] = True
    return out


def graph_to_dict(graph: ProgramGraph) -> dict:
    """Serialize back to the interchange format (lexicographic id order)."""
    return {
        "format_version": FORMAT_VERSION,
        "source_files": list(graph.source_files),
        "functions": [
            {
                "id": f.id,
                "name": f.name,
                "parameters": list(f.parameters),
                "return_node": f.return_node,
                "is_entry_point": f.is_entry_point,
            }
            for f in sorted(graph.functions.values(), key=lambda f: f.id)
        ],
        "nodes": [
            {
                "id": n.id,
                "kind": n.kind.value,
                "function_id": n.function_id,
                "label": n.label,
                "taint_role": n.taint_role.value,
                "source_kind": n.source_kind,
                "sink_kind": n.sink_kind,
            }
            for n in sorted(graph.nodes.values(), key=lambda n: n.id)
        ],
        "edges": [
            _edge_to_dict(e)
            for e in sorted(graph.edges.values(), key=lambda e: e.id)
        ],
        "call_edges": [
            {"caller": c.caller, "callee": c.callee, "call_site_node": c.call_site_node}
            for c in sorted(
                graph.call_edges, key=lambda c: (c.caller, c.callee, c.call_site_node)
            )
        ],
        "anchors": [
            {
                "file": a.file,
                "start_line": a.start_line,
                "end_line": a.end_line,
                "node_id": a.node_id,
            }
            for a in sorted(graph.anchors, key=lambda a: (a.file, a.start_line, a.node_id))
        ],
    }

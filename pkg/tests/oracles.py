"""Independent brute-force oracles used to cross-check the engine.

Deliberately written against the raw graph structures, not via the
engine's traversal helpers, so a bug cannot hide in shared code.
"""

from argus.model import ProgramGraph, TaintRole


def brute_force_paths(
    graph: ProgramGraph,
    source: str,
    sink: str,
    max_length: int,
    respect_visibility: bool = True,
):
    """All simple edge-id paths source -> sink with < max_length edges.

    Sanitizer nodes are never entered; the sink terminates a path.
    Returns a set of edge-id tuples.
    """
    edges_by_src = {}
    for e in graph.edges.values():
        if respect_visibility and not e.visible_to_forward:
            continue
        edges_by_src.setdefault(e.src, []).append(e)

    results = set()

    def walk(node, used_nodes, path):
        if len(path) >= max_length - 1:
            return
        for e in edges_by_src.get(node, []):
            if e.dst == sink:
                results.add(tuple(path + [e.id]))
                continue
            if e.dst in used_nodes:
                continue
            if graph.nodes[e.dst].taint_role == TaintRole.SANITIZER:
                continue
            walk(e.dst, used_nodes | {e.dst}, path + [e.id])

    if source != sink:
        walk(source, {source}, [])
    return results


def brute_force_all(graph: ProgramGraph, sinks, max_length, respect_visibility=True):
    """Union over all source nodes, keyed per sink."""
    sources = [n.id for n in graph.nodes.values() if n.taint_role == TaintRole.SOURCE]
    out = {}
    for sink in sinks:
        acc = set()
        for src in sources:
            acc |= brute_force_paths(graph, src, sink, max_length, respect_visibility)
        out[sink] = acc
    return out


def sum_transcript_tokens(path):
    """Independent token summation over a transcript JSONL file."""
    import json

    prompt = completion = 0
    with open(path, "r", encoding="utf-8") as fh:
        lines = [l for l in fh if l.strip()]
    for line in lines[1:]:  # skip header
        row = json.loads(line)
        if row["role"] == "assistant":
            completion += row.get("token_count", 0)
        else:
            prompt += row.get("token_count", 0)
    return prompt, completion

"""Supply-chain-aware static taint analysis orchestrator.

The package wires together dependency scanning, advisory retrieval and
scoring, agent-driven proof-of-concept generation, forward data-flow
search with backward caller-tree recovery, and rule/LLM review into a
single reporting pipeline over a language-neutral program graph.
"""

from argus.model import (
    AccessPathEdge,
    CallEdge,
    ContentNode,
    DataFlow,
    FlowTriple,
    FunctionDecl,
    ProgramGraph,
    load_program_graph,
    validate_flow,
)

__version__ = "0.1.0"

__all__ = [
    "AccessPathEdge",
    "CallEdge",
    "ContentNode",
    "DataFlow",
    "FlowTriple",
    "FunctionDecl",
    "ProgramGraph",
    "load_program_graph",
    "validate_flow",
    "__version__",
]

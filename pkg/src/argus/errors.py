"""Exception hierarchy shared across the pipeline."""


class ArgusError(Exception):
    """Base class for all errors raised by this package."""


class GraphParseError(ArgusError):
    """The graph document is syntactically malformed."""


class GraphIntegrityError(ArgusError):
    """The graph document violates referential integrity.

    Carries the offending id so diagnostics always name a concrete
    node/edge/function.
    """

    def __init__(self, message: str, offending_id: str):
        super().__init__(message)
        self.offending_id = offending_id


class ManifestError(ArgusError):
    """A dependency manifest is unsupported or malformed."""


class TransportError(ArgusError):
    """A retrieval backend failed for one source (non-fatal per source)."""


class InvalidWeightsError(ArgusError):
    """Gate weights do not sum to 1."""


class BackendError(ArgusError):
    """An LLM backend failed mid-loop."""


class ReplayDivergenceError(ArgusError):
    """A replay backend received a prompt that differs from the recording."""


class SarifError(ArgusError):
    """A SARIF document could not be parsed or has an unsupported version."""


class UnknownSinkError(ArgusError):
    """A flow query or recursion request named a node id not in the graph."""

    def __init__(self, sink_id: str):
        super().__init__(f"unknown sink id: {sink_id!r}")
        self.sink_id = sink_id


class SurrogateMismatchError(ArgusError):
    """A forward flow handed to the stitcher does not end at a tree leaf."""


class ConfigError(ArgusError):
    """Pipeline configuration is invalid (maps to CLI exit code 2)."""

"""Advisory retrieval, normalization, and community-finding scoring.

Authoritative sources (NVD, OSV, GHSA, Snyk) are queried per dependency
through a pluggable transport: an offline fixture directory for
deterministic runs, or a live HTTP client configured externally. Results
are merged, deduplicated by identifier, and sorted so completion order
never affects output.

Community issues are scored by three deterministic text indicators
(relevance, credibility, content quality) and gated on their weighted
aggregate.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Protocol, Sequence

from argus.errors import InvalidWeightsError, TransportError
from argus.deps import DependencyRecord

AUTHORITATIVE_SOURCES = ("NVD", "OSV", "GHSA", "Snyk")

DEFAULT_GATE_THRESHOLD = 0.5
DEFAULT_GATE_WEIGHTS = (1 / 3, 1 / 3, 1 / 3)

# Relevance keyword sets (case-insensitive whole words); configurable.
SPECULATIVE_KEYWORDS = frozenset({"potential", "early"})
SECURITY_KEYWORDS = frozenset({"vulnerability"})

# Content-quality lexicons.
TECHNICAL_TOKENS = frozenset(
    {
        "stack trace",
        "payload",
        "sink",
        "injection",
        "deserialization",
        "overflow",
        "traversal",
        "bytecode",
        "sandbox",
        "exploit",
        "xxe",
        "ssrf",
    }
)
IMPACT_PHRASES = frozenset(
    {
        "rce",
        "remote code execution",
        "xss",
        "cross-site scripting",
        "sql injection",
        "data loss",
        "denial of service",
        "privilege escalation",
        "information disclosure",
        "arbitrary file",
    }
)
SOLUTION_PHRASES = frozenset({"fix", "patch", "upgrade", "workaround", "mitigation"})


class Severity(str, Enum):
    CRITICAL = "critical"
    HIGH = "high"
    MEDIUM = "medium"
    LOW = "low"
    UNKNOWN = "unknown"


_SEVERITY_RANK = {
    Severity.CRITICAL: 0,
    Severity.HIGH: 1,
    Severity.MEDIUM: 2,
    Severity.LOW: 3,
    Severity.UNKNOWN: 4,
}


def severity_from_cvss(score: Optional[float]) -> Severity:
    if score is None:
        return Severity.UNKNOWN
    if score >= 9:
        return Severity.CRITICAL
    if score >= 7:
        return Severity.HIGH
    if score >= 4:
        return Severity.MEDIUM
    return Severity.LOW


@dataclass(frozen=True)
class AdvisoryRecord:
    source: str  # NVD | OSV | GHSA | Snyk | community
    identifier: str
    description: str
    severity: Severity = Severity.UNKNOWN
    affected_versions: str = "*"
    cve_id: Optional[str] = None
    dependency: str = ""

    def __post_init__(self):
        if not self.identifier:
            raise ValueError("advisory identifier must be non-empty")


@dataclass(frozen=True)
class CommunityIssue:
    title: str
    body: str
    comment_count: int = 0
    cve_linked: bool = False
    repo: str = "primary"  # "primary" or a fork slug
    url: str = ""

    def __post_init__(self):
        if self.comment_count < 0:
            raise ValueError("comment_count must be >= 0")

    @property
    def from_primary_repo(self) -> bool:
        return self.repo == "primary"


@dataclass(frozen=True)
class ScoredFinding:
    issue: CommunityIssue
    relevance: float
    credibility: float
    quality: float
    aggregate: float
    passed_gate: bool


# ---------------------------------------------------------------------------
# Scoring


def _contains_word(text: str, word: str) -> bool:
    if " " in word:
        return word in text
    return re.search(rf"\b{re.escape(word)}\b", text) is not None


def relevance_score(issue: CommunityIssue, *,
                    speculative: frozenset[str] = SPECULATIVE_KEYWORDS,
                    security: frozenset[str] = SECURITY_KEYWORDS) -> float:
    """Rule-based relevance in [0, 1].

    Starts at 0.5; +0.4 for speculative keywords, +0.1 for explicit
    security terms, -0.1 when the issue already carries a CVE link. The
    raw sum can leave [0, 1], so the result is clamped.
    """
    text = f"{issue.title}\n{issue.body}".lower()
    score = 0.5
    if any(_contains_word(text, w) for w in speculative):
        score += 0.4
    if any(_contains_word(text, w) for w in security):
        score += 0.1
    if issue.cve_linked:
        score -= 0.1
    return min(1.0, max(0.0, score))


def credibility_score(issue: CommunityIssue) -> float:
    """0.3 + min(comment_count * 0.05, 0.3); saturates at six comments."""
    return 0.3 + min(issue.comment_count * 0.05, 0.3)


_CODE_FENCE = re.compile(r"```")
_INDENTED_CODE = re.compile(r"^(?:    |\t)\S", re.MULTILINE)


def quality_score(issue: CommunityIssue) -> float:
    """Content quality in [0, 1]: mean of five {0, 0.5, 1} components.

    Components: body length bucket, technical depth (distinct lexicon
    hits), concreteness of stated impact, presence of a code example, and
    a proposed fix.
    """
    body = issue.body
    text = f"{issue.title}\n{body}".lower()

    if len(body) < 100:
        length = 0.0
    elif len(body) < 500:
        length = 0.5
    else:
        length = 1.0

    tech_hits = sum(1 for tok in TECHNICAL_TOKENS if _contains_word(text, tok))
    depth = 1.0 if tech_hits >= 2 else (0.5 if tech_hits == 1 else 0.0)

    impact = 1.0 if any(_contains_word(text, p) for p in IMPACT_PHRASES) else 0.0
    code = 1.0 if (_CODE_FENCE.search(body) or _INDENTED_CODE.search(body)) else 0.0
    solution = 1.0 if any(_contains_word(text, p) for p in SOLUTION_PHRASES) else 0.0

    return 0.2 * (length + depth + impact + code + solution)


def aggregate_score(relevance: float, credibility: float, quality: float,
                    weights: Sequence[float] = DEFAULT_GATE_WEIGHTS) -> float:
    if abs(sum(weights) - 1.0) > 1e-9 or len(weights) != 3:
        raise InvalidWeightsError(f"gate weights must be 3 values summing to 1, got {weights}")
    return weights[0] * relevance + weights[1] * credibility + weights[2] * quality


def gate_finding(issue: CommunityIssue,
                 weights: Sequence[float] = DEFAULT_GATE_WEIGHTS,
                 threshold: float = DEFAULT_GATE_THRESHOLD) -> ScoredFinding:
    r = relevance_score(issue)
    c = credibility_score(issue)
    q = quality_score(issue)
    agg = aggregate_score(r, c, q, weights)
    return ScoredFinding(
        issue=issue,
        relevance=r,
        credibility=c,
        quality=q,
        aggregate=agg,
        passed_gate=agg >= threshold,
    )


# ---------------------------------------------------------------------------
# Version-range filtering (best effort; unresolvable ranges are kept)


_VERSION_RE = re.compile(r"^\d+(\.\d+)*$")
_CONSTRAINT_RE = re.compile(r"^(<=|>=|<|>|==|=)?\s*(\d+(?:\.\d+)*)$")


def _parse_version(text: str) -> Optional[tuple[int, ...]]:
    text = text.strip()
    if not _VERSION_RE.match(text):
        return None
    return tuple(int(p) for p in text.split("."))


def version_in_range(version: str, range_spec: str) -> Optional[bool]:
    """Check a version against a simple comma-conjoined constraint spec.

    Supports ``*``, exact versions, and <, <=, >, >=, == comparators.
    Returns None when either side cannot be parsed (caller keeps the
    advisory in that case).
    """
    range_spec = range_spec.strip()
    if range_spec in ("", "*"):
        return True
    v = _parse_version(version)
    if v is None:
        return None
    for part in range_spec.split(","):
        m = _CONSTRAINT_RE.match(part.strip())
        if not m:
            return None
        op = m.group(1) or "=="
        bound = _parse_version(m.group(2))
        if bound is None:
            return None
        if op in ("==", "=") and v != bound:
            return False
        if op == "<" and not v < bound:
            return False
        if op == "<=" and not v <= bound:
            return False
        if op == ">" and not v > bound:
            return False
        if op == ">=" and not v >= bound:
            return False
    return True


# ---------------------------------------------------------------------------
# Transports


class RetrievalTransport(Protocol):
    def fetch_advisories(self, source: str, dep: DependencyRecord) -> list[dict]:
        """Return raw advisory dicts for one source. May raise TransportError."""

    def fetch_community(self, dep: DependencyRecord) -> list[dict]:
        """Return raw community-issue dicts. May raise TransportError."""


def _fixture_name(dep_name: str) -> str:
    return dep_name.replace(":", "__")


class OfflineFixtureTransport:
    """Reads one JSON file per (source, dependency) from a directory.

    File naming: ``<source>__<name-with-colons-as-double-underscore>.json``.
    A missing file is an empty result, not an error.
    """

    def __init__(self, fixture_dir: str):
        if not os.path.isdir(fixture_dir):
            raise TransportError(f"fixture directory not found: {fixture_dir}")
        self.fixture_dir = fixture_dir

    def _load(self, filename: str) -> list[dict]:
        path = os.path.join(self.fixture_dir, filename)
        if not os.path.exists(path):
            return []
        try:
            with open(path, "r", encoding="utf-8") as fh:
                doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise TransportError(f"{path}: malformed fixture: {exc}") from exc
        if not isinstance(doc, list):
            raise TransportError(f"{path}: fixture must be a JSON array")
        return doc

    def fetch_advisories(self, source: str, dep: DependencyRecord) -> list[dict]:
        return self._load(f"{source}__{_fixture_name(dep.name)}.json")

    def fetch_community(self, dep: DependencyRecord) -> list[dict]:
        return self._load(f"community__{_fixture_name(dep.name)}.json")


class LiveHttpTransport:
    """Queries configured HTTP endpoints; endpoints come from config.

    Each endpoint URL may contain ``{name}`` and ``{version}`` templates.
    Responses must be JSON arrays in the same shape as offline fixtures.
    """

    def __init__(self, endpoints: dict[str, str], community_endpoint: Optional[str] = None,
                 timeout: float = 10.0):
        self.endpoints = endpoints
        self.community_endpoint = community_endpoint
        self.timeout = timeout

    def _get(self, url_template: str, dep: DependencyRecord) -> list[dict]:
        import requests

        url = url_template.format(name=dep.name, version=dep.version)
        try:
            resp = requests.get(url, timeout=self.timeout)
            resp.raise_for_status()
            doc = resp.json()
        except Exception as exc:  # noqa: BLE001 - folded into a transport error
            raise TransportError(f"GET {url} failed: {exc}") from exc
        if not isinstance(doc, list):
            raise TransportError(f"GET {url}: expected a JSON array")
        return doc

    def fetch_advisories(self, source: str, dep: DependencyRecord) -> list[dict]:
        template = self.endpoints.get(source)
        if template is None:
            return []
        return self._get(template, dep)

    def fetch_community(self, dep: DependencyRecord) -> list[dict]:
        if self.community_endpoint is None:
            return []
        return self._get(self.community_endpoint, dep)


# ---------------------------------------------------------------------------
# Retrieval


def _record_from_raw(raw: dict, source: str, dep: DependencyRecord) -> AdvisoryRecord:
    sev_raw = raw.get("severity")
    if isinstance(sev_raw, (int, float)):
        severity = severity_from_cvss(float(sev_raw))
    elif isinstance(sev_raw, str):
        try:
            severity = Severity(sev_raw.lower())
        except ValueError:
            severity = Severity.UNKNOWN
    else:
        severity = severity_from_cvss(raw.get("cvss_score"))
    return AdvisoryRecord(
        source=source,
        identifier=str(raw["identifier"]),
        description=str(raw.get("description", "")),
        severity=severity,
        affected_versions=str(raw.get("affected_versions", "*")),
        cve_id=raw.get("cve_id"),
        dependency=dep.name,
    )


def query_authoritative(
    dep: DependencyRecord,
    transport: RetrievalTransport,
    *,
    warnings: Optional[list[str]] = None,
) -> list[AdvisoryRecord]:
    """Query all authoritative sources and merge the results.

    Per-source transport failures are non-fatal: partial results are
    returned and a warning is appended. Records are deduplicated by
    identifier (first source in canonical order wins), filtered to the
    dependency's version when the range is resolvable, and sorted by
    (severity desc, identifier).
    """
    if warnings is None:
        warnings = []
    merged: dict[str, AdvisoryRecord] = {}
    for source in AUTHORITATIVE_SOURCES:
        try:
            raws = transport.fetch_advisories(source, dep)
        except TransportError as exc:
            warnings.append(f"{source}: {exc}")
            continue
        for raw in raws:
            try:
                record = _record_from_raw(raw, source, dep)
            except (KeyError, ValueError) as exc:
                warnings.append(f"{source}: skipped malformed advisory: {exc}")
                continue
            affected = version_in_range(dep.version, record.affected_versions)
            if affected is False:
                continue
            merged.setdefault(record.identifier, record)
    return sorted(merged.values(), key=lambda r: (_SEVERITY_RANK[r.severity], r.identifier))


def retrieve_community(
    dep: DependencyRecord,
    transport: RetrievalTransport,
    *,
    warnings: Optional[list[str]] = None,
) -> list[CommunityIssue]:
    """Fetch community issues in hierarchical priority order.

    Primary-repository issues come before fork issues, and CVE/GHSA-linked
    issues before unlinked ones; ties break on URL for determinism.
    """
    if warnings is None:
        warnings = []
    try:
        raws = transport.fetch_community(dep)
    except TransportError as exc:
        warnings.append(f"community: {exc}")
        return []
    issues: list[CommunityIssue] = []
    for raw in raws:
        try:
            issues.append(
                CommunityIssue(
                    title=str(raw.get("title", "")),
                    body=str(raw.get("body", "")),
                    comment_count=int(raw.get("comment_count", 0)),
                    cve_linked=bool(raw.get("cve_linked", False)),
                    repo=str(raw.get("repo", "primary")),
                    url=str(raw.get("url", "")),
                )
            )
        except (ValueError, TypeError) as exc:
            warnings.append(f"community: skipped malformed issue: {exc}")
    issues.sort(key=lambda i: (not i.from_primary_repo, not i.cve_linked, i.url))
    return issues

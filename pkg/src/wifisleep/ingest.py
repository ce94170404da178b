"""Raw AP log parsing, device anonymization and the AP-to-building map.

The default raw-line grammar is four whitespace-separated fields::

    <ISO-8601 timestamp> <ap-id> <keyword> <mac>

with keywords ``assoc``, ``disassoc``, ``reassoc`` and ``auth``.  Other
controller formats are handled by building a :class:`LineGrammar` with a
different regular expression; it must expose the named groups ``ts``,
``ap``, ``keyword`` and ``mac``.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import hmac
import json
import logging
import re
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from .exceptions import ConfigError, LoadError, ParseError

logger = logging.getLogger(__name__)


class EventKind(str, enum.Enum):
    ASSOC = "assoc"
    DISASSOC = "disassoc"
    REASSOC = "reassoc"
    AUTH = "auth"


ASSOCIATION_KINDS = frozenset({EventKind.ASSOC, EventKind.REASSOC})


@dataclass(frozen=True, order=True)
class WifiEvent:
    """One AP log record for one anonymized device.

    ``timestamp`` is a timezone-aware UTC datetime at second resolution.
    """

    timestamp: datetime
    device: str
    ap: str
    kind: EventKind

    def __post_init__(self):
        if not self.device:
            raise ValueError("device identifier must be non-empty")
        if not isinstance(self.kind, EventKind):
            object.__setattr__(self, "kind", EventKind(self.kind))
        ts = self.timestamp
        if ts.tzinfo is None:
            ts = ts.replace(tzinfo=timezone.utc)
        ts = ts.astimezone(timezone.utc).replace(microsecond=0)
        object.__setattr__(self, "timestamp", ts)

    def to_dict(self):
        return {
            "ts": self.timestamp.strftime("%Y-%m-%dT%H:%M:%SZ"),
            "dev": self.device,
            "ap": self.ap,
            "kind": self.kind.value,
        }

    @classmethod
    def from_dict(cls, obj):
        return cls(
            timestamp=parse_timestamp(obj["ts"]),
            device=obj["dev"],
            ap=obj["ap"],
            kind=EventKind(obj["kind"]),
        )


def parse_timestamp(text):
    """Parse an ISO-8601 instant; naive values are taken as UTC."""
    text = text.strip()
    if text.endswith(("Z", "z")):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    return ts.astimezone(timezone.utc).replace(microsecond=0)


_MAC_HEX = re.compile(r"^[0-9a-f]{12}$")


def normalize_mac(mac):
    """Return ``mac`` as lowercase colon-separated octets."""
    digits = re.sub(r"[:\-.]", "", mac.strip().lower())
    if not _MAC_HEX.match(digits):
        raise ValueError(f"not a MAC address: {mac!r}")
    return ":".join(digits[i:i + 2] for i in range(0, 12, 2))


def anonymize_device(mac, key):
    """Keyed SHA-256 digest of the normalized MAC, as lowercase hex."""
    if not key:
        raise ConfigError("anonymization key must be non-empty", key="key")
    if isinstance(key, str):
        key = key.encode()
    return hmac.new(key, normalize_mac(mac).encode(), hashlib.sha256).hexdigest()


DEFAULT_KEYWORDS = {kind.value: kind for kind in EventKind}


@dataclass(frozen=True)
class LineGrammar:
    pattern: str = r"^(?P<ts>\S+)\s+(?P<ap>\S+)\s+(?P<keyword>\S+)\s+(?P<mac>\S+)\s*$"
    keywords: Mapping[str, EventKind] = field(
        default_factory=lambda: dict(DEFAULT_KEYWORDS))
    case_sensitive: bool = False

    def __post_init__(self):
        regex = re.compile(self.pattern)
        missing = {"ts", "ap", "keyword", "mac"} - set(regex.groupindex)
        if missing:
            raise ConfigError(f"grammar lacks named groups {sorted(missing)}",
                              key="pattern")
        object.__setattr__(self, "_regex", regex)

    def match(self, line):
        return self._regex.match(line)


DEFAULT_GRAMMAR = LineGrammar()


def parse_log_line(line, key, grammar=DEFAULT_GRAMMAR, line_number=None):
    """Parse one raw log line.

    Returns ``None`` for lines whose keyword is not a tracked event kind.
    Raises :class:`ParseError` when the line does not match the grammar or
    its timestamp/MAC is malformed.
    """
    m = grammar.match(line.rstrip("\r\n"))
    if m is None:
        raise ParseError("line does not match grammar", line_number)
    keyword = m.group("keyword")
    if not grammar.case_sensitive:
        keyword = keyword.lower()
    kind = grammar.keywords.get(keyword)
    if kind is None:
        return None
    try:
        ts = parse_timestamp(m.group("ts"))
    except ValueError as exc:
        raise ParseError(f"bad timestamp {m.group('ts')!r}: {exc}",
                         line_number) from None
    try:
        device = anonymize_device(m.group("mac"), key)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ParseError(str(exc), line_number) from None
    return WifiEvent(timestamp=ts, device=device, ap=m.group("ap"), kind=kind)


@dataclass
class IngestStats:
    lines: int = 0
    parsed: int = 0
    skipped: int = 0
    n_errors: int = 0
    errors: list = field(default_factory=list)

    def to_dict(self):
        return {"lines": self.lines, "parsed": self.parsed,
                "skipped": self.skipped, "errors": self.n_errors}


def parse_log_lines(lines, key, grammar=DEFAULT_GRAMMAR, stats=None):
    """Yield events from an iterable of raw lines, counting bad lines.

    Unparseable lines are recorded in ``stats.errors`` (at most 1000 kept)
    and never abort the stream.
    """
    stats = stats if stats is not None else IngestStats()
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        stats.lines += 1
        try:
            event = parse_log_line(line, key, grammar, line_number=lineno)
        except ParseError as exc:
            stats.n_errors += 1
            if len(stats.errors) < 1000:
                stats.errors.append(str(exc))
            continue
        if event is None:
            stats.skipped += 1
            continue
        stats.parsed += 1
        yield event


def write_events_jsonl(events, path):
    with open(path, "w", encoding="utf-8") as fh:
        for ev in events:
            fh.write(json.dumps(ev.to_dict(), separators=(",", ":")) + "\n")


def iter_events_jsonl(path) -> Iterator[WifiEvent]:
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield WifiEvent.from_dict(json.loads(line))
            except (KeyError, ValueError) as exc:
                raise ParseError(f"bad event record: {exc}", lineno) from None


def read_events_jsonl(path):
    return list(iter_events_jsonl(path))


@dataclass(frozen=True)
class ApRecord:
    ap: str
    building: str
    group: str = ""
    residential: bool = False

    def __post_init__(self):
        if not self.ap:
            raise LoadError("empty AP identifier")
        if not self.group:
            object.__setattr__(self, "group", self.building)


class ApMap(Mapping):
    """Immutable lookup from AP id to :class:`ApRecord`."""

    def __init__(self, records=()):
        table = {}
        for rec in records:
            if rec.ap in table:
                raise LoadError(f"duplicate AP id {rec.ap!r}")
            table[rec.ap] = rec
        self._table = table

    def __getitem__(self, ap):
        return self._table[ap]

    def __iter__(self):
        return iter(self._table)

    def __len__(self):
        return len(self._table)

    def __repr__(self):
        return f"ApMap({len(self)} APs)"

    def is_residential(self, ap):
        rec = self._table.get(ap)
        return rec is not None and rec.residential

    def group_of(self, ap):
        rec = self._table.get(ap)
        return None if rec is None else rec.group

    def building_of(self, ap):
        rec = self._table.get(ap)
        return None if rec is None else rec.building


_TRUE = {"true", "1"}
_FALSE = {"false", "0"}


def _parse_flag(value, ap):
    text = str(value).strip().lower()
    if text in _TRUE:
        return True
    if text in _FALSE or text == "":
        return False
    raise LoadError(f"AP {ap!r}: residential flag {value!r} not in true/false/1/0")


def load_ap_map(rows: Iterable) -> ApMap:
    """Build an :class:`ApMap` from records, tuples or dict rows.

    Tuples are ``(ap, building[, group[, residential]])``.  Dict rows use the
    CSV column names; a missing ``residential`` column means ``False``.
    """
    records = []
    for row in rows:
        if isinstance(row, ApRecord):
            records.append(row)
        elif isinstance(row, Mapping):
            ap = (row.get("ap") or "").strip()
            records.append(ApRecord(
                ap=ap,
                building=(row.get("building") or "").strip(),
                group=(row.get("group") or "").strip(),
                residential=_parse_flag(row.get("residential", ""), ap),
            ))
        else:
            ap, building, *rest = row
            group = rest[0] if rest else ""
            residential = rest[1] if len(rest) > 1 else False
            if not isinstance(residential, bool):
                residential = _parse_flag(residential, ap)
            records.append(ApRecord(ap, building, group or "", residential))
    return ApMap(records)


def read_ap_map_csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return load_ap_map(csv.DictReader(fh))


def write_ap_map_csv(ap_map, path):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["ap", "building", "group", "residential"])
        for rec in ap_map.values():
            writer.writerow([rec.ap, rec.building, rec.group,
                             "true" if rec.residential else "false"])


def ingest_files(paths, key, grammar=DEFAULT_GRAMMAR):
    """Parse several raw log files; returns ``(events, stats)``."""
    stats = IngestStats()
    events = []
    for path in paths:
        with open(Path(path), encoding="utf-8", errors="replace") as fh:
            events.extend(parse_log_lines(fh, key, grammar, stats))
    if stats.n_errors:
        logger.warning("%d unparseable lines", stats.n_errors)
    return events, stats

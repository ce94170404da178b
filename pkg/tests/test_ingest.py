import json
from datetime import datetime, timezone

import pytest
from hypothesis import given, strategies as st

from wifisleep.exceptions import ConfigError, LoadError, ParseError
from wifisleep.ingest import (ApRecord, EventKind, IngestStats, LineGrammar, WifiEvent,
                              anonymize_device, ingest_files, load_ap_map, normalize_mac,
                              parse_log_line, parse_log_lines, read_ap_map_csv,
                              read_events_jsonl, write_ap_map_csv, write_events_jsonl)

KEY = b"secret"


def test_default_grammar_assoc_line():
    ev = parse_log_line("2019-10-01T23:15:02Z dorm-ap-3 assoc aa:bb:cc:dd:ee:ff", KEY)
    assert ev.timestamp == datetime(2019, 10, 1, 23, 15, 2, tzinfo=timezone.utc)
    assert ev.ap == "dorm-ap-3"
    assert ev.kind is EventKind.ASSOC
    assert ev.device == anonymize_device("aa:bb:cc:dd:ee:ff", KEY)


def test_untracked_keyword_is_skipped():
    assert parse_log_line("2019-10-01T23:15:02Z dorm-ap-3 dhcp-ack aa:bb:cc:dd:ee:ff", KEY) is None


@pytest.mark.parametrize("line", ["garbage line",
                                  "not-a-time dorm-ap-3 assoc aa:bb:cc:dd:ee:ff",
                                  "2019-10-01T23:15:02Z dorm-ap-3 assoc zz:zz"])
def test_malformed_lines_raise(line):
    with pytest.raises(ParseError):
        parse_log_line(line, KEY, line_number=7)


def test_parse_error_carries_line_number():
    with pytest.raises(ParseError) as info:
        parse_log_line("garbage line", KEY, line_number=7)
    assert info.value.line_number == 7


def test_keywords_are_case_insensitive_by_default():
    ev = parse_log_line("2019-10-01T23:15:02Z ap1 ReAssoc AA-BB-CC-DD-EE-FF", KEY)
    assert ev.kind is EventKind.REASSOC


def test_custom_grammar():
    grammar = LineGrammar(r"^(?P<mac>\S+),(?P<ap>\S+),(?P<keyword>\w+),(?P<ts>\S+)$")
    ev = parse_log_line("aabbccddeeff,lib-1,auth,2019-10-01T01:00:00+02:00", KEY, grammar)
    assert ev.kind is EventKind.AUTH
    assert ev.timestamp == datetime(2019, 9, 30, 23, 0, tzinfo=timezone.utc)


def test_grammar_without_required_groups_rejected():
    with pytest.raises(ConfigError):
        LineGrammar(r"^(?P<ts>\S+) (?P<ap>\S+)$")


def test_mac_normalization_variants_hash_equal():
    forms = ["AA:BB:CC:DD:EE:FF", "aa-bb-cc-dd-ee-ff", "aabb.ccdd.eeff", "aabbccddeeff"]
    assert {normalize_mac(f) for f in forms} == {"aa:bb:cc:dd:ee:ff"}
    assert len({anonymize_device(f, KEY) for f in forms}) == 1


def test_anonymize_is_keyed():
    mac = "aa:bb:cc:dd:ee:ff"
    assert anonymize_device(mac, b"k1") != anonymize_device(mac, b"k2")
    assert len(anonymize_device(mac, b"k1")) == 64
    with pytest.raises(ConfigError):
        anonymize_device(mac, b"")


def test_bad_lines_counted_not_fatal():
    lines = ["2019-10-01T23:15:02Z ap1 assoc aa:bb:cc:dd:ee:ff",
             "junk",
             "",
             "2019-10-01T23:16:02Z ap1 dhcp aa:bb:cc:dd:ee:ff",
             "2019-10-01T23:17:02Z ap2 disassoc aa:bb:cc:dd:ee:ff"]
    stats = IngestStats()
    events = list(parse_log_lines(lines, KEY, stats=stats))
    assert len(events) == 2
    assert (stats.lines, stats.parsed, stats.skipped, stats.n_errors) == (4, 2, 1, 1)
    assert "line 2" in stats.errors[0]


def test_error_list_is_capped():
    stats = IngestStats()
    list(parse_log_lines(["junk"] * 1500, KEY, stats=stats))
    assert stats.n_errors == 1500
    assert len(stats.errors) == 1000


def test_jsonl_round_trip(tmp_path):
    events = [WifiEvent(datetime(2019, 10, 1, 22, 0, tzinfo=timezone.utc), "d" * 64, "ap1",
                        EventKind.ASSOC),
              WifiEvent(datetime(2019, 10, 1, 22, 0, 30, tzinfo=timezone.utc), "d" * 64, "ap2",
                        EventKind.AUTH)]
    path = tmp_path / "ev.jsonl"
    write_events_jsonl(events, path)
    first = json.loads(path.read_text().splitlines()[0])
    assert first == {"ts": "2019-10-01T22:00:00Z", "dev": "d" * 64, "ap": "ap1", "kind": "assoc"}
    assert read_events_jsonl(path) == events


def test_ingest_files(tmp_path):
    raw = tmp_path / "raw.log"
    raw.write_text("2019-10-01T23:15:02Z ap1 assoc aa:bb:cc:dd:ee:ff\nbad\n")
    events, stats = ingest_files([raw], KEY)
    assert len(events) == 1 and stats.n_errors == 1


def test_ap_map_csv_round_trip(tmp_path):
    path = tmp_path / "aps.csv"
    path.write_text("ap,building,group,residential\n"
                    "a1,DormA,DormA-1,true\nl1,Library,,0\n")
    aps = read_ap_map_csv(path)
    assert aps.is_residential("a1") and not aps.is_residential("l1")
    assert aps.group_of("l1") == "Library"
    assert aps.group_of("nope") is None
    out = tmp_path / "out.csv"
    write_ap_map_csv(aps, out)
    assert dict(read_ap_map_csv(out)) == dict(aps)


def test_ap_map_rejects_duplicates_and_bad_flags():
    with pytest.raises(LoadError):
        load_ap_map([("a1", "B"), ("a1", "C")])
    with pytest.raises(LoadError):
        load_ap_map([{"ap": "a1", "building": "B", "residential": "maybe"}])


def test_ap_record_group_defaults_to_building():
    assert ApRecord("a", "Hall").group == "Hall"


@given(st.binary(min_size=6, max_size=6), st.sampled_from([":", "-", ""]), st.booleans())
def test_normalize_mac_is_idempotent(octets, sep, upper):
    text = sep.join(f"{b:02x}" for b in octets)
    text = text.upper() if upper else text
    once = normalize_mac(text)
    assert normalize_mac(once) == once

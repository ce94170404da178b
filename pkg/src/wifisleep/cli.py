"""Command-line entry point.

Every subcommand prints one JSON run summary to stderr.  Failures print a
JSON error object instead and exit non-zero (2 for usage and configuration
problems, 1 otherwise).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
from pathlib import Path

from . import analytics, evaluate as ev
from .config import load_config
from .ensemble import read_estimates_jsonl
from .exceptions import ConfigError, KeyMismatchError, WifiSleepError
from .ingest import (DEFAULT_GRAMMAR, LineGrammar, ingest_files, read_ap_map_csv,
                     read_events_jsonl, write_ap_map_csv,
                     write_events_jsonl)
from .pipeline import infer_tasks, preprocess_events, read_tasks, synth_corpus, write_preprocess
from .synth import NoiseKind, SynthProfile, default_ap_map, inject_noise, write_truth_csv

logger = logging.getLogger("wifisleep")

KEY_ENV = "DEVICE_HASH_KEY"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    p.add_argument("--config", type=Path, help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--parallelism", type=int)
    p.add_argument("--summary", type=Path, help="also write the run summary here")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = _Parser(prog="wifisleep", description="Sleep estimation from WiFi association logs.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("ingest", help="raw controller logs to canonical JSONL")
    _common(p)
    p.add_argument("--in", dest="inputs", type=Path, nargs="+", required=True)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--key", help=f"hashing key (default: ${KEY_ENV})")
    p.add_argument("--pattern", help="line regex with named groups ts, ap, keyword, mac")

    p = sub.add_parser("preprocess", help="events to slot series and manifests")
    _common(p)
    p.add_argument("--in", dest="inputs", type=Path, required=True)
    p.add_argument("--ap-map", type=Path)
    p.add_argument("--users", type=Path, help="CSV with columns user, dev")
    p.add_argument("--residents-only", action="store_true")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("infer", help="slot series to sleep estimates")
    _common(p)
    p.add_argument("--in", dest="inputs", type=Path, required=True,
                   help="preprocess output directory")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("evaluate", help="score estimates against ground truth")
    _common(p)
    p.add_argument("--in", dest="inputs", type=Path, required=True)
    p.add_argument("--truth", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("synth", help="synthetic events with ground truth")
    _common(p)
    p.add_argument("--users", type=int, default=10)
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--lambda-awake", type=float, default=2.5)
    p.add_argument("--lambda-sleep", type=float, default=0.5)
    p.add_argument("--jitter", type=int, default=2)
    p.add_argument("--noise", choices=[k.value for k in NoiseKind])
    p.add_argument("--noise-window", help="slot range START:END of the first day")
    p.add_argument("--out", type=Path, required=True)

    p = sub.add_parser("report", help="population and per-user analytics")
    _common(p)
    p.add_argument("--in", dest="inputs", type=Path, required=True)
    p.add_argument("--out", type=Path, required=True)
    return parser


def _ingest(args, config):
    key = args.key or os.environ.get(KEY_ENV)
    if not key:
        raise ConfigError(f"a hashing key is required (--key or ${KEY_ENV})", key="key")
    grammar = LineGrammar(args.pattern) if args.pattern else DEFAULT_GRAMMAR
    events, stats = ingest_files(args.inputs, key, grammar)
    write_events_jsonl(sorted(events), args.out)
    return {"lines": stats.lines, "events": stats.parsed, "skipped": stats.skipped,
            "parse_errors": stats.n_errors, "first_errors": stats.errors[:10],
            "devices": len({e.device for e in events}), "aps": len({e.ap for e in events})}


def _read_users(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return {row["dev"]: row["user"] for row in csv.DictReader(fh)}


def _preprocess(args, config):
    ap_map = read_ap_map_csv(args.ap_map) if args.ap_map else None
    if ap_map is None and config.mode == "campus":
        raise ConfigError("campus mode needs --ap-map", key="ap-map")
    users = _read_users(args.users) if args.users else None
    result = preprocess_events(read_events_jsonl(args.inputs), ap_map, config, users,
                               args.residents_only)
    write_preprocess(result, args.out)
    return result.summary(ap_map)


def _infer(args, config):
    tasks = read_tasks(args.inputs, config)
    lines, summary = infer_tasks(tasks, config, args.parallelism)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for line in lines:
            fh.write(line + "\n")
    return summary


def _evaluate(args, config):
    kw = dict(slot_minutes=config.slot_minutes, window_start=config.window_start,
              tz=config.timezone)
    preds, status = ev.read_estimates(args.inputs, **kw)
    truths = ev.read_truth_csv(args.truth, **kw)
    report = ev.evaluate(preds, truths, config.n_slots, config.slot_minutes, status)
    args.out.mkdir(parents=True, exist_ok=True)
    ev.write_metrics(report, args.out / "metrics.json", args.out / "metrics.csv")
    return {"days": report["n_days"], "skipped": report["n_skipped"], **report["pooled"]}


def _synth(args, config):
    profile = SynthProfile(lambda_awake_true=args.lambda_awake,
                           lambda_sleep_true=args.lambda_sleep, jitter_slots=args.jitter,
                           slot_minutes=config.slot_minutes, window_start=config.window_start,
                           timezone=config.timezone, min_sleep_slots=config.min_sleep_slots)
    events, truth = synth_corpus(args.users, config, config.seed, args.days, profile)
    if args.noise:
        if not args.noise_window:
            raise UsageError("--noise needs --noise-window START:END")
        start, end = (int(v) for v in args.noise_window.split(":"))
        noisy = []
        for dev in sorted({e.device for e in events}):
            mine = [e for e in events if e.device == dev]
            noisy += inject_noise(mine, args.noise, day=profile.start_day, window=(start, end),
                                  seed=config.seed, ap=profile.home_ap,
                                  aps=(profile.home_ap, "dorma-2-ap2"), device=dev,
                                  slot_minutes=config.slot_minutes,
                                  window_start=config.window_start, tz=config.timezone)
        events = sorted(noisy)
    args.out.mkdir(parents=True, exist_ok=True)
    write_events_jsonl(events, args.out / "events.jsonl")
    write_truth_csv(truth, args.out / "truth.csv", config.slot_minutes, config.window_start,
                    config.timezone)
    write_ap_map_csv(default_ap_map(profile), args.out / "ap_map.csv")
    return {"users": args.users, "days": len(truth), "events": len(events)}


def _report(args, config):
    estimates = read_estimates_jsonl(args.inputs, config.slot_minutes, config.window_start,
                                     config.timezone)
    report = analytics.aggregate_report(estimates, config.regularity_threshold,
                                        config.regularity_mode)
    analytics.write_report(report, args.out)
    reg = report["regularity"]
    return {"estimates": len(estimates), "estimated": sum(e.estimated for e in estimates),
            "users": len({e.device for e in estimates}), "regular": reg["n_regular"],
            "irregular": reg["n_irregular"]}


COMMANDS = {"ingest": _ingest, "preprocess": _preprocess, "infer": _infer,
            "evaluate": _evaluate, "synth": _synth, "report": _report}


def _emit(obj, path=None):
    text = json.dumps(obj, sort_keys=True, default=str)
    print(text, file=sys.stderr)
    if path is not None:
        Path(path).write_text(text + "\n", encoding="utf-8")


def _error(exc):
    out = {"status": "error", "error": type(exc).__name__, "message": str(exc)}
    if isinstance(exc, KeyMismatchError):
        out["missing_predictions"] = [list(map(str, k)) if isinstance(k, tuple) else str(k)
                                      for k in exc.missing_in_pred]
        out["missing_truth"] = [list(map(str, k)) if isinstance(k, tuple) else str(k)
                                for k in exc.missing_in_truth]
    key = getattr(exc, "key", None)
    if key is not None:
        out["key"] = key
    return out


def main(argv=None):
    start = time.perf_counter()
    summary_path = None
    try:
        args = build_parser().parse_args(argv)
        summary_path = args.summary
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        config = load_config(args.config, seed=args.seed, parallelism=args.parallelism)
        summary = COMMANDS[args.command](args, config)
    except (UsageError, ConfigError) as exc:
        _emit(_error(exc), summary_path)
        return 2
    except (WifiSleepError, OSError, ValueError, KeyError) as exc:
        _emit(_error(exc), summary_path)
        return 1
    _emit({"status": "ok", "command": args.command, "seed": config.seed,
           "elapsed_seconds": round(time.perf_counter() - start, 3), **summary}, summary_path)
    return 0


if __name__ == "__main__":
    sys.exit(main())

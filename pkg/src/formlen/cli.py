"""Command-line surface: score response logs, grade against ground truth,
run analytics, and run or sweep simulations.

File formats: JSONL in/out (UTF-8, LF, one object per line), CSV out
(RFC-4180 quoting, floats at 12 significant digits), JSON configs. Config
documents reject unknown keys outright - a silent typo in a config is the
fastest way to an irreproducible result. Every command writes a run
manifest next to its outputs, and all writes are write-then-rename so a
failed run never leaves a partial file behind.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import os
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path

from . import __version__, analytics
from .analytics import KeywordLexicon, dual_phase_detect, moving_average
from .boxed import format_check
from .grading import ResponseRecord, correctness_reward, pass_at_n
from .rewards import LengthParams, RewardConfig, score_response
from .simenv import EnvConfig
from .training import SimConfig, SimResult, run_training

TRACE_COLUMNS = (
    "step",
    "mean_length",
    "format_rate",
    "mean_reward",
    "truncation_rate",
    "reflect_rate",
)


class CliError(Exception):
    """Fatal command error; message goes to stderr, exit status is nonzero."""


# --- small IO helpers -------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.12g}"
    return str(x)


def atomic_write_text(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _config_digest(effective: dict) -> str:
    canonical = json.dumps(effective, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def write_manifest(
    path: Path,
    command: str,
    effective_config: dict,
    seed,
    outputs: list[Path],
    started_at: str,
    notes: dict | None = None,
) -> None:
    manifest = {
        "tool": "formlen",
        "version": __version__,
        "command": command,
        "config_digest": _config_digest(effective_config),
        "seed": seed,
        "started_at": started_at,
        "finished_at": _now(),
        "outputs": [str(p) for p in outputs],
        "notes": notes or {},
    }
    atomic_write_text(path, json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _load_json(path: str, what: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise CliError(f"cannot read {what} {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise CliError(f"{what} {path} is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise CliError(f"{what} {path} must hold a JSON object")
    return doc


def _check_keys(doc: dict, allowed: set[str], where: str) -> None:
    unknown = sorted(set(doc) - allowed)
    if unknown:
        raise CliError(f"unknown {where} keys: {', '.join(unknown)}")


# --- record loading ---------------------------------------------------------


def _record_from_obj(obj) -> ResponseRecord:
    if not isinstance(obj, dict):
        raise ValueError("line is not a JSON object")
    if "id" not in obj or not isinstance(obj["id"], str) or not obj["id"]:
        raise ValueError('missing or invalid required field "id" (nonempty string)')
    if "response" not in obj or not isinstance(obj["response"], str):
        raise ValueError('missing or invalid required field "response" (string)')
    for name in ("prompt", "ground_truth", "tag"):
        if obj.get(name) is not None and not isinstance(obj[name], str):
            raise ValueError(f'field "{name}" must be a string')
    length = obj.get("length")
    if length is not None and (isinstance(length, bool) or not isinstance(length, int) or length < 0):
        raise ValueError('field "length" must be a nonnegative integer')
    return ResponseRecord(
        id=obj["id"],
        response=obj["response"],
        prompt=obj.get("prompt") or "",
        ground_truth=obj.get("ground_truth"),
        length=length,
        tag=obj.get("tag"),
    )


def load_records(path: str, permissive: bool) -> tuple[list[ResponseRecord], int]:
    """Read a JSONL response log; returns (records, n_skipped_lines).

    Malformed lines are reported with line numbers on stderr. Without
    --permissive, any malformed line fails the run.
    """
    records: list[ResponseRecord] = []
    problems: list[str] = []
    try:
        fh = open(path, encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read input {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(_record_from_obj(json.loads(line)))
            except (json.JSONDecodeError, ValueError) as exc:
                problems.append(f"{path}:{lineno}: {exc}")
    for message in problems:
        print(message, file=sys.stderr)
    if problems and not permissive:
        raise CliError(
            f"{len(problems)} malformed line(s) in {path} (use --permissive to skip them)"
        )
    return records, len(problems)


def _check_unique_ids(records: list[ResponseRecord]) -> None:
    seen = set()
    for record in records:
        if record.id in seen:
            raise CliError(f"duplicate record id {record.id!r} in input")
        seen.add(record.id)


def _effective_length(record: ResponseRecord) -> tuple[int, bool]:
    """Record's length, falling back to a whitespace token count."""
    if record.length is not None:
        return record.length, False
    return len(record.response.split()), True


# --- configs ----------------------------------------------------------------

_SCORE_CONFIG_KEYS = {"variant", "p", "l_max", "clamp_overlong"}


def load_reward_config(path: str) -> RewardConfig:
    doc = _load_json(path, "config")
    _check_keys(doc, _SCORE_CONFIG_KEYS, "config")
    if "variant" not in doc:
        raise CliError('config is missing required key "variant"')
    try:
        return RewardConfig(
            variant=doc["variant"],
            length_params=LengthParams(
                p=float(doc.get("p", 0.5)), l_max=int(doc.get("l_max", 3072))
            ),
            clamp_overlong=bool(doc.get("clamp_overlong", True)),
        )
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}") from exc


_SIM_COST_KEYS = {"step", "reflect", "open_box", "answer", "close_box", "eos"}
_SIM_CONFIG_KEYS = {
    "variant", "p", "steps", "group_size", "seed", "learning_rate",
    "verbosity_bias", "kl_coeff", "epsilon", "clipping_enabled", "stale_policy",
    "l_max", "costs", "odds_base", "odds_gain", "odds_cap", "max_segments",
    "temperature",
}


def load_sim_config(path: str, seed_override: int | None = None) -> tuple[SimConfig, dict]:
    """Build a SimConfig from a JSON document; returns (config, effective_dict)."""
    doc = _load_json(path, "config")
    _check_keys(doc, _SIM_CONFIG_KEYS, "config")
    costs = doc.get("costs", {})
    if not isinstance(costs, dict):
        raise CliError('config key "costs" must be an object')
    _check_keys(costs, _SIM_COST_KEYS, "config costs")
    try:
        env = EnvConfig(
            l_max=int(doc.get("l_max", 64)),
            cost_step=int(costs.get("step", 4)),
            cost_reflect=int(costs.get("reflect", 3)),
            cost_open=int(costs.get("open_box", 1)),
            cost_answer=int(costs.get("answer", 1)),
            cost_close=int(costs.get("close_box", 1)),
            cost_eos=int(costs.get("eos", 0)),
            odds_base=float(doc.get("odds_base", 0.3)),
            odds_gain=float(doc.get("odds_gain", 0.04)),
            odds_cap=float(doc.get("odds_cap", 0.85)),
            max_segments=int(doc.get("max_segments", 256)),
            temperature=float(doc.get("temperature", 1.0)),
        )
        cfg = SimConfig(
            variant=doc.get("variant", "format_length_quadratic"),
            p=float(doc.get("p", 0.5)),
            steps=int(doc.get("steps", 300)),
            group_size=int(doc.get("group_size", 8)),
            seed=int(seed_override if seed_override is not None else doc.get("seed", 0)),
            learning_rate=float(doc.get("learning_rate", 2.0)),
            verbosity_bias=float(doc.get("verbosity_bias", 2.0)),
            kl_coeff=float(doc.get("kl_coeff", 0.0)),
            epsilon=float(doc.get("epsilon", 0.2)),
            clipping_enabled=bool(doc.get("clipping_enabled", True)),
            stale_policy=bool(doc.get("stale_policy", False)),
            env=env,
        )
    except (TypeError, ValueError) as exc:
        raise CliError(f"invalid config: {exc}") from exc
    effective = dataclasses.asdict(cfg)
    return cfg, effective


# --- score ------------------------------------------------------------------


def cmd_score(args) -> int:
    started = _now()
    config = load_reward_config(args.config)
    records, skipped = load_records(args.input, _flag(args, "permissive"))
    _check_unique_ids(records)

    needs_truth = config.variant == "correctness"
    inferred = 0
    lines = []
    for record in records:
        length, was_inferred = _effective_length(record)
        inferred += was_inferred
        fmt_ok = format_check(record.response)
        correct = None
        if record.ground_truth is not None:
            correct = correctness_reward(record) == 1.0
        elif needs_truth:
            raise CliError(
                f"record {record.id!r} has no ground_truth but variant is correctness"
            )
        scored_record = dataclasses.replace(record, length=length)
        score = score_response(scored_record, config, fmt_ok, correct)
        out = {"id": record.id, "response": record.response}
        for name in ("prompt", "ground_truth", "tag"):
            value = getattr(record, name)
            if value:
                out[name] = value
        out.update(
            length=length,
            value=score.value,
            format_ok=score.format_ok,
            format_component=score.format_component,
            length_component=score.length_component,
        )
        lines.append(json.dumps(out, ensure_ascii=False))

    out_path = Path(args.output)
    atomic_write_text(out_path, "".join(line + "\n" for line in lines))
    write_manifest(
        Path(str(out_path) + ".manifest.json"),
        "score",
        {
            "variant": config.variant,
            "p": config.length_params.p,
            "l_max": config.length_params.l_max,
            "clamp_overlong": config.clamp_overlong,
        },
        _flag(args, "seed"),
        [out_path],
        started,
        notes={"records": len(records), "length_inferred": inferred, "skipped_lines": skipped},
    )
    print(f"scored {len(records)} record(s) -> {out_path}")
    return 0


# --- grade ------------------------------------------------------------------


def cmd_grade(args) -> int:
    started = _now()
    records, skipped = load_records(args.input, _flag(args, "permissive"))
    for record in records:
        if record.ground_truth is None:
            raise CliError(f"record {record.id!r} has no ground_truth")

    n_pass = args.pass_at
    if n_pass is None:
        _check_unique_ids(records)

    lines = []
    outcomes: dict[str, list[bool]] = {}
    correct_total = 0
    for record in records:
        correct = correctness_reward(record) == 1.0
        correct_total += correct
        outcomes.setdefault(record.id, []).append(correct)
        lines.append(json.dumps({"id": record.id, "correct": correct}))

    summary: dict = {
        "records": len(records),
        "accuracy": (correct_total / len(records)) if records else None,
    }
    if n_pass is not None:
        if not records:
            raise CliError("pass@N over an empty input is undefined")
        try:
            summary["pass_at_n"] = {"n": n_pass, "value": pass_at_n(outcomes, n_pass)}
        except ValueError as exc:
            raise CliError(str(exc)) from exc

    out_path = Path(args.output)
    summary_path = Path(str(out_path) + ".summary.json")
    atomic_write_text(out_path, "".join(line + "\n" for line in lines))
    atomic_write_text(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(
        Path(str(out_path) + ".manifest.json"),
        "grade",
        {"pass_at": n_pass},
        _flag(args, "seed"),
        [out_path, summary_path],
        started,
        notes={"records": len(records), "skipped_lines": skipped},
    )
    if summary["accuracy"] is not None:
        print(f"accuracy {summary['accuracy']:.4f} over {len(records)} record(s)")
    return 0


# --- analyze ----------------------------------------------------------------


def _load_lexicon(path: str | None) -> KeywordLexicon:
    if path is None:
        return KeywordLexicon()
    doc = _load_json(path, "lexicon")
    for name, words in doc.items():
        if not isinstance(words, list) or not all(isinstance(w, str) for w in words):
            raise CliError(f"lexicon category {name!r} must map to a list of strings")
    try:
        return KeywordLexicon(categories={k: list(v) for k, v in doc.items()})
    except ValueError as exc:
        raise CliError(f"invalid lexicon: {exc}") from exc


def cmd_analyze(args) -> int:
    started = _now()
    if args.l_max < 1:
        raise CliError(f"--l-max must be >= 1, got {args.l_max}")
    lexicon = _load_lexicon(args.lexicon)
    records, skipped = load_records(args.input, _flag(args, "permissive"))
    categories = list(lexicon.categories)

    inferred = 0
    rows = []
    ratio_sum = 0.0
    length_sum = 0
    sized_records = []
    totals = {name: 0 for name in categories}
    for record in records:
        length, was_inferred = _effective_length(record)
        inferred += was_inferred
        sized_records.append(dataclasses.replace(record, length=length))
        ratio = analytics.longest_repeated_substring_ratio(record.response)
        counts = analytics.reflective_keyword_counts(record.response, lexicon)
        ratio_sum += ratio
        length_sum += length
        for name in categories:
            totals[name] += counts[name]
        rows.append(
            [record.id, length, int(length >= args.l_max), _fmt(ratio)]
            + [counts[name] for name in categories]
        )

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["id", "length", "truncated", "repeated_substring_ratio"]
                    + [f"kw_{name}" for name in categories])
    writer.writerows(rows)

    out_path = Path(args.output)
    summary_path = Path(str(out_path) + ".summary.json")
    n = len(records)
    summary = {
        "records": n,
        "l_max": args.l_max,
        "truncation_rate": analytics.truncation_rate(sized_records, args.l_max) if n else None,
        "mean_repeated_substring_ratio": (ratio_sum / n) if n else None,
        "mean_length": (length_sum / n) if n else None,
        "keyword_totals": totals,
        "categories": categories,
    }
    atomic_write_text(out_path, buf.getvalue())
    atomic_write_text(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(
        Path(str(out_path) + ".manifest.json"),
        "analyze",
        {"l_max": args.l_max, "lexicon": {k: list(v) for k, v in lexicon.categories.items()}},
        _flag(args, "seed"),
        [out_path, summary_path],
        started,
        notes={"records": n, "length_inferred": inferred, "skipped_lines": skipped},
    )
    print(f"analyzed {n} record(s) -> {out_path}")
    return 0


# --- simulate / sweep -------------------------------------------------------


def _trace_csv(trace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for entry in trace:
        writer.writerow([
            entry.step,
            _fmt(entry.mean_length),
            _fmt(entry.format_rate),
            _fmt(entry.mean_reward),
            _fmt(entry.truncation_rate),
            _fmt(entry.reflect_rate),
        ])
    return buf.getvalue()


def _dual_phase_summary(result: SimResult, window: int = 5) -> dict:
    lengths = [entry.mean_length for entry in result.trace]
    summary: dict = {
        "window": window,
        "clip_activations": result.clip_activations,
        "ratio_max_deviation": result.ratio_max_deviation,
    }
    try:
        report = dual_phase_detect(lengths, window=window)
    except ValueError as exc:
        summary.update(available=False, reason=str(exc))
        return summary
    smoothed = moving_average(lengths, window)
    summary.update(
        available=True,
        min_step=report.min_step,
        decreased=report.decreased,
        recovered=report.recovered,
        final_smoothed_mean_length=smoothed[-1],
    )
    return summary


def cmd_simulate(args) -> int:
    started = _now()
    cfg, effective = load_sim_config(args.config, _flag(args, "seed"))
    result = run_training(cfg)

    out_dir = Path(args.output_dir)
    trace_path = out_dir / "trace.csv"
    summary_path = out_dir / "dual_phase.json"
    atomic_write_text(trace_path, _trace_csv(result.trace))
    atomic_write_text(
        summary_path, json.dumps(_dual_phase_summary(result), indent=2, sort_keys=True) + "\n"
    )
    write_manifest(
        out_dir / "manifest.json",
        "simulate",
        effective,
        cfg.seed,
        [trace_path, summary_path],
        started,
    )
    final = result.trace[-1]
    print(
        f"simulated {cfg.steps} step(s), variant={cfg.variant}, seed={cfg.seed}: "
        f"final mean_length {final.mean_length:.2f}, format_rate {final.format_rate:.2f}, "
        f"truncation_rate {final.truncation_rate:.2f}"
    )
    return 0


def _run_sweep_point(cfg: SimConfig) -> SimResult:
    return run_training(cfg)


def cmd_sweep(args) -> int:
    started = _now()
    base_cfg, effective = load_sim_config(args.config, _flag(args, "seed"))
    try:
        values = [float(v) for v in args.p_grid.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(f"invalid --p-grid: {exc}") from exc
    if not values:
        raise CliError("empty parameter grid")
    for p in values:
        if not 0.0 < p < 1.0:
            raise CliError(
                f"p={p:g} is outside (0,1); p=1.0 (no penalty for long responses) "
                "corresponds to the linear_length variant, not a turning point"
            )

    configs = [dataclasses.replace(base_cfg, p=p) for p in values]
    jobs = _flag(args, "jobs") or 1
    failures = []
    results: list[SimResult | None] = [None] * len(configs)
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(_run_sweep_point, cfg) for cfg in configs]
            for i, future in enumerate(futures):
                try:
                    results[i] = future.result()
                except Exception as exc:  # worker failure
                    failures.append(f"p={values[i]:g}: {exc}")
    else:
        for i, cfg in enumerate(configs):
            try:
                results[i] = _run_sweep_point(cfg)
            except Exception as exc:
                failures.append(f"p={values[i]:g}: {exc}")
    if failures:
        for message in failures:
            print(f"sweep point failed: {message}", file=sys.stderr)
        raise CliError(f"{len(failures)} sweep point(s) failed")

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("p",) + TRACE_COLUMNS)
    summary = {}
    for p, result in zip(values, results):
        assert result is not None
        for entry in result.trace:
            writer.writerow([
                _fmt(p), entry.step, _fmt(entry.mean_length), _fmt(entry.format_rate),
                _fmt(entry.mean_reward), _fmt(entry.truncation_rate), _fmt(entry.reflect_rate),
            ])
        lengths = [e.mean_length for e in result.trace]
        smoothed = moving_average(lengths, 5) if len(lengths) >= 5 else lengths
        summary[f"{p:g}"] = {
            "final_mean_length": result.trace[-1].mean_length,
            "final_smoothed_mean_length": smoothed[-1],
            "final_truncation_rate": result.trace[-1].truncation_rate,
            "final_format_rate": result.trace[-1].format_rate,
        }

    out_dir = Path(args.output_dir)
    sweep_path = out_dir / "sweep.csv"
    summary_path = out_dir / "summary.json"
    atomic_write_text(sweep_path, buf.getvalue())
    atomic_write_text(summary_path, json.dumps(summary, indent=2, sort_keys=True) + "\n")
    write_manifest(
        out_dir / "manifest.json",
        "sweep",
        {"base": effective, "p_grid": values},
        base_cfg.seed,
        [sweep_path, summary_path],
        started,
    )
    print(f"swept p over {values} -> {sweep_path}")
    return 0


# --- argument parsing -------------------------------------------------------


def _flag(args, name):
    return getattr(args, name, None)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override the config seed")
    common.add_argument("--permissive", action="store_true", default=argparse.SUPPRESS,
                        help="skip malformed input lines instead of failing")
    common.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                        help="worker processes for sweep points")

    parser = argparse.ArgumentParser(
        prog="formlen",
        parents=[common],
        description="Format/length surrogate reward scoring, grading, analytics, and simulation.",
        epilog=(
            "CSV columns - analyze: id,length,truncated,repeated_substring_ratio,kw_<category>...; "
            "simulate trace: " + ",".join(TRACE_COLUMNS) + "; "
            "sweep: p," + ",".join(TRACE_COLUMNS) + ". Floats use 12 significant digits."
        ),
    )
    parser.add_argument("--version", action="version", version=f"formlen {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_score = sub.add_parser("score", parents=[common],
                             help="score a JSONL response log with a reward config")
    p_score.add_argument("--input", required=True, help="JSONL of response records")
    p_score.add_argument("--config", required=True, help="reward config JSON")
    p_score.add_argument("--output", required=True, help="output JSONL path")
    p_score.set_defaults(func=cmd_score)

    p_grade = sub.add_parser("grade", parents=[common],
                             help="exact-match grade records against ground_truth")
    p_grade.add_argument("--input", required=True)
    p_grade.add_argument("--output", required=True)
    p_grade.add_argument("--pass-at", type=int, default=None, metavar="N",
                         help="compute pass@N over repeated records per id")
    p_grade.set_defaults(func=cmd_grade)

    p_analyze = sub.add_parser("analyze", parents=[common],
                               help="repetition/keyword/truncation analytics over a log")
    p_analyze.add_argument("--input", required=True)
    p_analyze.add_argument("--output", required=True, help="output CSV path")
    p_analyze.add_argument("--lexicon", default=None, help="keyword lexicon JSON")
    p_analyze.add_argument("--l-max", type=int, default=3072,
                           help="context cap for the truncation flag (default 3072)")
    p_analyze.set_defaults(func=cmd_analyze)

    p_sim = sub.add_parser("simulate", parents=[common],
                           help="run one GRPO training simulation")
    p_sim.add_argument("--config", required=True, help="simulation config JSON")
    p_sim.add_argument("--output-dir", required=True)
    p_sim.set_defaults(func=cmd_simulate)

    p_sweep = sub.add_parser("sweep", parents=[common],
                             help="run one simulation per turning-point value")
    p_sweep.add_argument("--config", required=True, help="base simulation config JSON")
    p_sweep.add_argument("--p-grid", default="0.4,0.5,0.6,0.8",
                         help="comma-separated p values (default 0.4,0.5,0.6,0.8)")
    p_sweep.add_argument("--output-dir", required=True)
    p_sweep.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:  # console_scripts hook
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()

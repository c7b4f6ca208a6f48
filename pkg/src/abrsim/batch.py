"""Batch experiment runner: expand a run spec, simulate, emit artifacts.

A run spec (JSON) names a manifest (or a synthesis recipe), trace files by
glob, a list of policies and a list of (capacity, critical-threshold)
scenarios.  Every policy x scenario x trace triple becomes one session whose
event log and report land under the output directory:

    sessions/<policy>_bs<BS>_lc<Lc>_<trace>.jsonl   event logs
    sessions/<policy>_bs<BS>_lc<Lc>_<trace>.report.json
    sessions.csv                                    one row per session
    aggregates.csv                                  one row per policy x scenario
    plots/<metric>.csv                              plot-ready bar-chart data
    comparison.txt                                  aligned table, best marked
    failures.json                                   only when something failed

Sessions are independent, so they fan out over a process pool; results are
collected and written in spec order, which keeps every output byte-stable
across runs.  Paths inside a spec resolve relative to the spec file.
"""

from __future__ import annotations

import glob
import json
import os
from dataclasses import dataclass, field
from multiprocessing import Pool

from .manifest import (
    NETFLIX_LADDER_KBPS,
    BitrateLadder,
    SaturationProfile,
    VideoManifest,
    load_manifest,
    save_manifest,
    synthesize_manifest,
)
from .metrics import AggregateReport, SessionReport, aggregate, aggregates_csv, sessions_csv
from .simulator import SessionConfig, run_session
from .trace import TraceError, load_trace

PLOT_METRICS = (
    ("rebuffering", "rebuffering_total_s", "rebuffering_s"),
    ("instability", "instability", "instability"),
    ("mean_ssim", "mean_ssim", "mean_ssim"),
    ("mean_bitrate", "mean_bitrate_kbps", "mean_bitrate_kbps"),
)


class RunSpecError(ValueError):
    """Run spec failed to parse or validate."""


@dataclass
class RunSpec:
    trace_globs: list
    policies: list
    scenarios: list  # (buffer_capacity_s, critical_threshold_s) pairs
    output_dir: str
    manifest_path: str | None = None
    synthesize: dict | None = None
    seed: int = 0
    jobs: int | None = None
    loop_traces: bool = False
    policy_params: dict = field(default_factory=dict)
    base_dir: str = "."

    def __post_init__(self) -> None:
        if (self.manifest_path is None) == (self.synthesize is None):
            raise RunSpecError("spec needs exactly one of `manifest` or `synthesize`")
        if not self.trace_globs:
            raise RunSpecError("spec names no traces")
        if not self.policies:
            raise RunSpecError("spec names no policies")
        if not self.scenarios:
            raise RunSpecError("spec names no scenarios")
        scenarios = []
        for pair in self.scenarios:
            if not isinstance(pair, (list, tuple)) or len(pair) != 2:
                raise RunSpecError(f"scenario must be a [BS, Lc] pair, got {pair!r}")
            scenarios.append((float(pair[0]), float(pair[1])))
        self.scenarios = scenarios
        if self.jobs is not None and self.jobs < 1:
            raise RunSpecError(f"jobs must be >= 1, got {self.jobs}")
        if not self.output_dir:
            raise RunSpecError("spec names no output directory")


def load_runspec(path: str) -> RunSpec:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise RunSpecError(f"{path}: cannot read spec: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RunSpecError(f"{path}: spec is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise RunSpecError(f"{path}: spec must be a JSON object")
    known = {
        "manifest", "synthesize", "traces", "policies", "scenarios",
        "output_dir", "seed", "jobs", "loop_traces", "policy_params",
    }
    unknown = set(doc) - known
    if unknown:
        raise RunSpecError(f"{path}: unknown spec fields: {', '.join(sorted(unknown))}")
    traces = doc.get("traces", [])
    if isinstance(traces, str):
        traces = [traces]
    try:
        return RunSpec(
            trace_globs=list(traces),
            policies=list(doc.get("policies", [])),
            scenarios=list(doc.get("scenarios", [])),
            output_dir=doc.get("output_dir", ""),
            manifest_path=doc.get("manifest"),
            synthesize=doc.get("synthesize"),
            seed=int(doc.get("seed", 0)),
            jobs=doc.get("jobs"),
            loop_traces=bool(doc.get("loop_traces", False)),
            policy_params=dict(doc.get("policy_params", {})),
            base_dir=os.path.dirname(os.path.abspath(path)) or ".",
        )
    except RunSpecError as exc:
        raise RunSpecError(f"{path}: {exc}") from exc


def resolve_manifest(spec: RunSpec) -> VideoManifest:
    if spec.manifest_path is not None:
        return load_manifest(os.path.join(spec.base_dir, spec.manifest_path))
    recipe = dict(spec.synthesize)
    ladder = BitrateLadder(tuple(recipe.pop("ladder_kbps", NETFLIX_LADDER_KBPS)))
    chunk_count = int(recipe.pop("chunk_count", 0))
    chunk_duration = float(recipe.pop("chunk_duration_s", 0.0))
    if chunk_count < 1 or chunk_duration <= 0:
        raise RunSpecError("synthesize needs chunk_count >= 1 and chunk_duration_s > 0")
    recipe.setdefault("jitter_seed", spec.seed)
    try:
        profile = SaturationProfile(**recipe)
    except TypeError as exc:
        raise RunSpecError(f"bad synthesize fields: {exc}") from exc
    return synthesize_manifest(ladder, chunk_count, chunk_duration, profile)


def resolve_trace_paths(spec: RunSpec) -> list[str]:
    paths: list[str] = []
    for pattern in spec.trace_globs:
        expanded = glob.glob(os.path.join(spec.base_dir, pattern))
        paths.extend(expanded if expanded else [])
    unique = sorted(set(paths))
    if not unique:
        raise RunSpecError(f"no trace files matched {spec.trace_globs!r}")
    return unique


@dataclass
class BatchResult:
    output_dir: str
    session_reports: list
    aggregates: list
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def _session_name(policy: str, bs: float, lc: float, trace_path: str) -> str:
    stem = os.path.splitext(os.path.basename(trace_path))[0]
    return f"{policy}_bs{bs:g}_lc{lc:g}_{stem}"


def _run_one(payload) -> dict:
    manifest, config_fields, trace_path, out_base = payload
    name = _session_name(config_fields["policy"], config_fields["buffer_capacity_s"],
                         config_fields["critical_threshold_s"], trace_path)
    try:
        trace = load_trace(trace_path)
        config = SessionConfig(**config_fields)
        log, report = run_session(manifest, trace, config)
    except (TraceError, ValueError) as exc:
        return {"name": name, "trace": trace_path, "report": None, "error": str(exc)}
    report = _with_label(report, os.path.splitext(os.path.basename(trace_path))[0])
    log.write(os.path.join(out_base, name + ".jsonl"))
    with open(os.path.join(out_base, name + ".report.json"), "w", encoding="utf-8") as fh:
        json.dump(report.to_dict(), fh, indent=1)
        fh.write("\n")
    return {"name": name, "trace": trace_path, "report": report, "error": None}


def _with_label(report: SessionReport, label: str) -> SessionReport:
    from dataclasses import replace

    return replace(report, trace_label=label)


def run_batch(spec: RunSpec) -> BatchResult:
    """Run every policy x scenario x trace session and write all artifacts.

    Per-session problems (unreadable trace, starved session) are collected
    into the failure list instead of aborting the batch; spec-level problems
    (no manifest, no matching traces) raise.
    """
    manifest = resolve_manifest(spec)
    trace_paths = resolve_trace_paths(spec)
    out_dir = os.path.join(spec.base_dir, spec.output_dir) if not os.path.isabs(spec.output_dir) else spec.output_dir
    sessions_dir = os.path.join(out_dir, "sessions")
    plots_dir = os.path.join(out_dir, "plots")
    os.makedirs(sessions_dir, exist_ok=True)
    os.makedirs(plots_dir, exist_ok=True)

    if spec.synthesize is not None:
        save_manifest(manifest, os.path.join(out_dir, "manifest.json"))

    tasks = []
    for bs, lc in spec.scenarios:
        for policy in spec.policies:
            config_fields = {
                "policy": policy,
                "buffer_capacity_s": bs,
                "critical_threshold_s": lc,
                "loop_trace": spec.loop_traces,
                "policy_params": dict(spec.policy_params.get(policy, {})),
            }
            for trace_path in trace_paths:
                tasks.append((manifest, config_fields, trace_path, sessions_dir))

    jobs = spec.jobs if spec.jobs is not None else (os.cpu_count() or 1)
    jobs = max(1, min(jobs, len(tasks)))
    if jobs == 1:
        outcomes = [_run_one(t) for t in tasks]
    else:
        with Pool(processes=jobs) as pool:
            outcomes = pool.map(_run_one, tasks)

    reports: list[SessionReport] = []
    failures: list[dict] = []
    for task, outcome in zip(tasks, outcomes):
        _, config_fields, trace_path, _ = task
        base = {
            "policy": config_fields["policy"],
            "BS": config_fields["buffer_capacity_s"],
            "Lc": config_fields["critical_threshold_s"],
            "trace": trace_path,
        }
        if outcome["error"] is not None:
            failures.append({**base, "kind": "error", "detail": outcome["error"]})
            continue
        report = outcome["report"]
        reports.append(report)
        if report.partial:
            failures.append({**base, "kind": "truncated", "detail": report.diagnostic})

    aggregates: list[AggregateReport] = []
    for bs, lc in spec.scenarios:
        for policy in spec.policies:
            pool_reports = [
                r for r in reports
                if r.policy == policy and r.buffer_capacity_s == bs
                and r.critical_threshold_s == lc and not r.partial
            ]
            if not pool_reports:
                failures.append(
                    {"policy": policy, "BS": bs, "Lc": lc, "trace": "*",
                     "kind": "no_complete_sessions", "detail": "nothing to aggregate"}
                )
                continue
            aggregates.append(aggregate(pool_reports))

    _write_text(os.path.join(out_dir, "sessions.csv"), sessions_csv(reports))
    _write_text(os.path.join(out_dir, "aggregates.csv"), aggregates_csv(aggregates))
    for file_stem, attr, column in PLOT_METRICS:
        lines = [f"policy,BS,Lc,{column}"]
        for agg in aggregates:
            lines.append(
                f"{agg.policy},{agg.buffer_capacity_s:g},{agg.critical_threshold_s:g},"
                f"{getattr(agg, attr)!r}"
            )
        _write_text(os.path.join(plots_dir, file_stem + ".csv"), "\n".join(lines) + "\n")
    _write_text(os.path.join(out_dir, "comparison.txt"), emit_comparison_table(aggregates))

    echo = {
        "manifest": spec.manifest_path,
        "synthesize": spec.synthesize,
        "traces": trace_paths,
        "policies": list(spec.policies),
        "scenarios": [list(s) for s in spec.scenarios],
        "loop_traces": spec.loop_traces,
        "seed": spec.seed,
        "policy_params": spec.policy_params,
    }
    _write_text(os.path.join(out_dir, "run_config.json"), json.dumps(echo, indent=1) + "\n")
    if failures:
        _write_text(os.path.join(out_dir, "failures.json"), json.dumps(failures, indent=1) + "\n")
    return BatchResult(out_dir, reports, aggregates, failures)


def _write_text(path: str, text: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def emit_comparison_table(aggregates) -> str:
    """Aligned per-scenario table; best value per column marked with `*`.

    Lower is better for rebuffering and instability, higher for SSIM and
    bitrate; ties are all marked.
    """
    if not aggregates:
        return "no aggregates\n"
    lines: list[str] = []
    scenarios = []
    for agg in aggregates:
        key = (agg.buffer_capacity_s, agg.critical_threshold_s)
        if key not in scenarios:
            scenarios.append(key)
    columns = (
        ("rebuffering_s", "rebuffering_total_s", min, "{:.3f}"),
        ("instability", "instability", min, "{:.3f}"),
        ("mean_ssim", "mean_ssim", max, "{:.4f}"),
        ("mean_bitrate_kbps", "mean_bitrate_kbps", max, "{:.3f}"),
    )
    for bs, lc in scenarios:
        group = [a for a in aggregates if (a.buffer_capacity_s, a.critical_threshold_s) == (bs, lc)]
        counts = {a.session_count for a in group}
        count_note = f"sessions={counts.pop()}" if len(counts) == 1 else "sessions=mixed"
        lines.append(f"BS={bs:g}s Lc={lc:g}s loop={'on' if group[0].loop_trace else 'off'} {count_note}")
        best = {title: pick(getattr(a, attr) for a in group) for title, attr, pick, _ in columns}
        rows = [["policy"] + [title for title, *_ in columns]]
        for agg in group:
            row = [agg.policy]
            for title, attr, _, fmt in columns:
                value = getattr(agg, attr)
                row.append(fmt.format(value) + ("*" if value == best[title] else ""))
            rows.append(row)
        widths = [max(len(r[c]) for r in rows) for c in range(len(rows[0]))]
        for r in rows:
            lines.append(
                r[0].ljust(widths[0]) + "  " + "  ".join(v.rjust(w) for v, w in zip(r[1:], widths[1:]))
            )
        lines.append("")
    return "\n".join(lines)

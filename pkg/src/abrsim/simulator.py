"""Deterministic single-client session engine.

The engine replays one video session against one bandwidth trace with a
single in-flight download and a drain-while-playing buffer, resolving every
event analytically (no fixed timestep):

1. At t=0 chunk 1 is fetched at the startup level.
2. When a download completes, the buffer gains one chunk duration, the
   throughput sample is recorded, playback starts if it never has, and the
   next fetch is issued immediately when the buffer has strictly more than
   one chunk of headroom - otherwise it is scheduled for the instant the
   buffer drains back to that bound.
3. The buffer drains one second of content per second of wall clock while
   playing.  Hitting zero with chunks still outstanding opens a stall,
   closed by the next completion (configurable resume threshold).
4. The session ends when the last chunk finishes displaying.

Everything observable is appended to a SessionEventLog (JSON Lines on disk,
fixed field order), and `replay_check` re-runs the engine with download
completion times taken from a log to verify that every other recorded value
- decisions, estimates, buffer levels, event times - is reproduced.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from . import estimators
from .abr import Observation, decide, make_policy_state, POLICY_IDS
from .manifest import VideoManifest
from .metrics import SessionReport, session_metrics
from .trace import BandwidthTrace, TraceExhaustedError, download_finish_time

STARTUP_POLICIES = ("play_after_first_chunk",)


class LogFormatError(ValueError):
    """Event log text is structurally unusable."""


@dataclass
class SessionConfig:
    policy: str = "sba"
    buffer_capacity_s: float = 120.0
    critical_threshold_s: float = 12.0
    startup_policy: str = "play_after_first_chunk"
    loop_trace: bool = False
    policy_params: dict = field(default_factory=dict)
    resume_threshold_s: float = 0.0
    tolerance_s: float = 1e-9

    def __post_init__(self) -> None:
        if self.policy not in POLICY_IDS:
            raise ValueError(f"unknown policy {self.policy!r}, expected one of {', '.join(POLICY_IDS)}")
        if not 0.0 < self.critical_threshold_s < self.buffer_capacity_s:
            raise ValueError(
                f"need 0 < critical threshold < buffer capacity, got "
                f"{self.critical_threshold_s} vs {self.buffer_capacity_s}"
            )
        if self.startup_policy not in STARTUP_POLICIES:
            raise ValueError(f"unknown startup policy {self.startup_policy!r}")
        if self.resume_threshold_s < 0:
            raise ValueError(f"resume threshold must be >= 0, got {self.resume_threshold_s}")
        if self.tolerance_s <= 0:
            raise ValueError(f"tolerance must be > 0, got {self.tolerance_s}")


@dataclass
class SessionEventLog:
    """Ordered event records; one JSON object per line on disk."""

    records: list[dict] = field(default_factory=list)

    def events(self, kind: str | None = None):
        if kind is None:
            return list(self.records)
        return [r for r in self.records if r["event"] == kind]

    @property
    def header(self) -> dict:
        if not self.records or self.records[0].get("event") != "session_start":
            raise LogFormatError("log does not start with a session_start record")
        return self.records[0]

    def to_jsonl(self) -> str:
        return "".join(json.dumps(r) + "\n" for r in self.records)

    @classmethod
    def from_jsonl(cls, text: str) -> "SessionEventLog":
        records = []
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise LogFormatError(f"line {lineno}: not valid JSON: {exc}") from exc
            if not isinstance(rec, dict) or not isinstance(rec.get("event"), str):
                raise LogFormatError(f"line {lineno}: record must be an object with an `event` field")
            records.append(rec)
        if not records:
            raise LogFormatError("log is empty")
        return cls(records)

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_jsonl())

    @classmethod
    def read(cls, path: str) -> "SessionEventLog":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_jsonl(fh.read())


def run_session(
    manifest: VideoManifest, trace: BandwidthTrace, config: SessionConfig
) -> tuple[SessionEventLog, SessionReport]:
    """Simulate one session; returns its event log and metrics report.

    A non-looping trace that cannot carry the session to completion yields a
    truncated log and a report flagged partial rather than an exception.
    """
    run_trace = replace(trace, loop=config.loop_trace)

    def finish_fn(chunk: int, send_time_s: float, volume_kilobits: float) -> float:
        return download_finish_time(run_trace, send_time_s, volume_kilobits)

    log = _drive(manifest, config, finish_fn)
    return log, session_metrics(log, manifest)


def _drive(manifest: VideoManifest, config: SessionConfig, finish_fn) -> SessionEventLog:
    """Run the event loop with an injected download-completion source."""
    chunk_len = manifest.chunk_duration_s
    total_chunks = manifest.chunk_count
    capacity = config.buffer_capacity_s
    if capacity < chunk_len:
        raise ValueError(f"buffer capacity {capacity}s cannot hold one {chunk_len}s chunk")
    if config.resume_threshold_s > capacity - chunk_len:
        raise ValueError(
            f"resume threshold {config.resume_threshold_s}s unreachable: the fetch gate "
            f"caps a stalled buffer at {capacity - chunk_len}s"
        )
    floor_rate = manifest.ladder.rate_kbps(1)

    tput_hist = estimators.ThroughputHistory()
    ssim_hist = estimators.SsimVariationHistory()
    policy_state = make_policy_state(config.policy, config.policy_params)

    log = SessionEventLog()
    log.records.append(
        {
            "event": "session_start",
            "policy": config.policy,
            "policy_params": dict(config.policy_params),
            "buffer_capacity_s": capacity,
            "critical_threshold_s": config.critical_threshold_s,
            "startup_policy": config.startup_policy,
            "resume_threshold_s": config.resume_threshold_s,
            "loop_trace": config.loop_trace,
            "chunk_count": total_chunks,
            "chunk_duration_s": chunk_len,
            "ladder_kbps": list(manifest.ladder.levels_kbps),
        }
    )

    now = 0.0
    play_pos = 0.0
    buffer = 0.0
    playing = False
    started = False
    stalled = False
    chunks_done = 0
    next_display = 1
    levels: list[int] = []
    last_level: int | None = None
    in_flight: tuple[int, int, float, float, float] | None = None
    next_chunk = 1
    release_at: float | None = None

    def advance_to(t: float) -> None:
        # Drain the buffer up to time t, emitting display-start events for
        # every chunk boundary the playhead crosses.
        nonlocal now, play_pos, buffer, next_display
        if playing and t > now:
            new_pos = play_pos + (t - now)
            while next_display <= chunks_done and (next_display - 1) * chunk_len < new_pos:
                boundary = (next_display - 1) * chunk_len
                log.records.append(
                    {
                        "event": "chunk_display_start",
                        "time_s": now + max(boundary - play_pos, 0.0),
                        "chunk": next_display,
                        "level": levels[next_display - 1],
                    }
                )
                next_display += 1
            play_pos = new_pos
            buffer = chunks_done * chunk_len - play_pos
        now = t

    def emit_due_display_starts(t: float) -> None:
        # Boundaries at or behind the playhead become displayable the moment
        # playback (re)starts.
        nonlocal next_display
        while next_display <= chunks_done and (next_display - 1) * chunk_len <= play_pos + 1e-12:
            log.records.append(
                {
                    "event": "chunk_display_start",
                    "time_s": t,
                    "chunk": next_display,
                    "level": levels[next_display - 1],
                }
            )
            next_display += 1

    def issue_fetch(chunk: int, t: float) -> bool:
        # Returns False when the trace cannot deliver the chunk (session
        # truncates); logs the attempt either way.
        nonlocal in_flight, last_level
        estimate = estimators.estimated_bandwidth_kbps(tput_hist, chunk, floor_rate)
        drift = estimators.mean_ssim_delta(ssim_hist, chunk)
        obs = Observation(
            chunk=chunk,
            buffer_s=buffer,
            buffer_capacity_s=capacity,
            critical_threshold_s=config.critical_threshold_s,
            prev_level=last_level,
            bandwidth_estimate_kbps=estimate,
            ssim_delta_mean=drift,
            manifest=manifest,
        )
        decision = decide(config.policy, obs, policy_state)
        if chunk >= 2:
            estimators.record_display_transition(
                ssim_hist, manifest, chunk, last_level, decision.level
            )
        log.records.append(
            {
                "event": "fetch_issued",
                "time_s": t,
                "chunk": chunk,
                "level": decision.level,
                "buffer_s": buffer,
                "bandwidth_estimate_kbps": estimate,
                "ssim_delta_mean": drift,
                "reason": decision.reason,
            }
        )
        volume = manifest.chunk_volume(chunk, decision.level)
        try:
            finish = finish_fn(chunk, t, volume)
        except TraceExhaustedError as exc:
            log.records.append(
                {"event": "session_truncated", "time_s": t, "chunk": chunk, "diagnostic": str(exc)}
            )
            return False
        levels.append(decision.level)
        last_level = decision.level
        in_flight = (chunk, decision.level, t, finish, volume)
        return True

    if not issue_fetch(1, 0.0):
        return log
    next_chunk = 2

    while True:
        if in_flight is not None:
            chunk, level, send_t, finish_t, volume = in_flight
            if playing and now + buffer < finish_t:
                # Buffer empties before the download lands: stall.
                advance_to(now + buffer)
                play_pos = chunks_done * chunk_len
                buffer = 0.0
                playing = False
                stalled = True
                log.records.append({"event": "playback_stall", "time_s": now})
                continue
            advance_to(finish_t)
            in_flight = None
            chunks_done += 1
            buffer = chunks_done * chunk_len - play_pos
            throughput = volume / (finish_t - send_t)
            log.records.append(
                {"event": "download_complete", "time_s": finish_t, "chunk": chunk,
                 "throughput_kbps": throughput}
            )
            estimators.record_download(tput_hist, send_t, finish_t, volume)
            policy_state.observe_download(throughput, finish_t - send_t, level)
            if not started:
                started = True
                playing = True
                log.records.append({"event": "playback_start", "time_s": now})
                emit_due_display_starts(now)
            elif stalled and buffer >= config.resume_threshold_s:
                stalled = False
                playing = True
                log.records.append({"event": "playback_resume", "time_s": now})
                emit_due_display_starts(now)
            if next_chunk <= total_chunks:
                if capacity - buffer > chunk_len:
                    if not issue_fetch(next_chunk, now):
                        break
                    next_chunk += 1
                else:
                    release_at = now + (buffer - (capacity - chunk_len))
            continue
        if release_at is not None:
            advance_to(release_at)
            release_at = None
            if not issue_fetch(next_chunk, now):
                break
            next_chunk += 1
            continue
        # Everything downloaded: drain out and close the session.
        end_t = now + buffer
        advance_to(end_t)
        play_pos = total_chunks * chunk_len
        buffer = 0.0
        log.records.append({"event": "session_end", "time_s": now})
        break
    return log


class _ReplayInconsistency(Exception):
    """Logged data contradicts the re-derived session."""


class _LoggedCompletions:
    """Download-completion source that feeds finish times back from a log."""

    def __init__(self, log: SessionEventLog):
        self.completions = [
            (r["chunk"], r["time_s"]) for r in log.records if r.get("event") == "download_complete"
        ]
        truncations = [r for r in log.records if r.get("event") == "session_truncated"]
        self.truncation = truncations[0] if truncations else None
        self.pos = 0

    def __call__(self, chunk: int, send_time_s: float, volume_kilobits: float) -> float:
        if self.pos >= len(self.completions):
            if self.truncation is not None:
                raise TraceExhaustedError(str(self.truncation.get("diagnostic", "trace exhausted")))
            raise _ReplayInconsistency(f"log holds no completion for chunk {chunk}")
        logged_chunk, logged_time = self.completions[self.pos]
        if logged_chunk != chunk:
            raise _ReplayInconsistency(
                f"logged completion is for chunk {logged_chunk}, engine expected {chunk}"
            )
        if not isinstance(logged_time, (int, float)) or logged_time <= send_time_s:
            raise _ReplayInconsistency(
                f"logged completion time {logged_time} precedes its fetch at {send_time_s}"
            )
        self.pos += 1
        return float(logged_time)


def replay_check(log: SessionEventLog, manifest: VideoManifest, config: SessionConfig) -> bool:
    """True when the log is exactly reproducible from its own completions.

    The engine is re-run with download finish times read from the log; every
    regenerated record (decisions, estimates, buffer levels, event times)
    must match the logged one within config.tolerance_s.
    """
    return not replay_diff(log, manifest, config)


def replay_diff(log: SessionEventLog, manifest: VideoManifest, config: SessionConfig) -> list[str]:
    """Human-readable list of mismatches; empty when the log verifies."""
    log.header  # raises LogFormatError on structurally broken logs
    try:
        regenerated = _drive(manifest, config, _LoggedCompletions(log))
    except _ReplayInconsistency as exc:
        return [str(exc)]
    except (ValueError, TraceExhaustedError) as exc:
        return [f"log is not replayable: {exc}"]
    return _diff_records(log.records, regenerated.records, config.tolerance_s)


def _diff_records(original: list[dict], regenerated: list[dict], tolerance: float) -> list[str]:
    diffs = []
    if len(original) != len(regenerated):
        diffs.append(f"record count differs: logged {len(original)}, replay {len(regenerated)}")
    for idx, (a, b) in enumerate(zip(original, regenerated)):
        if set(a.keys()) != set(b.keys()):
            diffs.append(f"record {idx}: fields {sorted(a)} vs {sorted(b)}")
            continue
        for key, logged in a.items():
            fresh = b[key]
            if isinstance(logged, bool) or isinstance(fresh, bool):
                same = logged == fresh
            elif isinstance(logged, (int, float)) and isinstance(fresh, (int, float)):
                same = _close(float(logged), float(fresh), tolerance)
            else:
                same = logged == fresh
            if not same:
                diffs.append(f"record {idx} ({a.get('event')}): {key} logged {logged!r}, replay {fresh!r}")
        if len(diffs) >= 20:
            diffs.append("...")
            break
    return diffs


def _close(a: float, b: float, tol: float) -> bool:
    return abs(a - b) <= max(tol, tol * max(abs(a), abs(b)))

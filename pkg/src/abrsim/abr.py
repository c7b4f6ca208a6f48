"""Adaptation policies: pure decision functions over one observation.

Every policy maps (Observation, PolicyState) to a Decision without side
effects; persistent per-policy state is updated separately by the engine
through `observe_download`, so each decision stays recomputable from logs.

Policies share two conventions: chunk 1 is always fetched at the lowest
level (reason "startup"), and levels are 1-based ladder indices.

* sba     - SSIM-gated: below the critical buffer threshold drop to the
            floor; otherwise pick the highest level priced under the
            bandwidth estimate and take it only if the SSIM gained over
            the previous chunk beats the session's mean SSIM drift, else
            hold the previous level.
* bba     - buffer-mapped: piecewise-linear map from buffer occupancy
            between a reservoir and a cushion onto the ladder span.
* festive - harmonic-mean throughput target approached one rung at a time,
            no buffer input.
* osmf    - ratio of chunk duration to last download time: fast downloads
            step one rung up, slow ones re-select under the implied rate.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, field

from .manifest import VideoManifest

POLICY_IDS = ("sba", "bba", "festive", "osmf")


@dataclass(frozen=True)
class Observation:
    """Everything a policy may look at when deciding one fetch."""

    chunk: int
    buffer_s: float
    buffer_capacity_s: float
    critical_threshold_s: float
    prev_level: int | None
    bandwidth_estimate_kbps: float
    ssim_delta_mean: float
    manifest: VideoManifest

    def __post_init__(self) -> None:
        if not 1 <= self.chunk <= self.manifest.chunk_count:
            raise ValueError(f"chunk {self.chunk} outside 1..{self.manifest.chunk_count}")
        if not 0.0 < self.critical_threshold_s < self.buffer_capacity_s:
            raise ValueError(
                f"need 0 < critical threshold < capacity, got "
                f"{self.critical_threshold_s} vs {self.buffer_capacity_s}"
            )
        if not 0.0 <= self.buffer_s <= self.buffer_capacity_s:
            raise ValueError(f"buffer {self.buffer_s} outside [0, {self.buffer_capacity_s}]")
        if self.chunk > 1:
            if self.prev_level is None:
                raise ValueError(f"chunk {self.chunk} needs prev_level")
            if not 1 <= self.prev_level <= self.manifest.ladder.count:
                raise ValueError(f"prev_level {self.prev_level} outside 1..{self.manifest.ladder.count}")
        if not math.isfinite(self.bandwidth_estimate_kbps) or self.bandwidth_estimate_kbps <= 0:
            raise ValueError(f"bandwidth estimate must be > 0, got {self.bandwidth_estimate_kbps}")


@dataclass(frozen=True)
class Decision:
    level: int
    reason: str


class PolicyState:
    """Base for per-policy persistent state; default is stateless."""

    def observe_download(self, throughput_kbps: float, duration_s: float, level: int) -> None:
        pass


class SbaState(PolicyState):
    def __init__(self, upgrade_only: bool = False):
        self.upgrade_only = upgrade_only


class BbaState(PolicyState):
    def __init__(self, reservoir_frac: float = 0.1, cushion_frac: float = 0.9):
        if not 0.0 < reservoir_frac < cushion_frac <= 1.0:
            raise ValueError(
                f"need 0 < reservoir_frac < cushion_frac <= 1, got {reservoir_frac}, {cushion_frac}"
            )
        self.reservoir_frac = reservoir_frac
        self.cushion_frac = cushion_frac


class FestiveState(PolicyState):
    def __init__(self, window: int = 5):
        if window < 1:
            raise ValueError(f"window must be >= 1, got {window}")
        self.samples_kbps: deque[float] = deque(maxlen=window)

    def observe_download(self, throughput_kbps: float, duration_s: float, level: int) -> None:
        self.samples_kbps.append(throughput_kbps)


class OsmfState(PolicyState):
    def __init__(self, up_ratio: float = 1.9, down_ratio: float = 0.9):
        if not 0.0 < down_ratio < up_ratio:
            raise ValueError(f"need 0 < down_ratio < up_ratio, got {down_ratio}, {up_ratio}")
        self.up_ratio = up_ratio
        self.down_ratio = down_ratio
        self.last_download_s: float | None = None

    def observe_download(self, throughput_kbps: float, duration_s: float, level: int) -> None:
        self.last_download_s = duration_s


_STATE_FACTORIES = {
    "sba": SbaState,
    "bba": BbaState,
    "festive": FestiveState,
    "osmf": OsmfState,
}


def make_policy_state(policy: str, params: dict | None = None) -> PolicyState:
    """Build the persistent state object for one policy id."""
    if policy not in _STATE_FACTORIES:
        raise ValueError(f"unknown policy {policy!r}, expected one of {', '.join(POLICY_IDS)}")
    try:
        return _STATE_FACTORIES[policy](**(params or {}))
    except TypeError as exc:
        raise ValueError(f"bad parameters for policy {policy!r}: {exc}") from exc


def sba_decide(obs: Observation, state: SbaState | None = None) -> Decision:
    """SSIM-gated adaptation.

    Buffer at or under the critical threshold forces the lowest level.
    Otherwise the candidate is the highest level priced strictly under the
    bandwidth estimate (floor of the ladder when none is); it is fetched
    only when switching to it would change SSIM, relative to the previous
    chunk as displayed, by more than the mean SSIM drift seen so far.
    Anything else holds the previous level.
    """
    if obs.chunk == 1:
        return Decision(1, "startup")
    if obs.buffer_s <= obs.critical_threshold_s:
        return Decision(1, "critical_drop")
    candidate = obs.manifest.ladder.highest_level_below(obs.bandwidth_estimate_kbps)
    if candidate is None:
        candidate = 1
    gain = obs.manifest.ssim_at(obs.chunk, candidate) - obs.manifest.ssim_at(
        obs.chunk - 1, obs.prev_level
    )
    take = gain > obs.ssim_delta_mean
    if state is not None and state.upgrade_only:
        take = take and candidate > obs.prev_level
    if take:
        return Decision(candidate, "upgrade")
    return Decision(obs.prev_level, "hold")


def bba_decide(obs: Observation, state: BbaState | None = None) -> Decision:
    """Buffer-occupancy mapping between a reservoir and a cushion."""
    if obs.chunk == 1:
        return Decision(1, "startup")
    if state is None:
        state = BbaState()
    ladder = obs.manifest.ladder
    reservoir = state.reservoir_frac * obs.buffer_capacity_s
    cushion = state.cushion_frac * obs.buffer_capacity_s
    if obs.buffer_s <= reservoir:
        return Decision(1, "bba_reservoir")
    if obs.buffer_s >= cushion:
        return Decision(ladder.count, "bba_cushion")
    r1 = ladder.levels_kbps[0]
    top = ladder.levels_kbps[-1]
    mapped = r1 + (top - r1) * (obs.buffer_s - reservoir) / (cushion - reservoir)
    level = ladder.highest_level_at_or_below(mapped)
    return Decision(level if level is not None else 1, "bba_interpolated")


def _harmonic_mean(values) -> float:
    return len(values) / sum(1.0 / v for v in values)


def festive_decide(obs: Observation, state: FestiveState | None = None) -> Decision:
    """Harmonic-mean throughput target, approached one rung per decision."""
    if obs.chunk == 1:
        return Decision(1, "startup")
    if state is None or not state.samples_kbps:
        return Decision(1, "startup")
    target = obs.manifest.ladder.highest_level_at_or_below(_harmonic_mean(state.samples_kbps))
    if target is None:
        target = 1
    if target > obs.prev_level:
        return Decision(obs.prev_level + 1, "festive_up")
    if target < obs.prev_level:
        return Decision(obs.prev_level - 1, "festive_down")
    return Decision(obs.prev_level, "festive_hold")


def osmf_decide(obs: Observation, state: OsmfState | None = None) -> Decision:
    """Duration-ratio stepping, as in classic OSMF players.

    ratio = chunk duration / last download time.  Clearly faster than real
    time steps one rung up; clearly slower re-selects the highest level
    sustainable at the previous level's bitrate scaled by the ratio.
    """
    if obs.chunk == 1:
        return Decision(1, "startup")
    if state is None or state.last_download_s is None:
        return Decision(1, "startup")
    ladder = obs.manifest.ladder
    ratio = obs.manifest.chunk_duration_s / state.last_download_s
    if ratio > state.up_ratio:
        return Decision(min(obs.prev_level + 1, ladder.count), "osmf_up")
    if ratio < state.down_ratio:
        implied = ladder.rate_kbps(obs.prev_level) * ratio
        level = ladder.highest_level_at_or_below(implied)
        return Decision(level if level is not None else 1, "osmf_down")
    return Decision(obs.prev_level, "osmf_hold")


_DECIDERS = {
    "sba": sba_decide,
    "bba": bba_decide,
    "festive": festive_decide,
    "osmf": osmf_decide,
}


def decide(policy: str, obs: Observation, state: PolicyState | None = None) -> Decision:
    """Dispatch one decision to the named policy."""
    if policy not in _DECIDERS:
        raise ValueError(f"unknown policy {policy!r}, expected one of {', '.join(POLICY_IDS)}")
    return _DECIDERS[policy](obs, state)

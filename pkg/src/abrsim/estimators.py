"""Causal session statistics consumed by adaptation policies.

Two running histories are kept while a session plays out:

* ThroughputHistory records one consumed-throughput sample per completed
  download (volume / wall time).  Its mean over the first l-1 downloads is
  the bandwidth estimate used when deciding chunk l; before any download
  completes the estimate falls back to the lowest ladder rate.

* SsimVariationHistory records the signed SSIM change at each displayed
  chunk transition.  Its mean is the adaptive threshold a quality-gated
  policy compares candidate upgrades against.  Both quantities use only
  data available strictly before the decision they feed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .manifest import VideoManifest


@dataclass
class ThroughputHistory:
    """Per-download throughput samples in kbps, in completion order."""

    samples_kbps: list[float] = field(default_factory=list)


def record_download(
    history: ThroughputHistory,
    send_time_s: float,
    finish_time_s: float,
    volume_kilobits: float,
) -> float:
    """Append the throughput of one completed download and return it."""
    if finish_time_s <= send_time_s:
        raise ValueError(f"download must take positive time, got [{send_time_s}, {finish_time_s}]")
    if volume_kilobits <= 0:
        raise ValueError(f"volume must be > 0, got {volume_kilobits}")
    sample = volume_kilobits / (finish_time_s - send_time_s)
    history.samples_kbps.append(sample)
    return sample


def estimated_bandwidth_kbps(history: ThroughputHistory, chunk: int, fallback_kbps: float) -> float:
    """Arithmetic mean of the throughput seen before deciding `chunk`.

    Only the first chunk-1 samples are eligible, so the estimate for a past
    decision can be recomputed from a longer history.  With no eligible
    samples (chunk 1) the fallback rate is returned.
    """
    if chunk < 1:
        raise ValueError(f"chunk must be >= 1, got {chunk}")
    eligible = history.samples_kbps[: chunk - 1]
    if not eligible:
        return fallback_kbps
    return sum(eligible) / len(eligible)


@dataclass
class SsimVariationHistory:
    """Signed SSIM deltas between consecutively displayed chunks.

    deltas[k] is the change at the transition into chunk k+2: the SSIM of
    chunk k+2 at its fetched level minus the SSIM of chunk k+1 at its own.
    """

    deltas: list[float] = field(default_factory=list)


def record_display_transition(
    history: SsimVariationHistory,
    manifest: VideoManifest,
    chunk: int,
    prev_level: int,
    level: int,
) -> float:
    """Append the SSIM delta of the transition into `chunk` and return it."""
    if chunk < 2:
        raise ValueError(f"transitions start at chunk 2, got {chunk}")
    delta = manifest.ssim_at(chunk, level) - manifest.ssim_at(chunk - 1, prev_level)
    history.deltas.append(delta)
    return delta


def mean_ssim_delta(history: SsimVariationHistory, chunk: int) -> float:
    """Mean of the deltas known when deciding `chunk`; 0 with none yet.

    Deltas for transitions into chunks 2..chunk-1 are eligible, i.e. the
    first chunk-2 recorded entries.
    """
    if chunk < 1:
        raise ValueError(f"chunk must be >= 1, got {chunk}")
    eligible = history.deltas[: max(chunk - 2, 0)]
    if not eligible:
        return 0.0
    return sum(eligible) / len(eligible)

"""Shared builders for the test suite."""

import random

from abrsim import (
    BandwidthTrace,
    BitrateLadder,
    NETFLIX_LADDER_KBPS,
    Observation,
    VideoManifest,
)


def make_ladder(rates=NETFLIX_LADDER_KBPS) -> BitrateLadder:
    return BitrateLadder(tuple(float(r) for r in rates))


def monotone_rows(chunks: int, levels: int, floor=0.75, ceiling=0.98):
    """Identical rows, SSIM strictly increasing in level."""
    row = tuple(floor + (ceiling - floor) * j / (levels - 1) for j in range(levels))
    return tuple(row for _ in range(chunks))


def make_manifest(chunks=5, rates=NETFLIX_LADDER_KBPS, duration=4.0, ssim=None, sizes=None):
    ladder = make_ladder(rates)
    if ssim is None:
        ssim = monotone_rows(chunks, ladder.count)
    return VideoManifest(
        chunk_count=chunks,
        chunk_duration_s=duration,
        ladder=ladder,
        ssim=tuple(tuple(row) for row in ssim),
        chunk_kilobits=tuple(tuple(row) for row in sizes) if sizes is not None else None,
    )


def constant_trace(kbps: float, until_s: float | None = None, loop=False) -> BandwidthTrace:
    """Constant-rate trace; open-ended unless until_s caps it with a zero tail."""
    if until_s is None:
        return BandwidthTrace(((0.0, float(kbps)),))
    return BandwidthTrace(((0.0, float(kbps)), (float(until_s), 0.0)), loop=loop)


def random_trace(rng: random.Random, segments=None, rate_range=(100.0, 8000.0), loop=False):
    """Random piecewise-constant trace with strictly increasing timestamps."""
    n = segments if segments is not None else rng.randint(2, 6)
    times = [0.0]
    for _ in range(n - 1):
        times.append(times[-1] + rng.uniform(2.0, 30.0))
    rates = [rng.uniform(*rate_range) for _ in range(n)]
    if loop:
        rates[-1] = 0.0  # unused past the wrap point
    return BandwidthTrace(tuple(zip(times, rates)), loop=loop)


def make_observation(manifest, chunk=2, buffer_s=60.0, capacity=120.0, critical=12.0,
                     prev_level=1, estimate=1000.0, drift=0.0) -> Observation:
    return Observation(
        chunk=chunk,
        buffer_s=buffer_s,
        buffer_capacity_s=capacity,
        critical_threshold_s=critical,
        prev_level=prev_level if chunk > 1 else None,
        bandwidth_estimate_kbps=estimate,
        ssim_delta_mean=drift,
        manifest=manifest,
    )

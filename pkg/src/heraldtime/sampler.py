"""Seeded Monte-Carlo generation of coincidence events.

Every true pair is drawn from the joint Gaussian arrival-time model, then
dressed with detector effects:

* independent Gaussian timing jitter per channel (``jitter1``, ``jitter2``);
* a common-mode Gaussian shift (``reference_jitter``) applied to both times,
  modeling the shared reference-clock subtraction -- the marginal jitter per
  channel is the quadrature sum, and the common mode adds a small positive
  covariance ``reference_jitter**2``;
* a ``background_rate`` fraction of events replaced by uniform draws over a
  stated window (accidental coincidences).

Randomness comes from the counter-based Philox generator.  A run with seed
``s`` is produced in chunks of ``CHUNK_SIZE`` events; chunk ``k`` uses
``numpy.random.Philox`` seeded by ``SeedSequence(entropy=s, spawn_key=(k,))``
and the chunks are concatenated in index order.  This makes the output
deterministic, independent of how chunks might be scheduled, and documented
enough to reproduce the statistics (bit-exact streams are promised only
within this implementation).  Within a chunk of m events the draw order is
fixed: signal normals (m, 2), jitter normals per channel and common mode,
background selector uniforms (m,), background positions uniforms (m, 2).

Pulse-train aliasing is not modeled: every event is assumed uniquely assigned
to its pump pulse.  Signal events are not truncated to the window; the window
is the background support (and the truncation box used by file readers that
care).  For the Gaussian scales used here any window wide enough to hold the
background also holds all but a ~1e-14 tail of the signal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from .analytic import temporal_covariance
from .params import LinkParams, SourceParams, TemporalCovariance

__all__ = ["CHUNK_SIZE", "DetectorModel", "EventSet", "sample", "sample_from_source"]

CHUNK_SIZE = 1 << 16


@dataclass(frozen=True)
class DetectorModel:
    """Timing response of the two detection channels.

    jitter1, jitter2:  per-channel Gaussian jitter standard deviations, s.
    reference_jitter:  common-mode (reference clock) jitter, s.
    background_rate:   fraction of events drawn uniformly from ``window``,
                       in [0, 1).
    window:            (lo, hi) support of the background in each time
                       coordinate, s.  Required when background_rate > 0.
    """

    jitter1: float = 0.0
    jitter2: float = 0.0
    reference_jitter: float = 0.0
    background_rate: float = 0.0
    window: tuple[float, float] | None = None

    def __post_init__(self):
        for name in ("jitter1", "jitter2", "reference_jitter"):
            v = getattr(self, name)
            if not (isinstance(v, (int, float)) and math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v!r}")
        if not (0.0 <= self.background_rate < 1.0):
            raise ValueError(
                f"background_rate must lie in [0, 1), got {self.background_rate!r}")
        if self.window is not None:
            lo, hi = self.window
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"window must be a finite (lo, hi) with lo < hi, "
                                 f"got {self.window!r}")
        elif self.background_rate > 0.0:
            raise ValueError("background_rate > 0 requires a window")

    @classmethod
    def ideal(cls) -> "DetectorModel":
        """Noiseless detectors: no jitter, no background."""
        return cls()


@dataclass(frozen=True)
class EventSet:
    """A set of coincidence records (t1, t2) in seconds, with provenance.

    ``events`` is an (n, 2) float array, marked read-only.  ``metadata`` maps
    string keys to plain values (parameters used, seed, selection cuts, ...).
    """

    events: np.ndarray
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        arr = np.atleast_2d(np.asarray(self.events, dtype=float))
        if arr.size == 0:
            arr = arr.reshape(0, 2)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"events must have shape (n, 2), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("events must be finite")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "events", arr)
        object.__setattr__(self, "metadata", dict(self.metadata))

    @property
    def count(self) -> int:
        return self.events.shape[0]

    @property
    def t1(self) -> np.ndarray:
        return self.events[:, 0]

    @property
    def t2(self) -> np.ndarray:
        return self.events[:, 1]

    def transposed(self) -> "EventSet":
        """The same events with the two channels exchanged."""
        meta = dict(self.metadata)
        meta["channels_swapped"] = not meta.get("channels_swapped", False)
        return EventSet(self.events[:, ::-1], meta)


def _chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed,
                                                spawn_key=(chunk_index,))))


def _sample_chunk(cov: TemporalCovariance, det: DetectorModel, m: int,
                  rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((m, 2))
    t1 = cov.mu1 + cov.tau1 * z[:, 0]
    t2 = cov.mu2 + cov.tau2 * (cov.rho_t * z[:, 0]
                               + math.sqrt(1.0 - cov.rho_t ** 2) * z[:, 1])
    if det.jitter1 > 0:
        t1 = t1 + det.jitter1 * rng.standard_normal(m)
    if det.jitter2 > 0:
        t2 = t2 + det.jitter2 * rng.standard_normal(m)
    if det.reference_jitter > 0:
        common = det.reference_jitter * rng.standard_normal(m)
        t1 = t1 + common
        t2 = t2 + common
    out = np.column_stack([t1, t2])
    if det.background_rate > 0:
        is_bg = rng.random(m) < det.background_rate
        lo, hi = det.window
        uniform = lo + (hi - lo) * rng.random((m, 2))
        out[is_bg] = uniform[is_bg]
    return out


def sample(cov: TemporalCovariance, det: DetectorModel, n: int,
           seed: int) -> EventSet:
    """Draw ``n`` coincidence events; deterministic for a fixed seed."""
    if not (isinstance(n, (int, np.integer)) and n >= 1):
        raise ValueError(f"n must be a positive integer, got {n!r}")
    chunks = []
    for k in range(math.ceil(n / CHUNK_SIZE)):
        m = min(CHUNK_SIZE, n - k * CHUNK_SIZE)
        chunks.append(_sample_chunk(cov, det, m, _chunk_rng(seed, k)))
    meta = {
        "generator": "philox-chunked-v1",
        "seed": int(seed),
        "n": int(n),
        "cov": {"rho_t": cov.rho_t, "tau1": cov.tau1, "tau2": cov.tau2,
                "mu1": cov.mu1, "mu2": cov.mu2},
        "detector": {"jitter1": det.jitter1, "jitter2": det.jitter2,
                     "reference_jitter": det.reference_jitter,
                     "background_rate": det.background_rate,
                     "window": list(det.window) if det.window else None},
    }
    return EventSet(np.concatenate(chunks, axis=0), meta)


def sample_from_source(src: SourceParams, link: LinkParams, det: DetectorModel,
                       n: int, seed: int) -> EventSet:
    """Sample events for a source/link setting (symmetric arms, tau1 = tau2).

    Propagates the CW divergence: a CW pump has no finite unconditional
    width, so no joint Gaussian exists to sample from.
    """
    cov = temporal_covariance(src, link)
    out = sample(cov, det, n, seed)
    out.metadata["source"] = {"sigma": src.sigma, "tau_p": src.tau_p, "cw": src.cw}
    out.metadata["link"] = {"beta": link.beta, "length": link.length}
    return out

"""Desk-scale synthetic sensor streams.

Each activity owns a sinusoid template (frequency, amplitude and offset per
channel); each subject transforms every template with a fixed phase shift,
amplitude scale and channel offset, standing in for person-specific
execution style.  Additive Gaussian noise completes the stream.  Windows
of one activity and subject therefore differ only in starting phase (plus
noise), while subjects spread each activity's windows around its template.

Template geometry (the _GEN constants) is sized so that window statistics
separate activities on average, yet adjacent classes overlap under subject
variation and window-phase jitter: low frequencies leave a fraction of a
period per window, so per-window statistics wobble with the start phase.
That wobble is the nuisance the consistency objectives are meant to
average out.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SensorStream

# Generator geometry: base frequency/amplitude ladders per activity,
# channel variation, class offsets, and subject-variation magnitudes.
# Low base frequencies leave ~0.5..3 periods per typical window, so window
# statistics wobble strongly with start phase; subject variation includes
# an execution-rate multiplier that raw waveforms expose but order
# statistics barely see.
_GEN = {
    "freq_base": 0.45,
    "freq_step": 0.35,
    "freq_chan": 0.12,       # per-channel frequency multiplier step
    "freq_jitter": 0.02,
    "amp_base": 0.9,
    "amp_step": 0.09,
    "amp_chan_lo": 0.95,
    "amp_chan_hi": 1.05,
    "offset_sigma": 0.18,    # class offset scale
    "subj_scale_lo": 0.88,
    "subj_scale_hi": 1.14,
    "subj_offset_sigma": 0.1,
    "subj_freq_lo": 0.92,    # per-subject execution-rate multiplier
    "subj_freq_hi": 1.08,
}


@dataclass
class SynthSpec:
    n_activities: int = 6
    n_subjects: int = 8
    n_channels: int = 3
    samples_per_class: int = 2048
    noise_sigma: float = 0.1
    sample_rate_hz: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if self.n_activities < 2:
            raise ValueError("need at least 2 activities")
        if self.n_subjects < 2:
            raise ValueError("need at least 2 subjects")
        if self.n_channels < 1:
            raise ValueError("need at least 1 channel")
        if self.samples_per_class < 2:
            raise ValueError("need at least 2 samples per class")
        if self.noise_sigma < 0:
            raise ValueError("noise sigma must be non-negative")


def synthesize(spec: SynthSpec) -> list:
    """Deterministic streams, one per subject, activities in a per-subject
    shuffled contiguous order."""
    rng = np.random.default_rng(spec.seed)
    m, s, c = spec.n_activities, spec.n_subjects, spec.n_channels
    g = _GEN

    freq = np.empty((m, c))
    amp = np.empty((m, c))
    for a in range(m):
        base_f = g["freq_base"] + g["freq_step"] * a
        base_a = g["amp_base"] + g["amp_step"] * a
        for ch in range(c):
            freq[a, ch] = base_f * (1.0 + g["freq_chan"] * ch) \
                + rng.normal(0.0, g["freq_jitter"])
            amp[a, ch] = base_a * rng.uniform(g["amp_chan_lo"], g["amp_chan_hi"])
    # Class offsets are redrawn until pairwise-distinct so that no two
    # activities collapse onto the same template by chance.
    min_gap = g["offset_sigma"] * np.sqrt(c)
    offset = rng.normal(0.0, g["offset_sigma"], size=(m, c))
    for _ in range(200):
        d = np.linalg.norm(offset[:, None, :] - offset[None, :, :], axis=2)
        np.fill_diagonal(d, np.inf)
        bad = np.unique(np.argwhere(d < min_gap).max(axis=1)) if (d < min_gap).any() else []
        if len(bad) == 0:
            break
        offset[bad] = rng.normal(0.0, g["offset_sigma"], size=(len(bad), c))

    chan_phase = 2.0 * np.pi * np.arange(c) / c
    streams = []
    for u in range(s):
        subj_scale = rng.uniform(g["subj_scale_lo"], g["subj_scale_hi"])
        subj_phase = rng.uniform(0.0, 2.0 * np.pi)
        subj_offset = rng.normal(0.0, g["subj_offset_sigma"], size=c)
        subj_rate = rng.uniform(g["subj_freq_lo"], g["subj_freq_hi"])
        order = rng.permutation(m)

        t_total = m * spec.samples_per_class
        values = np.empty((c, t_total), dtype=np.float64)
        labels = np.empty(t_total, dtype=np.int32)
        pos = 0
        for a in order:
            t = np.arange(spec.samples_per_class) / spec.sample_rate_hz
            for ch in range(c):
                wave = np.sin(2.0 * np.pi * freq[a, ch] * subj_rate * t
                              + subj_phase + chan_phase[ch])
                values[ch, pos:pos + spec.samples_per_class] = (
                    subj_scale * amp[a, ch] * wave + offset[a, ch] + subj_offset[ch])
            labels[pos:pos + spec.samples_per_class] = a
            pos += spec.samples_per_class
        if spec.noise_sigma > 0:
            values += rng.normal(0.0, spec.noise_sigma, size=values.shape)

        streams.append(SensorStream(
            stream_id=f"synth_s{u:02d}",
            subject_id=u,
            sample_rate_hz=spec.sample_rate_hz,
            channel_names=[f"ch{i}" for i in range(c)],
            values=values.astype(np.float32),
            activity_labels=labels,
        ))
    return streams

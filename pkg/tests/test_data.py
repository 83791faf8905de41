"""Windowing, downsampling, synthesis, splits and the window container."""

import numpy as np
import pytest

from harkit.data import (
    SensorStream,
    SynthSpec,
    load_streams,
    load_windows,
    majority_label,
    save_streams,
    save_windows,
    segment,
    downsample,
    stratified_split,
    subsample_labels,
    synthesize,
    window_set_from_streams,
)


def _stream(t=10, c=2, label=0, sid="s00", subject=0, rate=10.0):
    values = np.arange(c * t, dtype=np.float32).reshape(c, t)
    return SensorStream(sid, subject, rate, [f"ch{i}" for i in range(c)],
                        values, np.full(t, label, dtype=np.int32))


class TestSegment:
    def test_window_count_and_starts(self):
        ws = segment(_stream(t=10), window_len=4, step=2)
        assert [w.stream_pos for w in ws] == [0, 2, 4, 6]

    def test_positions_reconstruct_source_samples(self):
        stream = _stream(t=20, c=3)
        for w in segment(stream, 5, 3):
            assert np.array_equal(w.values,
                                  stream.values[:, w.stream_pos:w.stream_pos + 5])

    def test_trailing_partial_window_dropped(self):
        assert len(segment(_stream(t=9), 4, 2)) == 3  # starts 0,2,4; 6+4 > 9... start 5 no

    def test_too_long_window_warns_and_returns_empty(self):
        warnings = []
        out = segment(_stream(t=5), 10, 1, warnings=warnings)
        assert out == [] and len(warnings) == 1

    def test_majority_rule_discards_mixed_windows(self):
        labels = np.array([0] * 3 + [1] * 7, dtype=np.int32)
        s = _stream(t=10)
        s.activity_labels = labels
        ws = segment(s, 4, 2)
        # Window at 0: labels 0,0,0,1 -> majority 0; window at 2: 0,1,1,1 -> 1;
        # windows at 4, 6 -> all 1.
        assert [w.activity for w in ws] == [0, 1, 1, 1]

    def test_majority_exactly_half_is_kept(self):
        assert majority_label(np.array([2, 2, 3, 3])) == 2

    def test_unlabeled_majority_discarded(self):
        assert majority_label(np.array([-1, -1, -1, 5])) is None

    def test_uci_config_arithmetic(self):
        # 50 Hz, 2.56 s windows, 1.28 s overlap -> 128-sample windows, step 64
        assert int(round(2.56 * 50)) == 128
        assert int(round((2.56 - 1.28) * 50)) == 64

    def test_realdisp_config_arithmetic(self):
        # 50 Hz, non-overlapping 2 s -> 100/100
        assert int(round(2.0 * 50)) == 100


class TestDownsample:
    def test_decimation(self):
        s = _stream(t=6, c=1)
        s.values = np.array([[1, 2, 3, 4, 5, 6]], dtype=np.float32)
        out = downsample(s, 3)
        assert np.array_equal(out.values, [[1, 4]])
        assert out.activity_labels.shape == (2,)

    def test_rate_division(self):
        out = downsample(_stream(rate=100.0), 3)
        assert abs(out.sample_rate_hz - 33.3333333) < 1e-4

    def test_identity(self):
        s = _stream()
        out = downsample(s, 1)
        assert np.array_equal(out.values, s.values)

    def test_invalid_factor(self):
        with pytest.raises(ValueError):
            downsample(_stream(), 0)


class TestSynthesize:
    def test_same_seed_is_bit_identical(self):
        a = synthesize(SynthSpec(seed=7, samples_per_class=64))
        b = synthesize(SynthSpec(seed=7, samples_per_class=64))
        assert len(a) == len(b)
        for sa, sb in zip(a, b):
            assert np.array_equal(sa.values, sb.values)
            assert np.array_equal(sa.activity_labels, sb.activity_labels)

    def test_noiseless_windows_identical_up_to_phase(self):
        # With sigma=0 each (activity, subject, channel) segment is one fixed
        # sinusoid plus a constant, so x[t+1] + x[t-1] = a*x[t] + b holds for
        # a single (a, b) across the whole segment.  Every window is then the
        # same waveform at a different starting phase.
        spec = SynthSpec(seed=3, noise_sigma=0.0, samples_per_class=512)
        for stream in synthesize(spec)[:2]:
            for a_cls in np.unique(stream.activity_labels):
                seg = np.flatnonzero(stream.activity_labels == a_cls)
                for ch in range(stream.values.shape[0]):
                    x = stream.values[ch, seg].astype(np.float64)
                    y = x[2:] + x[:-2]
                    design = np.stack([x[1:-1], np.ones(x.size - 2)], axis=1)
                    coef, *_ = np.linalg.lstsq(design, y, rcond=None)
                    resid = np.abs(design @ coef - y).max()
                    assert resid < 1e-3 * max(np.abs(x).max(), 1.0)

    def test_stream_shapes_and_labels(self):
        spec = SynthSpec(n_activities=3, n_subjects=2, n_channels=2,
                         samples_per_class=100, seed=0)
        streams = synthesize(spec)
        assert len(streams) == 2
        for s in streams:
            assert s.values.shape == (2, 300)
            assert set(np.unique(s.activity_labels)) == {0, 1, 2}

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            SynthSpec(n_activities=1)
        with pytest.raises(ValueError):
            SynthSpec(n_subjects=1)


def _toy_windowset(counts=(25, 25, 25, 25), seed=0):
    rng = np.random.default_rng(seed)
    streams = []
    for cls, n in enumerate(counts):
        t = n * 4
        streams.append(SensorStream(
            f"s{cls:02d}", cls, 10.0, ["ch0"],
            rng.normal(size=(1, t)).astype(np.float32),
            np.full(t, cls, dtype=np.int32)))
    return window_set_from_streams(streams, window_len=4, step=4)


class TestSplits:
    def test_exact_stratification(self):
        ws = _toy_windowset()
        split = stratified_split(ws, (0.6, 0.2, 0.2), seed=1)
        for part, expect in zip(split, (15, 5, 5)):
            counts = np.bincount(part.activities, minlength=4)
            assert np.all(counts == expect)

    def test_same_seed_identical(self):
        ws = _toy_windowset()
        a = stratified_split(ws, seed=5)
        b = stratified_split(ws, seed=5)
        for pa, pb in zip(a, b):
            assert np.array_equal(pa.source_indices, pb.source_indices)

    def test_disjoint_union(self):
        ws = _toy_windowset((30, 17, 25, 12))
        split = stratified_split(ws, seed=2)
        all_idx = np.concatenate([p.source_indices for p in split])
        assert len(all_idx) == len(ws)
        assert len(np.unique(all_idx)) == len(ws)

    @pytest.mark.parametrize("seed", range(5))
    def test_within_one_of_exact_proportions(self, seed):
        rng = np.random.default_rng(seed)
        counts = tuple(int(v) for v in rng.integers(10, 80, size=5))
        ws = _toy_windowset(counts, seed=seed)
        split = stratified_split(ws, (0.5, 0.25, 0.25), seed=seed)
        for frac, part in zip((0.5, 0.25, 0.25), split):
            for cls, total in enumerate(counts):
                got = int(np.sum(part.activities == cls))
                assert abs(got - frac * total) <= 1

    def test_small_class_error_names_class(self):
        ws = _toy_windowset((25, 2, 25, 25))
        with pytest.raises(ValueError, match="class 1"):
            stratified_split(ws)

    def test_subject_wise_split_partitions_subjects(self):
        ws = _toy_windowset((20, 20, 20, 20))
        split = stratified_split(ws, (0.5, 0.25, 0.25), seed=0, by_subject=True)
        seen = [set(np.unique(p.persons)) for p in split]
        assert seen[0] & seen[1] == set() and seen[0] & seen[2] == set()

    def test_splits_preserve_stream_order(self):
        split = stratified_split(_toy_windowset(), seed=3)
        for part in split:
            part.check_ordered()


class TestSubsampleLabels:
    def test_full_fraction_returns_everything(self):
        ws = _toy_windowset()
        assert len(subsample_labels(ws, 1.0)) == len(ws)

    def test_rounded_size(self):
        ws = _toy_windowset((250, 250, 250, 250))
        assert len(subsample_labels(ws, 0.05, seed=0)) == 50

    @pytest.mark.parametrize("seed", range(5))
    def test_proportions_within_one(self, seed):
        rng = np.random.default_rng(seed + 100)
        counts = tuple(int(v) for v in rng.integers(40, 120, size=4))
        ws = _toy_windowset(counts, seed=seed)
        sub = subsample_labels(ws, 0.1, seed=seed)
        labels = ws.activities[sub.indices]
        for cls, total in enumerate(counts):
            assert abs(np.sum(labels == cls) - 0.1 * total) <= 1

    def test_every_class_kept_when_feasible(self):
        ws = _toy_windowset((200, 8, 200, 200))
        sub = subsample_labels(ws, 0.02, seed=1)
        labels = set(ws.activities[sub.indices].tolist())
        assert labels == {0, 1, 2, 3}
        assert 1 in sub.bumped_classes

    def test_deterministic(self):
        ws = _toy_windowset()
        a = subsample_labels(ws, 0.1, seed=9).indices
        b = subsample_labels(ws, 0.1, seed=9).indices
        assert np.array_equal(a, b)

    def test_invalid_fraction(self):
        with pytest.raises(ValueError):
            subsample_labels(_toy_windowset(), 0.0)


class TestContainers:
    def test_window_file_round_trip(self, tmp_path):
        ws = _toy_windowset((10, 12, 9, 11))
        path = tmp_path / "w.bin"
        save_windows(ws, path)
        back = load_windows(path)
        assert np.array_equal(back.values, ws.values)
        assert np.array_equal(back.activities, ws.activities)
        assert np.array_equal(back.persons, ws.persons)
        assert np.array_equal(back.stream_pos, ws.stream_pos)
        assert list(back.stream_ids) == list(ws.stream_ids)
        assert back.metadata["window_len"] == 4

    def test_window_file_rewrite_is_byte_identical(self, tmp_path):
        ws = _toy_windowset()
        p1, p2 = tmp_path / "a.bin", tmp_path / "b.bin"
        save_windows(ws, p1)
        save_windows(ws, p2)
        assert p1.read_bytes() == p2.read_bytes()

    def test_stream_container_round_trip(self, tmp_path):
        streams = synthesize(SynthSpec(seed=1, samples_per_class=50))
        path = tmp_path / "streams.bin"
        save_streams(streams, path)
        back = load_streams(path)
        assert len(back) == len(streams)
        for a, b in zip(sorted(streams, key=lambda s: s.stream_id), back):
            assert a.stream_id == b.stream_id
            assert np.array_equal(a.values, b.values)
            assert np.array_equal(a.activity_labels, b.activity_labels)


def test_windows_never_span_streams():
    ws = _toy_windowset((10, 10, 10, 10))
    # Every window's samples come from one stream by construction; verify
    # ordering and per-window stream id consistency.
    ws.check_ordered()
    for i in range(len(ws)):
        w = ws.window(i)
        assert w.stream_id == str(ws.stream_ids[i])

"""Parsers for the published file layouts of the three benchmark datasets.

Each parser returns one stream per subject/session restricted to the
channels used in the experiments, with per-timestep activity labels mapped
to contiguous class ids.  Rows with invalid sensor readings and rows whose
activity code is outside the experiment's class set are dropped, with
counts reported.
"""

from __future__ import annotations

import os
import re
from typing import NamedTuple

import numpy as np

from .core import SensorStream


class DatasetLayoutError(FileNotFoundError):
    """Dataset root does not match the published file layout."""


class ParseResult(NamedTuple):
    streams: list
    dropped_rows: int        # invalid sensor readings
    skipped_label_rows: int  # unlabeled or unknown activity codes
    warnings: list


# Windowing protocols (seconds are converted with round(seconds * rate)).
DATASET_CONFIGS = {
    "uci_smartphone": {
        "sample_rate_hz": 50.0,
        "downsample": 1,
        "window_seconds": 2.56,
        "step_seconds": 1.28,  # 1.28 s overlap of 2.56 s windows
        "n_classes": 7,        # 6 base activities + merged transition class
    },
    "pamap2": {
        "sample_rate_hz": 100.0,
        "downsample": 3,       # 100 Hz -> 33.33 Hz
        "window_seconds": 5.12,
        "step_seconds": 1.0,
        "n_classes": 12,
    },
    "realdisp": {
        "sample_rate_hz": 50.0,
        "downsample": 1,
        "window_seconds": 2.0,
        "step_seconds": 2.0,   # non-overlapping
        "n_classes": 33,
    },
}


def window_samples(seconds: float, rate_hz: float) -> int:
    return int(round(seconds * rate_hz))


def parse_dataset(name: str, root: str) -> ParseResult:
    if name == "uci_smartphone":
        return _parse_uci_smartphone(root)
    if name == "pamap2":
        return _parse_pamap2(root)
    if name == "realdisp":
        return _parse_realdisp(root)
    raise ValueError(
        f"unknown dataset {name!r}; expected one of {sorted(DATASET_CONFIGS)}")


# -- UCI smartphone (raw recordings with postural transitions) ------------

_UCI_CHANNELS = ["acc_x", "acc_y", "acc_z", "gyro_x", "gyro_y", "gyro_z"]
_UCI_TRANSITION_CLASS = 6  # codes 7..12 merge here; codes 1..6 map to 0..5


def _parse_uci_smartphone(root: str) -> ParseResult:
    raw = os.path.join(root, "RawData")
    labels_path = os.path.join(raw, "labels.txt")
    if not os.path.isfile(labels_path):
        raise DatasetLayoutError(
            f"UCI smartphone layout not found under {root!r}; expected "
            f"{labels_path} plus RawData/acc_expXX_userYY.txt and "
            f"RawData/gyro_expXX_userYY.txt files")
    label_rows = np.atleast_2d(np.loadtxt(labels_path, dtype=np.int64))

    acc_files = sorted(f for f in os.listdir(raw) if f.startswith("acc_"))
    if not acc_files:
        raise DatasetLayoutError(f"no RawData/acc_expXX_userYY.txt files under {root!r}")

    streams = []
    skipped = 0
    warnings = []
    for acc_name in acc_files:
        m = re.match(r"acc_exp(\d+)_user(\d+)\.txt$", acc_name)
        if not m:
            continue
        exp_id, user_id = int(m.group(1)), int(m.group(2))
        gyro_name = f"gyro_exp{m.group(1)}_user{m.group(2)}.txt"
        gyro_path = os.path.join(raw, gyro_name)
        if not os.path.isfile(gyro_path):
            raise DatasetLayoutError(
                f"missing {gyro_path} to pair with {os.path.join(raw, acc_name)}")
        acc = np.atleast_2d(np.loadtxt(os.path.join(raw, acc_name)))
        gyro = np.atleast_2d(np.loadtxt(gyro_path))
        if acc.shape != gyro.shape or acc.shape[1] != 3:
            raise DatasetLayoutError(
                f"{acc_name}: accelerometer {acc.shape} and gyroscope "
                f"{gyro.shape} must both be [T, 3]")
        t = acc.shape[0]
        labels = np.full(t, -1, dtype=np.int32)
        for row in label_rows:
            if row[0] != exp_id or row[1] != user_id:
                continue
            code, start, end = int(row[2]), int(row[3]), int(row[4])
            if 1 <= code <= 6:
                cls = code - 1
            elif 7 <= code <= 12:
                cls = _UCI_TRANSITION_CLASS
            else:
                skipped += min(end, t - 1) - start + 1
                continue
            labels[start:min(end, t - 1) + 1] = cls

        keep = labels >= 0
        skipped += int((~keep).sum())
        if keep.sum() == 0:
            warnings.append(f"{acc_name}: no labeled samples")
            continue
        values = np.concatenate([acc, gyro], axis=1)[keep].T
        streams.append(SensorStream(
            stream_id=f"uci_exp{exp_id:02d}_user{user_id:02d}",
            subject_id=user_id,
            sample_rate_hz=DATASET_CONFIGS["uci_smartphone"]["sample_rate_hz"],
            channel_names=list(_UCI_CHANNELS),
            values=values,
            activity_labels=labels[keep],
        ))
    return ParseResult(streams, 0, skipped, warnings)


# -- PAMAP2 (protocol recordings) ------------------------------------------

# Column layout: 0 timestamp, 1 activity id, 2 heart rate, then three IMUs
# (hand, chest, ankle) of 17 columns each: temperature, 3x acc (16g),
# 3x acc (6g), 3x gyro, 3x mag, 4x orientation.
_PAMAP2_IMUS = [("hand", 3), ("chest", 20), ("ankle", 37)]
_PAMAP2_ACTIVITY_MAP = {
    1: 0, 2: 1, 3: 2, 4: 3, 5: 4, 6: 5, 7: 6,
    12: 7, 13: 8, 16: 9, 17: 10, 24: 11,
}


def _pamap2_channel_columns():
    cols, names = [], []
    for imu, base in _PAMAP2_IMUS:
        for kind, offset in (("acc", 1), ("gyro", 7), ("mag", 10)):
            for axis_i, axis in enumerate("xyz"):
                cols.append(base + offset + axis_i)
                names.append(f"{imu}_{kind}_{axis}")
    return cols, names


def _parse_pamap2(root: str) -> ParseResult:
    protocol = os.path.join(root, "Protocol")
    if not os.path.isdir(protocol):
        raise DatasetLayoutError(
            f"PAMAP2 layout not found under {root!r}; expected "
            f"{os.path.join(protocol, 'subject1XX.dat')} files")
    files = sorted(f for f in os.listdir(protocol)
                   if re.match(r"subject\d+\.dat$", f))
    if not files:
        raise DatasetLayoutError(f"no subjectXXX.dat files under {protocol!r}")

    cols, names = _pamap2_channel_columns()
    streams = []
    dropped = 0
    skipped = 0
    warnings = []
    for fname in files:
        data = np.atleast_2d(np.loadtxt(os.path.join(protocol, fname)))
        if data.shape[1] != 54:
            raise DatasetLayoutError(
                f"{fname}: expected 54 columns, got {data.shape[1]}")
        raw_activity = data[:, 1].astype(np.int64)
        values = data[:, cols]

        known = np.isin(raw_activity, list(_PAMAP2_ACTIVITY_MAP))
        skipped += int((~known).sum())
        finite = np.isfinite(values).all(axis=1)
        dropped += int((known & ~finite).sum())
        keep = known & finite
        if keep.sum() == 0:
            warnings.append(f"{fname}: no usable rows")
            continue
        labels = np.array([_PAMAP2_ACTIVITY_MAP[a] for a in raw_activity[keep]],
                          dtype=np.int32)
        subject = int(re.findall(r"\d+", fname)[0])
        streams.append(SensorStream(
            stream_id=f"pamap2_subject{subject}",
            subject_id=subject,
            sample_rate_hz=DATASET_CONFIGS["pamap2"]["sample_rate_hz"],
            channel_names=list(names),
            values=values[keep].T,
            activity_labels=labels,
        ))
    return ParseResult(streams, dropped, skipped, warnings)


# -- REALDISP (ideal-placement recordings) ----------------------------------

_REALDISP_SENSORS = ["RLA", "RUA", "BACK", "LUA", "LLA", "RC", "RT", "LT", "LC"]


def _realdisp_channel_columns():
    cols, names = [], []
    for s, sensor in enumerate(_REALDISP_SENSORS):
        base = 2 + 13 * s  # two timestamp columns, 13 values per sensor
        for kind, offset in (("acc", 0), ("gyro", 3), ("mag", 6)):
            for axis_i, axis in enumerate("xyz"):
                cols.append(base + offset + axis_i)
                names.append(f"{sensor}_{kind}_{axis}")
    return cols, names


def _parse_realdisp(root: str) -> ParseResult:
    files = sorted(f for f in os.listdir(root)
                   if re.match(r"subject\d+_ideal\.log$", f)) if os.path.isdir(root) else []
    if not files:
        raise DatasetLayoutError(
            f"REALDISP layout not found under {root!r}; expected "
            f"subjectN_ideal.log files")

    cols, names = _realdisp_channel_columns()
    streams = []
    dropped = 0
    skipped = 0
    warnings = []
    for fname in files:
        data = np.atleast_2d(np.loadtxt(os.path.join(root, fname)))
        if data.shape[1] != 120:
            raise DatasetLayoutError(
                f"{fname}: expected 120 columns, got {data.shape[1]}")
        raw_activity = data[:, -1].astype(np.int64)
        values = data[:, cols]

        known = (raw_activity >= 1) & (raw_activity <= 33)
        skipped += int((~known).sum())
        finite = np.isfinite(values).all(axis=1)
        dropped += int((known & ~finite).sum())
        keep = known & finite
        if keep.sum() == 0:
            warnings.append(f"{fname}: no usable rows")
            continue
        subject = int(re.findall(r"\d+", fname)[0])
        streams.append(SensorStream(
            stream_id=f"realdisp_subject{subject:02d}",
            subject_id=subject,
            sample_rate_hz=DATASET_CONFIGS["realdisp"]["sample_rate_hz"],
            channel_names=list(names),
            values=values[keep].T,
            activity_labels=(raw_activity[keep] - 1).astype(np.int32),
        ))
    return ParseResult(streams, dropped, skipped, warnings)

"""On-disk containers: windows, streams, and JSON reports.

Window file layout ("har-windows-v1"): one canonical-JSON header line
(dims, channel names, dtype tag, dataset metadata, stream provenance),
a newline, the window values as little-endian float32 in [N, C, W] order,
then two little-endian int32 label arrays (activity, person).  The format
is seekable and language-neutral; identical content serializes to
identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .core import SensorStream, WindowSet

WINDOWS_FORMAT = "har-windows-v1"
STREAMS_FORMAT = "har-streams-v1"


class ContainerError(ValueError):
    pass


def _dump_header(header: dict) -> bytes:
    return json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n"


def save_windows(ws: WindowSet, path) -> None:
    unique_streams = sorted(set(ws.stream_ids.tolist()))
    stream_index = {sid: i for i, sid in enumerate(unique_streams)}
    header = {
        "format": WINDOWS_FORMAT,
        "dtype": "f32le",
        "n_windows": len(ws),
        "n_channels": ws.n_channels,
        "window_len": ws.window_len,
        "metadata": ws.metadata,
        "streams": unique_streams,
        "stream_index": [stream_index[sid] for sid in ws.stream_ids.tolist()],
        "stream_pos": ws.stream_pos.tolist(),
    }
    with open(path, "wb") as f:
        f.write(_dump_header(header))
        f.write(np.ascontiguousarray(ws.values, dtype="<f4").tobytes())
        f.write(np.ascontiguousarray(ws.activities, dtype="<i4").tobytes())
        f.write(np.ascontiguousarray(ws.persons, dtype="<i4").tobytes())


def load_windows(path) -> WindowSet:
    with open(path, "rb") as f:
        try:
            header = json.loads(f.readline().decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ContainerError(f"{path}: unreadable window file header: {e}") from e
        if header.get("format") != WINDOWS_FORMAT:
            raise ContainerError(
                f"{path}: expected format {WINDOWS_FORMAT!r}, got {header.get('format')!r}")
        n, c, w = header["n_windows"], header["n_channels"], header["window_len"]
        payload = f.read()
    need = n * c * w * 4 + 2 * n * 4
    if len(payload) != need:
        raise ContainerError(f"{path}: payload is {len(payload)} bytes, expected {need}")
    values = np.frombuffer(payload, dtype="<f4", count=n * c * w).reshape(n, c, w)
    activities = np.frombuffer(payload, dtype="<i4", count=n, offset=n * c * w * 4)
    persons = np.frombuffer(payload, dtype="<i4", count=n, offset=n * c * w * 4 + n * 4)
    streams = header["streams"]
    return WindowSet(
        values=values.copy(),
        activities=activities.copy(),
        persons=persons.copy(),
        stream_pos=np.array(header["stream_pos"], dtype=np.int64),
        stream_ids=np.array([streams[i] for i in header["stream_index"]]),
        metadata=header.get("metadata", {}),
    )


def save_streams(streams, path) -> None:
    ordered = sorted(streams, key=lambda s: s.stream_id)
    header = {
        "format": STREAMS_FORMAT,
        "dtype": "f32le",
        "streams": [
            {
                "stream_id": s.stream_id,
                "subject_id": s.subject_id,
                "sample_rate_hz": s.sample_rate_hz,
                "channel_names": list(s.channel_names),
                "length": s.length,
            }
            for s in ordered
        ],
    }
    with open(path, "wb") as f:
        f.write(_dump_header(header))
        for s in ordered:
            f.write(np.ascontiguousarray(s.values, dtype="<f4").tobytes())
            f.write(np.ascontiguousarray(s.activity_labels, dtype="<i4").tobytes())


def load_streams(path) -> list:
    with open(path, "rb") as f:
        try:
            header = json.loads(f.readline().decode())
        except (UnicodeDecodeError, json.JSONDecodeError) as e:
            raise ContainerError(f"{path}: unreadable stream file header: {e}") from e
        if header.get("format") != STREAMS_FORMAT:
            raise ContainerError(
                f"{path}: expected format {STREAMS_FORMAT!r}, got {header.get('format')!r}")
        payload = f.read()
    streams = []
    offset = 0
    for entry in header["streams"]:
        c = len(entry["channel_names"])
        t = entry["length"]
        values = np.frombuffer(payload, dtype="<f4", count=c * t, offset=offset).reshape(c, t)
        offset += c * t * 4
        labels = np.frombuffer(payload, dtype="<i4", count=t, offset=offset)
        offset += t * 4
        streams.append(SensorStream(
            stream_id=entry["stream_id"],
            subject_id=entry["subject_id"],
            sample_rate_hz=entry["sample_rate_hz"],
            channel_names=entry["channel_names"],
            values=values.copy(),
            activity_labels=labels.copy(),
        ))
    if offset != len(payload):
        raise ContainerError(f"{path}: {len(payload) - offset} trailing bytes")
    return streams


def save_json(obj, path) -> None:
    """Canonical JSON dump: sorted keys, stable separators, trailing newline."""
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, sort_keys=True, indent=2)
        f.write("\n")


def ingestion_report(ws: WindowSet, dataset: str, dropped_rows: int = 0,
                     skipped_label_rows: int = 0, warnings=None) -> dict:
    per_class = {int(c): int(n) for c, n in
                 zip(*np.unique(ws.activities, return_counts=True))}
    per_subject = {int(s): int(n) for s, n in
                   zip(*np.unique(ws.persons, return_counts=True))}
    return {
        "dataset": dataset,
        "n_windows": len(ws),
        "n_channels": ws.n_channels,
        "window_len": ws.window_len,
        "windows_per_class": per_class,
        "windows_per_subject": per_subject,
        "dropped_rows": int(dropped_rows),
        "skipped_label_rows": int(skipped_label_rows),
        "warnings": list(warnings or []),
    }

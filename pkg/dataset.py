"""
Dataset persistence: trace files, the dataset manifest, feature matrices
and trained-model files.
"""

import csv
import hashlib
import io
import json
import logging
import os
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from classification import MODEL_VERSION, TrainedModel
from errors import IntegrityError, SchemaMismatchError
from palm_control import GripperState
from procedure import SensorTrace
from sensor_model import SensorFrame


logger = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
HEADER_KEYS = ("schema_version", "label", "seed", "config_hash")
GRIPPER_COLUMNS = ["theta_pull", "theta_push", "w", "pull_role"]


def file_sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def trace_columns(channels: int) -> List[str]:
    return ["timestamp"] + [f"p{i + 1}" for i in range(channels)] + GRIPPER_COLUMNS


def trace_to_csv(trace: SensorTrace) -> str:
    """
    Serialise a trace: '# key: value' header lines, then a CSV table.

    Floats are written with repr so they read back bit-exactly.
    """
    output = io.StringIO()
    output.write(f"# schema_version: {config.SCHEMA_VERSION}\n")
    output.write(f"# label: {trace.label}\n")
    output.write(f"# seed: {trace.seed}\n")
    output.write(f"# config_hash: {trace.config_hash}\n")

    channels = len(trace.frames[0].pressures) if trace.frames else 0
    writer = csv.writer(output, lineterminator="\n")
    writer.writerow(trace_columns(channels))
    for frame, g in zip(trace.frames, trace.gripper):
        writer.writerow([repr(frame.timestamp)] + [repr(p) for p in frame.pressures]
                        + [repr(g.theta_pull), repr(g.theta_push), repr(g.w), g.pull_role])
    return output.getvalue()


def write_trace(trace: SensorTrace, path: str) -> str:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(trace_to_csv(trace))
    return path


def _parse_header(lines: List[str], path: str) -> Dict[str, str]:
    header = {}
    for line in lines:
        key, _, value = line[1:].partition(":")
        header[key.strip()] = value.strip()
    missing = [k for k in HEADER_KEYS if k not in header]
    if missing:
        raise SchemaMismatchError(f"{path}: header is missing {', '.join(missing)}")
    if header["schema_version"] != str(config.SCHEMA_VERSION):
        raise SchemaMismatchError(
            f"{path}: schema version {header['schema_version']}, expected {config.SCHEMA_VERSION}"
        )
    return header


def read_trace(path: str, l_mid: float = config.L_MID_MM) -> SensorTrace:
    """
    Load a trace file written by write_trace.

    Frames and gripper states are restored; contact states are not stored.

    Raises:
        SchemaMismatchError: header or columns do not match the trace layout
    """
    with open(path, "r", encoding="utf-8") as f:
        text = f.read()

    lines = text.splitlines()
    header_lines = [l for l in lines if l.startswith("#")]
    header = _parse_header(header_lines, path)

    reader = csv.reader(lines[len(header_lines):])
    columns = next(reader, None)
    if not columns or columns[0] != "timestamp" or columns[-len(GRIPPER_COLUMNS):] != GRIPPER_COLUMNS:
        raise SchemaMismatchError(f"{path}: unexpected columns {columns}")
    channels = len(columns) - 1 - len(GRIPPER_COLUMNS)

    frames, gripper = [], []
    for row_number, row in enumerate(reader, start=1):
        if len(row) != len(columns):
            raise SchemaMismatchError(f"{path}: row {row_number} has {len(row)} fields")
        values = [float(v) for v in row[:-1]]
        frames.append(SensorFrame(values[0], tuple(values[1:1 + channels])))
        theta_pull, theta_push, w = values[1 + channels:]
        gripper.append(GripperState.from_angles(w, theta_pull, theta_push, row[-1], l_mid))

    return SensorTrace(frames, gripper, header["label"], int(header["seed"]), header["config_hash"])


def trace_header(path: str) -> Dict[str, str]:
    with open(path, "r", encoding="utf-8") as f:
        lines = []
        for line in f:
            if not line.startswith("#"):
                break
            lines.append(line.rstrip("\n"))
    return _parse_header(lines, path)


def write_dataset(
    results: Sequence[Dict[str, Any]],
    out_dir: str,
    settings: config.Settings,
    seed: int,
    runs_per_object: int
) -> str:
    """
    Write one trace file per successful run plus the manifest.

    Args:
        results: RunProcessor result dicts, in run order
        out_dir: Output directory (created if missing)
        settings: Settings the runs used
        seed: Base seed of the dataset
        runs_per_object: Runs per shape

    Returns:
        Path of the manifest
    """
    os.makedirs(out_dir, exist_ok=True)
    runs, failures = [], []
    counters: Dict[str, int] = {}

    for result in results:
        label = result['label']
        counters[label] = counters.get(label, 0) + 1
        if not result['success']:
            failures.append({'label': label, 'seed': result['seed'], 'error': result['error']})
            continue
        name = f"{label}_{counters[label]:03d}.csv"
        path = write_trace(result['trace'], os.path.join(out_dir, name))
        runs.append({
            'file': name,
            'label': label,
            'seed': result['seed'],
            'config_hash': result['trace'].config_hash,
            'sha256': file_sha256(path),
            'frames': result['frames'],
            'placement': result.get('placement', 0),
        })

    manifest = {
        'schema_version': config.SCHEMA_VERSION,
        'created_by': 'etroll simulate',
        'base_seed': seed,
        'runs_per_object': runs_per_object,
        'config_hash': settings.config_hash(),
        'settings': settings.to_dict(),
        'runs': runs,
        'failures': failures,
    }
    manifest_path = os.path.join(out_dir, MANIFEST_NAME)
    with open(manifest_path, "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")

    if failures:
        logger.warning(f"{len(failures)} runs failed and were left out of the dataset")
    return manifest_path


def load_manifest(path: str, verify: bool = True) -> Dict[str, Any]:
    """
    Read a manifest and check every listed trace file.

    Args:
        path: Manifest file, or the dataset directory containing it
        verify: Check file hashes and header config hashes

    Raises:
        SchemaMismatchError: unknown schema version or label
        IntegrityError: a listed file is missing or does not match its record
    """
    if os.path.isdir(path):
        path = os.path.join(path, MANIFEST_NAME)
    with open(path, "r", encoding="utf-8") as f:
        manifest = json.load(f)

    if manifest.get('schema_version') != config.SCHEMA_VERSION:
        raise SchemaMismatchError(f"{path}: schema version {manifest.get('schema_version')}")

    root = os.path.dirname(os.path.abspath(path))
    for run in manifest.get('runs', []):
        if run['label'] not in config.SHAPES:
            raise SchemaMismatchError(f"{path}: unknown label {run['label']!r}")
        file_path = os.path.join(root, run['file'])
        run['path'] = file_path
        if not verify:
            continue
        if not os.path.exists(file_path):
            raise IntegrityError(f"Missing trace file {run['file']}")
        if file_sha256(file_path) != run['sha256']:
            raise IntegrityError(f"Trace file {run['file']} does not match its recorded hash")
        if trace_header(file_path)['config_hash'] != run['config_hash']:
            raise IntegrityError(f"Trace file {run['file']} has a different config hash")
    return manifest


def load_dataset(path: str) -> List[SensorTrace]:
    manifest = load_manifest(path)
    return [read_trace(run['path']) for run in manifest['runs']]


def write_features(path: str, X: np.ndarray, labels: Sequence[str], names: Sequence[str]) -> str:
    """Feature matrix as CSV: a label column followed by one column per feature."""
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["label"] + list(names))
        for label, row in zip(labels, np.asarray(X, dtype=float)):
            writer.writerow([label] + [repr(float(v)) for v in row])
    return path


def read_features(path: str) -> Tuple[np.ndarray, np.ndarray, List[str]]:
    """
    Load a feature matrix written by write_features.

    Returns:
        (matrix, labels, feature names)
    """
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if not header or header[0] != "label":
            raise SchemaMismatchError(f"{path}: first column must be 'label'")
        labels, rows = [], []
        for row_number, row in enumerate(reader, start=1):
            if len(row) != len(header):
                raise SchemaMismatchError(f"{path}: row {row_number} has {len(row)} fields")
            try:
                rows.append([float(v) for v in row[1:]])
            except ValueError as e:
                raise SchemaMismatchError(f"{path}: row {row_number}: {e}") from e
            labels.append(row[0])

    X = np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)
    return X, np.array(labels), header[1:]


def save_model(model: TrainedModel, path: str) -> str:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(model.to_dict(), f, sort_keys=True)
        f.write("\n")
    return path


def load_model(path: str) -> TrainedModel:
    with open(path, "r", encoding="utf-8") as f:
        data = json.load(f)
    if data.get('version') != MODEL_VERSION:
        raise SchemaMismatchError(f"{path}: model version {data.get('version')}, expected {MODEL_VERSION}")
    return TrainedModel.from_dict(data)

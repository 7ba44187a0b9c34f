"""Result persistence: results CSV, per-run histories, snapshots and the manifest.

Layout of an output directory::

    results.csv                 one row per run, columns ROW_FIELDS
    checks.csv                  name, passed, detail
    history/<run_id>.csv        per-run time series (header depends on the run kind)
    snapshots/<run_id>_<k>.json self-describing header
    snapshots/<run_id>_<k>.bin  payload: fields in header order, little-endian float64, cell-centre order
    manifest.json               config echo, code version, sha256 of every file, wall times

Floats are written with ``repr`` so CSV output is byte-identical across
repeated runs. Wall times live only in the manifest. When a scenario aborts,
every file written gets the suffix ``.incomplete``.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
import os
import platform
from pathlib import Path
from typing import Any, Optional

import numpy as np

from . import __version__
from .config import ScenarioConfig, config_to_dict, config_to_toml
from .scenarios import ROW_FIELDS, RunArtifact, ScenarioResult, Snapshot

OUTPUT_DIR_ENV = "CRIMEBLOWUP_OUTPUT_DIR"
SNAPSHOT_FORMAT = "crimeblowup-snapshot-1"
INCOMPLETE_SUFFIX = ".incomplete"
ARTIFACT_LABEL = "default physical parameters (chi = 2, n = 3, R = 1) are an artifact choice, not a reference set"


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return "nan"
        return repr(v)
    return str(value)


def _csv_text(header: tuple[str, ...], rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} columns, header has {len(header)}")
        writer.writerow([format_value(v) for v in row])
    return buf.getvalue()


def results_csv(result: ScenarioResult) -> str:
    return _csv_text(ROW_FIELDS, [tuple(r[k] for k in ROW_FIELDS) for r in result.rows])


def checks_csv(result: ScenarioResult) -> str:
    return _csv_text(("name", "passed", "detail"), [(c.name, c.passed, c.detail) for c in result.checks])


def history_csv(artifact: RunArtifact) -> str:
    return _csv_text(artifact.history_header, artifact.history)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


# --- snapshots ------------------------------------------------------------------


def snapshot_header(snap: Snapshot, payload_name: str) -> dict:
    return {
        "format": SNAPSHOT_FORMAT,
        "run_id": snap.run_id,
        "index": snap.index,
        "t": snap.t,
        "grid": snap.grid,
        "state": snap.state,
        "fields": list(snap.fields),
        "dtype": "<f8",
        "count": int(snap.grid["N"]),
        "order": "cell centres, innermost first",
        "payload": payload_name,
    }


def write_snapshot(snap: Snapshot, directory: Path, stem: str, suffix: str = "") -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    bin_path = directory / f"{stem}.bin{suffix}"
    json_path = directory / f"{stem}.json{suffix}"
    payload = b"".join(np.ascontiguousarray(v, dtype="<f8").tobytes() for v in snap.fields.values())
    bin_path.write_bytes(payload)
    header = snapshot_header(snap, bin_path.name)
    header["sha256"] = hashlib.sha256(payload).hexdigest()
    json_path.write_text(json.dumps(header, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return [json_path, bin_path]


def read_snapshot(json_path) -> tuple[dict, dict[str, np.ndarray]]:
    """Return (header, {field: values}); checks format, size and checksum."""
    json_path = Path(json_path)
    header = json.loads(json_path.read_text(encoding="utf-8"))
    if header.get("format") != SNAPSHOT_FORMAT:
        raise ValueError(f"{json_path}: not a snapshot header")
    payload = (json_path.parent / header["payload"]).read_bytes()
    if hashlib.sha256(payload).hexdigest() != header["sha256"]:
        raise ValueError(f"{json_path}: payload checksum mismatch")
    count = header["count"]
    names = header["fields"]
    data = np.frombuffer(payload, dtype=header["dtype"])
    if data.size != count * len(names):
        raise ValueError(f"{json_path}: payload holds {data.size} values, expected {count * len(names)}")
    return header, {name: data[i * count:(i + 1) * count].astype(np.float64) for i, name in enumerate(names)}


# --- emission -------------------------------------------------------------------


def resolve_output_dir(cli_dir: Optional[str], cfg: ScenarioConfig) -> Path:
    """--output-dir, then config, then the environment variable, then ./results."""
    for candidate in (cli_dir, cfg.output.directory, os.environ.get(OUTPUT_DIR_ENV)):
        if candidate:
            return Path(candidate)
    return Path("results")


def emit_results(result: ScenarioResult, cfg: ScenarioConfig, directory) -> Path:
    """Write every artifact of ``result`` below ``directory``; returns the manifest path."""
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    suffix = "" if result.complete else INCOMPLETE_SUFFIX
    written: list[Path] = []

    def put(rel: str, text: str) -> None:
        path = root / f"{rel}{suffix}"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        written.append(path)

    put("results.csv", results_csv(result))
    put("checks.csv", checks_csv(result))
    for art in result.artifacts:
        put(f"history/{art.run_id}.csv", history_csv(art))
        for snap in art.snapshots:
            written.extend(write_snapshot(snap, root / "snapshots", f"{art.run_id}_{snap.index:04d}", suffix))

    manifest = {
        "code": {"package": "crimeblowup", "version": __version__},
        "environment": {"python": platform.python_version(), "numpy": np.__version__},
        "scenario": result.scenario,
        "complete": result.complete,
        "error": result.error,
        "note": ARTIFACT_LABEL,
        "config": config_to_dict(cfg),
        "config_toml": config_to_toml(cfg),
        "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail} for c in result.checks],
        "files": {p.relative_to(root).as_posix(): sha256_file(p) for p in sorted(written)},
        "wall_time_seconds": dict(sorted(result.wall_times.items())),
    }
    manifest_path = root / f"manifest.json{suffix}"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path


def verify_manifest(manifest_path) -> dict[str, bool]:
    """Recompute every checksum listed in a manifest; maps file -> match."""
    manifest_path = Path(manifest_path)
    manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    root = manifest_path.parent
    return {rel: (root / rel).is_file() and sha256_file(root / rel) == digest for rel, digest in manifest["files"].items()}

"""Bit-exact file formats and dataset directory handling.

Dataset layout: one directory per video under a dataset root, holding
manifest.json, audio.csv / visual.csv (raw features, no header), clip_sim.csv
(row-stochastic similarities, category header), plg.csv / pld.csv (binary
pseudo labels, category header), and optional gt_audio.csv / gt_visual.csv.
Floats are written with repr, which round-trips exactly, so identical inputs
always produce byte-identical artifacts.  All writes go through a temp file
plus rename.
"""

from __future__ import annotations

import hashlib
import json
import os
from pathlib import Path

import numpy as np

from .labels import LabelSet, PseudoLabelMatrix, SimilarityMatrix, Stage, Violation, validate

SCHEMA_VERSION = 1
MANIFEST_KEYS = ("schema_version", "video_id", "T", "categories", "video_label")


def atomic_write_text(path, text: str):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _format_value(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path, matrix, header: list[str] | None = None):
    matrix = np.asarray(matrix)
    lines = []
    if header is not None:
        for name in header:
            if "," in name or "\n" in name:
                raise ValueError(f"category name {name!r} cannot appear in a CSV header")
        lines.append(",".join(header))
    is_int = np.issubdtype(matrix.dtype, np.integer)
    for row in matrix:
        if is_int:
            lines.append(",".join(str(int(x)) for x in row))
        else:
            lines.append(",".join(repr(float(x)) for x in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csv(path, with_header: bool, dtype=np.float64):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"missing file: {path}")
    text = path.read_text(encoding="utf-8")
    lines = [ln for ln in text.split("\n") if ln != ""]
    header = None
    if with_header:
        if not lines:
            raise ValueError(f"{path} is empty, expected a header row")
        header = lines[0].split(",")
        lines = lines[1:]
    if not lines:
        raise ValueError(f"{path} contains no data rows")
    rows = [ln.split(",") for ln in lines]
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ValueError(f"{path}: row {i} has {len(row)} fields, expected {width}")
    return np.array(rows, dtype=dtype), header


def write_manifest(video_dir, video_id: str, labels: LabelSet):
    doc = {
        "schema_version": SCHEMA_VERSION,
        "video_id": video_id,
        "T": labels.T,
        "categories": labels.categories,
        "video_label": [int(x) for x in labels.video_label],
    }
    atomic_write_text(Path(video_dir) / "manifest.json", json.dumps(doc, indent=1) + "\n")


def read_manifest(video_dir) -> dict:
    path = Path(video_dir) / "manifest.json"
    if not path.exists():
        raise FileNotFoundError(f"missing file: {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    missing = [k for k in MANIFEST_KEYS if k not in doc]
    if missing:
        raise ValueError(f"{path}: missing manifest keys {missing}")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {doc['schema_version']!r}")
    return doc


def load_labels(video_dir) -> LabelSet:
    doc = read_manifest(video_dir)
    return LabelSet(np.array(doc["video_label"]), doc["categories"], int(doc["T"]))


def load_features(video_dir):
    audio, _ = read_csv(Path(video_dir) / "audio.csv", with_header=False)
    visual, _ = read_csv(Path(video_dir) / "visual.csv", with_header=False)
    return audio, visual


def _check_header(path, header, labels: LabelSet):
    if header != labels.categories:
        raise ValueError(
            f"{path}: header does not match the manifest categories "
            f"(joins are by index, names must agree exactly)"
        )


def load_similarities(video_dir, labels: LabelSet) -> SimilarityMatrix:
    path = Path(video_dir) / "clip_sim.csv"
    values, header = read_csv(path, with_header=True)
    _check_header(path, header, labels)
    return SimilarityMatrix(values)


def load_pseudo(video_dir, stage: Stage, labels: LabelSet) -> PseudoLabelMatrix:
    path = Path(video_dir) / f"{stage.value}.csv"
    values, header = read_csv(path, with_header=True, dtype=np.int64)
    _check_header(path, header, labels)
    return PseudoLabelMatrix(values, stage)


def save_pseudo(video_dir, pseudo: PseudoLabelMatrix, labels: LabelSet):
    write_csv(Path(video_dir) / f"{pseudo.stage.value}.csv", pseudo.values, labels.categories)


def load_gt(video_dir, which: str, labels: LabelSet) -> np.ndarray:
    path = Path(video_dir) / f"gt_{which}.csv"
    values, header = read_csv(path, with_header=True, dtype=np.int64)
    _check_header(path, header, labels)
    return values.astype(np.int8)


def list_videos(root) -> list[Path]:
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"missing dataset directory: {root}")
    dirs = sorted(p for p in root.iterdir() if p.is_dir() and (p / "manifest.json").exists())
    if not dirs:
        raise FileNotFoundError(f"no video directories with a manifest.json under {root}")
    return dirs


def write_run_manifest(path, stage: str, config: dict, seed, inputs: list, outputs: list):
    """Provenance record for one pipeline stage.  Paths are stored relative to
    the manifest's own directory, so the content is a pure function of the
    stage inputs and re-runs stay byte-identical wherever the tree lives."""
    from . import __version__
    from .backend import active_backend

    base = Path(path).parent

    def rel(p):
        return os.path.relpath(p, base)

    doc = {
        "schema_version": SCHEMA_VERSION,
        "stage": stage,
        "toolkit_version": __version__,
        "backend": active_backend(),
        "seed": seed,
        "config": config,
        "input_digests": {rel(p): sha256_file(p) for p in sorted(str(x) for x in inputs)},
        "outputs": sorted(rel(p) for p in outputs),
    }
    atomic_write_text(path, json.dumps(doc, indent=1, sort_keys=True) + "\n")


def validate_video_dir(video_dir) -> list[Violation]:
    """Diagnose every invariant violation in one video directory.  Structural
    problems (missing or malformed files) are reported as violations too."""
    video_dir = Path(video_dir)
    out: list[Violation] = []
    try:
        labels = load_labels(video_dir)
    except (FileNotFoundError, ValueError, json.JSONDecodeError) as exc:
        return [Violation("manifest", str(exc))]

    sim_path = video_dir / "clip_sim.csv"
    if sim_path.exists():
        try:
            values, header = read_csv(sim_path, with_header=True)
            if header != labels.categories:
                out.append(Violation("header", f"{sim_path}: header differs from manifest categories"))
            else:
                if values.shape[0] != labels.T:
                    out.append(Violation(
                        "shape", f"{sim_path}: {values.shape[0]} rows, manifest says T={labels.T}"))
                if (values < 0).any() or (values > 1).any():
                    t, c = (int(i) for i in np.argwhere((values < 0) | (values > 1))[0])
                    out.append(Violation("domain", f"{sim_path}: entry outside [0, 1]", t, c))
                sums = values.sum(axis=1)
                for t in np.flatnonzero(np.abs(sums - 1.0) > 1e-6):
                    out.append(Violation(
                        "row-sum", f"{sim_path}: row sums to {sums[t]!r}, expected 1 within 1e-6", int(t)))
        except ValueError as exc:
            out.append(Violation("format", str(exc)))

    for stage in (Stage.PLG, Stage.PLD):
        path = video_dir / f"{stage.value}.csv"
        if not path.exists():
            continue
        try:
            values, header = read_csv(path, with_header=True, dtype=np.int64)
            if header != labels.categories:
                out.append(Violation("header", f"{path}: header differs from manifest categories"))
                continue
            for v in validate(labels, values):
                out.append(Violation(v.code, f"{path}: {v.message}", v.row, v.col))
        except ValueError as exc:
            out.append(Violation("format", str(exc)))

    for which in ("audio", "visual"):
        path = video_dir / f"gt_{which}.csv"
        if not path.exists():
            continue
        try:
            values, header = read_csv(path, with_header=True, dtype=np.int64)
            if header != labels.categories:
                out.append(Violation("header", f"{path}: header differs from manifest categories"))
            elif values.shape[0] != labels.T:
                out.append(Violation("shape", f"{path}: {values.shape[0]} rows, manifest says T={labels.T}"))
            elif not np.isin(values, (0, 1)).all():
                t, c = (int(i) for i in np.argwhere(~np.isin(values, (0, 1)))[0])
                out.append(Violation("domain", f"{path}: entry is not 0/1", t, c))
        except ValueError as exc:
            out.append(Violation("format", str(exc)))
    return out

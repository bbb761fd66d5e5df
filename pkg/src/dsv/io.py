"""Run directories, embedding files and the bundled AUC fixture tables.

Run directory layout::

    manifest.txt            flat ``key = value`` lines, no nesting
    train.csv               one vector per row, comma separated
    test.csv
    labels.txt              optional, one 0/1 per line
    aug_<hp>.csv            one per candidate
    test_<hp>.csv           optional, candidate-specific test embeddings
    scores_<hp>.txt         optional, one score per line

Manifest keys::

    format = dsv-run
    version = 1
    task_id = ...
    dim = 16
    hp_grid = 1e-05,2e-05,...
    train = train.csv
    test = test.csv
    labels = labels.txt               (optional)
    candidate.<i>.hp = ...
    candidate.<i>.aug = ...
    candidate.<i>.test = ...          (optional)
    candidate.<i>.scores = ...        (optional)

Embedding files ending in ``.bin`` use a raw container instead of text:
a 16-byte header (8-byte magic ``DSVEMB01``, little-endian uint32 dim,
uint32 count) followed by ``count * dim`` little-endian float64 values.
"""

from __future__ import annotations

import csv
import math
import struct
from importlib import resources
from pathlib import Path

import numpy as np

from dsv.errors import RunFormatError, ValidationError
from dsv.harness import CandidateModel, EvaluationTable, SelectionRun

MANIFEST = "manifest.txt"
FORMAT_NAME = "dsv-run"
FORMAT_VERSION = 1
BIN_MAGIC = b"DSVEMB01"
_HEADER = struct.Struct("<8sII")

FIXTURE_NAMES = ("cutout", "cutavg", "cutdiff", "cutpaste")


def format_float(x: float) -> str:
    """Shortest decimal text that parses back to the same double."""
    return repr(float(x))


# -- embedding files --------------------------------------------------------------------------------

def write_embeddings(path, Z) -> None:
    path = Path(path)
    Z = np.asarray(Z, dtype=np.float64)
    if path.suffix == ".bin":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(BIN_MAGIC, Z.shape[1], Z.shape[0]))
            fh.write(Z.astype("<f8").tobytes())
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for row in Z:
            fh.write(",".join(format_float(x) for x in row))
            fh.write("\n")


def read_embeddings(path, dim: int | None = None) -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise RunFormatError("file not found", path)
    if path.suffix == ".bin":
        return _read_bin(path, dim)
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            parts = text.split(",")
            if dim is not None and len(parts) != dim:
                raise RunFormatError(f"expected {dim} values, found {len(parts)}", path, lineno)
            if rows and len(parts) != len(rows[0]):
                raise RunFormatError(f"ragged row: {len(parts)} values, previous rows have {len(rows[0])}", path, lineno)
            try:
                vals = [float(p) for p in parts]
            except ValueError:
                raise RunFormatError("non-numeric value", path, lineno) from None
            if not all(math.isfinite(v) for v in vals):
                raise RunFormatError("non-finite value", path, lineno)
            rows.append(vals)
    if not rows:
        raise RunFormatError("no vectors in file", path)
    return np.array(rows, dtype=np.float64)


def _read_bin(path: Path, dim: int | None) -> np.ndarray:
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise RunFormatError("truncated header", path)
    magic, d, n = _HEADER.unpack_from(raw)
    if magic != BIN_MAGIC:
        raise RunFormatError("bad magic in binary embedding file", path)
    if dim is not None and d != dim:
        raise RunFormatError(f"expected dimension {dim}, header says {d}", path)
    body = raw[_HEADER.size:]
    if len(body) != 8 * n * d:
        raise RunFormatError(f"payload holds {len(body)} bytes, header implies {8 * n * d}", path)
    if n == 0:
        raise RunFormatError("no vectors in file", path)
    Z = np.frombuffer(body, dtype="<f8").reshape(n, d).astype(np.float64)
    bad = np.argwhere(~np.isfinite(Z))
    if bad.size:
        raise RunFormatError(f"non-finite value in vector {int(bad[0, 0])}", path)
    return Z


def read_values(path, kind: str = "score") -> np.ndarray:
    path = Path(path)
    if not path.is_file():
        raise RunFormatError("file not found", path)
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text:
                continue
            if kind == "label":
                if text not in ("0", "1"):
                    raise RunFormatError(f"label must be 0 or 1, got {text!r}", path, lineno)
                out.append(int(text))
                continue
            try:
                v = float(text)
            except ValueError:
                raise RunFormatError("non-numeric value", path, lineno) from None
            if not math.isfinite(v):
                raise RunFormatError("non-finite value", path, lineno)
            out.append(v)
    return np.array(out, dtype=np.int64 if kind == "label" else np.float64)


def write_values(path, values) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for v in values:
            fh.write((str(int(v)) if isinstance(v, (int, np.integer)) else format_float(v)) + "\n")


# -- manifest ---------------------------------------------------------------------------------------

def read_manifest(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise RunFormatError("manifest not found", path)
    entries = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            if "=" not in text:
                raise RunFormatError("expected 'key = value'", path, lineno)
            key, _, value = text.partition("=")
            key = key.strip()
            if key in entries:
                raise RunFormatError(f"duplicate key {key!r}", path, lineno)
            entries[key] = value.strip()
    return entries


def _require(entries: dict, key: str, path) -> str:
    if key not in entries:
        raise RunFormatError(f"missing key {key!r}", path)
    return entries[key]


def save_run(run: SelectionRun, directory, binary: bool = False) -> Path:
    """Write ``run`` as a run directory; returns the manifest path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    ext = ".bin" if binary else ".csv"
    lines = [
        f"format = {FORMAT_NAME}",
        f"version = {FORMAT_VERSION}",
        f"task_id = {run.task_id}",
        f"dim = {run.dim}",
        "hp_grid = " + ",".join(format_float(hp) for hp in run.hp_values),
        f"train = train{ext}",
        f"test = test{ext}",
    ]
    write_embeddings(directory / f"train{ext}", run.Z_trn)
    write_embeddings(directory / f"test{ext}", run.Z_test)
    if run.labels is not None:
        write_values(directory / "labels.txt", [int(x) for x in run.labels])
        lines.append("labels = labels.txt")
    lines.append(f"candidates = {len(run.candidates)}")
    for i, c in enumerate(run.candidates):
        tag = format_float(c.hp_value)
        lines.append(f"candidate.{i}.hp = {tag}")
        write_embeddings(directory / f"aug_{tag}{ext}", c.Z_aug)
        lines.append(f"candidate.{i}.aug = aug_{tag}{ext}")
        if c.Z_test is not None:
            write_embeddings(directory / f"test_{tag}{ext}", c.Z_test)
            lines.append(f"candidate.{i}.test = test_{tag}{ext}")
        if c.scores is not None:
            write_values(directory / f"scores_{tag}.txt", c.scores)
            lines.append(f"candidate.{i}.scores = scores_{tag}.txt")
    manifest = directory / MANIFEST
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def load_run(path) -> SelectionRun:
    """Load and validate a run directory (or its manifest); candidates come back in ascending hp order."""
    path = Path(path)
    manifest = path / MANIFEST if path.is_dir() else path
    root = manifest.parent
    entries = read_manifest(manifest)
    if _require(entries, "format", manifest) != FORMAT_NAME:
        raise RunFormatError(f"format must be {FORMAT_NAME!r}", manifest)
    try:
        version = int(_require(entries, "version", manifest))
        dim = int(_require(entries, "dim", manifest))
        n_cand = int(_require(entries, "candidates", manifest))
    except ValueError as exc:
        raise RunFormatError(f"bad integer field ({exc})", manifest) from None
    if version != FORMAT_VERSION:
        raise RunFormatError(f"unsupported version {version}", manifest)
    if dim < 1 or n_cand < 1:
        raise RunFormatError("dim and candidates must be positive", manifest)
    task_id = _require(entries, "task_id", manifest)

    Z_trn = read_embeddings(root / _require(entries, "train", manifest), dim)
    Z_test = read_embeddings(root / _require(entries, "test", manifest), dim)
    labels = None
    if "labels" in entries:
        lpath = root / entries["labels"]
        labels = read_values(lpath, kind="label")
        if labels.size != Z_test.shape[0]:
            raise RunFormatError(f"{labels.size} labels for {Z_test.shape[0]} test vectors", lpath)

    candidates = []
    for i in range(n_cand):
        prefix = f"candidate.{i}."
        try:
            hp = float(_require(entries, prefix + "hp", manifest))
        except ValueError:
            raise RunFormatError(f"bad number for {prefix}hp", manifest) from None
        aug = read_embeddings(root / _require(entries, prefix + "aug", manifest), dim)
        ctest = None
        if prefix + "test" in entries:
            tpath = root / entries[prefix + "test"]
            ctest = read_embeddings(tpath, dim)
            if ctest.shape[0] != Z_test.shape[0]:
                raise RunFormatError(f"{ctest.shape[0]} rows, run test set has {Z_test.shape[0]}", tpath)
        scores = None
        if prefix + "scores" in entries:
            spath = root / entries[prefix + "scores"]
            scores = read_values(spath)
            if scores.size != Z_test.shape[0]:
                raise RunFormatError(f"{scores.size} scores for {Z_test.shape[0]} test vectors", spath)
        candidates.append(CandidateModel(hp, aug, scores, ctest))
    unknown = [k for k in entries if k.startswith("candidate.") and int(k.split(".")[1]) >= n_cand
               if k.split(".")[1].isdigit()]
    if unknown:
        raise RunFormatError(f"entries for undeclared candidates: {unknown[:3]}", manifest)
    hps = [c.hp_value for c in candidates]
    if len(set(hps)) != len(hps):
        raise RunFormatError("duplicate hp values", manifest)
    candidates.sort(key=lambda c: c.hp_value)
    try:
        return SelectionRun(task_id, Z_trn, Z_test, tuple(candidates), labels)
    except ValidationError as exc:
        raise RunFormatError(str(exc), manifest) from None


# -- fixture tables -----------------------------------------------------------------------------------

def load_fixture_table(path) -> EvaluationTable:
    """Tab-separated table: header ``task<TAB>method...``, then one row per task."""
    path = Path(path)
    if not path.is_file():
        raise RunFormatError("fixture not found", path)
    with open(path, encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter="\t") if r and any(c.strip() for c in r)]
    if not rows:
        raise RunFormatError("empty fixture file", path)
    header = [h.strip() for h in rows[0]]
    if len(header) < 2 or header[0] != "task":
        raise RunFormatError("header must start with 'task' followed by method names", path, 1)
    methods = header[1:]
    tasks, values = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise RunFormatError(f"expected {len(header)} columns, found {len(row)}", path, lineno)
        try:
            vals = [float(x) for x in row[1:]]
        except ValueError:
            raise RunFormatError("non-numeric AUC", path, lineno) from None
        if not all(0.0 <= v <= 1.0 for v in vals):
            raise RunFormatError("AUC outside [0, 1]", path, lineno)
        tasks.append(row[0].strip())
        values.append(vals)
    if not tasks:
        raise RunFormatError("fixture has a header but no task rows", path)
    return EvaluationTable(tuple(methods), tuple(tasks), np.array(values).T)


def fixture_dir() -> Path:
    return Path(str(resources.files("dsv") / "data" / "fixtures"))


def load_fixtures(directory=None) -> dict:
    """All four bundled augmentation tables keyed by name, in a fixed order."""
    directory = fixture_dir() if directory is None else Path(directory)
    return {name: load_fixture_table(directory / f"{name}.tsv") for name in FIXTURE_NAMES}

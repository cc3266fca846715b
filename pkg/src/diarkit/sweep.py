"""Three-phase hyperparameter search with raw-prediction caching.

Phase 1 sweeps the clustering threshold with full single-pass inference,
phase 2 caches the raw (pre-cleanup) predictions at the winning threshold,
and phase 3 sweeps the post-processing grid purely from that cache, so no
inference is repeated. Phase 3 takes no backend at all; by construction its
scores equal an end-to-end run at the same settings.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass
from itertools import product
from pathlib import Path
from typing import Mapping, Sequence
from urllib.parse import quote

from .metrics import DerBreakdown, DerOptions, aggregate_der, score_der
from .orchestrate import (
    DEFAULT_TIMEOUT,
    BackendClient,
    BackendError,
    BackendRequest,
    Scalar,
)
from .postprocess import PostprocessParams, apply_postprocess
from .segio import Annotation, parse_rttm, parse_segments_json, write_segments_json

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib


class SweepError(Exception):
    """No usable result could be produced (for example, every threshold failed)."""


class CacheError(Exception):
    """The on-disk prediction cache is unusable."""


class CacheMissError(CacheError):
    """A required raw prediction is not in the cache."""

    def __init__(self, recording_id: str):
        self.recording_id = recording_id
        super().__init__(f"no cached prediction for recording {recording_id!r}")


def canonical_params(params: Mapping[str, Scalar]) -> str:
    """Key-sorted compact JSON; the digest and manifest serialization."""
    return json.dumps(dict(params), sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def config_digest(params: Mapping[str, Scalar]) -> str:
    """64-bit FNV-1a over the canonical params serialization, as hex."""
    digest = 0xCBF29CE484222325
    for byte in canonical_params(params).encode("utf-8"):
        digest ^= byte
        digest = (digest * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    return f"{digest:016x}"


def _ascending(values: Sequence[float], name: str) -> tuple[float, ...]:
    out = tuple(float(v) for v in values)
    if not out:
        raise ValueError(f"{name} must be non-empty")
    for v in out:
        if not math.isfinite(v):
            raise ValueError(f"{name} values must be finite, got {v}")
    if any(a >= b for a, b in zip(out, out[1:])):
        raise ValueError(f"{name} must be strictly ascending, got {list(out)}")
    return out


@dataclass(frozen=True)
class PostprocessGrid:
    """Candidate values per cleanup threshold, each strictly ascending."""

    min_duration: tuple[float, ...] = (0.2,)
    merge_gap: tuple[float, ...] = (0.5,)
    aba_max_duration: tuple[float, ...] = (0.3,)

    def __post_init__(self):
        for name in ("min_duration", "merge_gap", "aba_max_duration"):
            values = _ascending(getattr(self, name), name)
            if any(v < 0 for v in values):
                raise ValueError(f"{name} values must be >= 0")
            object.__setattr__(self, name, values)

    def points(self) -> list[dict[str, float]]:
        """Grid points in ascending lexicographic order of the
        alphabetically-ordered config tuple (aba, gap, min)."""
        return [
            {"aba_max_duration": aba, "merge_gap": gap, "min_duration": mind}
            for aba, gap, mind in product(self.aba_max_duration, self.merge_gap, self.min_duration)
        ]


@dataclass(frozen=True)
class SweepSpec:
    """Everything a sweep needs: thresholds, grid, labeled dataset, scoring."""

    thresholds: tuple[float, ...]
    postprocess_grid: PostprocessGrid
    dataset: tuple[tuple[str, Annotation], ...]
    der_options: DerOptions = DerOptions()

    def __post_init__(self):
        object.__setattr__(self, "thresholds", _ascending(self.thresholds, "thresholds"))
        dataset = tuple((str(path), ref) for path, ref in self.dataset)
        if not dataset:
            raise ValueError("dataset must be non-empty")
        seen = set()
        for _, ref in dataset:
            if ref.recording_id in seen:
                raise ValueError(f"duplicate recording id in dataset: {ref.recording_id!r}")
            seen.add(ref.recording_id)
        object.__setattr__(self, "dataset", dataset)


def _load_reference(path: Path) -> Annotation:
    text = path.read_text(encoding="utf-8")
    if path.suffix.lower() == ".rttm":
        annotations = parse_rttm(text)
        if len(annotations) != 1:
            raise ValueError(
                f"reference RTTM {path} must hold exactly one recording, got {len(annotations)}"
            )
        return annotations[0]
    return parse_segments_json(text)


def load_spec(path: str | Path) -> SweepSpec:
    """Read a sweep spec from a JSON or TOML file.

    Expected keys: ``thresholds`` (list of numbers), ``postprocess_grid``
    (object of ``min_duration`` / ``merge_gap`` / ``aba_max_duration``
    lists), ``dataset`` (list of ``{"audio_path", "reference"}`` entries
    where ``reference`` is a segments-JSON or RTTM path, relative to the
    spec file), and optional ``der_options``.
    """
    path = Path(path)
    if path.suffix.lower() == ".toml":
        doc = tomllib.loads(path.read_text(encoding="utf-8"))
    else:
        doc = json.loads(path.read_text(encoding="utf-8"))
    base = path.parent
    grid_doc = doc.get("postprocess_grid", {})
    grid = PostprocessGrid(
        min_duration=tuple(grid_doc.get("min_duration", (0.2,))),
        merge_gap=tuple(grid_doc.get("merge_gap", (0.5,))),
        aba_max_duration=tuple(grid_doc.get("aba_max_duration", (0.3,))),
    )
    dataset = []
    for entry in doc.get("dataset", []):
        audio_path = str(entry["audio_path"])
        reference = _load_reference(base / entry["reference"])
        dataset.append((audio_path, reference))
    options_doc = doc.get("der_options", {})
    options = DerOptions(
        collar=float(options_doc.get("collar", 0.0)),
        score_overlap=bool(options_doc.get("score_overlap", True)),
    )
    return SweepSpec(
        thresholds=tuple(doc.get("thresholds", ())),
        postprocess_grid=grid,
        dataset=tuple(dataset),
        der_options=options,
    )


# ---------------------------------------------------------------------------
# Results


@dataclass(frozen=True)
class SweepRow:
    config: dict[str, float]
    breakdown: DerBreakdown | None
    error: str | None = None


@dataclass(frozen=True)
class SweepResult:
    rows: tuple[SweepRow, ...]
    best_index: int

    @property
    def best(self) -> SweepRow:
        return self.rows[self.best_index]


def _pick_best(rows: Sequence[SweepRow]) -> int:
    """Index of the minimal defined DER; earlier rows win ties, and rows are
    generated in ascending config order, so ties resolve to the
    lexicographically smallest config."""
    best_index = -1
    best_der = math.inf
    for i, row in enumerate(rows):
        if row.breakdown is None or not row.breakdown.is_defined:
            continue
        if row.breakdown.der < best_der:
            best_der = row.breakdown.der
            best_index = i
    if best_index < 0:
        raise SweepError("no sweep configuration produced a defined DER")
    return best_index


def result_to_json(result: SweepResult) -> dict:
    rows = []
    for row in result.rows:
        doc: dict = {"config": row.config}
        if row.breakdown is None:
            doc.update(
                missed=None, false_alarm=None, confusion=None, total_reference=None, der=None
            )
        else:
            b = row.breakdown
            doc.update(
                missed=b.missed,
                false_alarm=b.false_alarm,
                confusion=b.confusion,
                total_reference=b.total_reference,
                der=b.der if b.is_defined else None,
            )
        doc["error"] = row.error
        rows.append(doc)
    return {"rows": rows, "best_index": result.best_index, "best_config": result.best.config}


def format_table(result: SweepResult) -> str:
    """Aligned plain-text table, one row per configuration."""
    header = ["config", "missed", "falarm", "confusion", "total", "der", ""]
    lines = [header]
    for i, row in enumerate(result.rows):
        config = " ".join(f"{k}={v:g}" for k, v in row.config.items())
        mark = "*" if i == result.best_index else ""
        if row.breakdown is None:
            lines.append([config, "-", "-", "-", "-", "-", row.error or "failed"])
        else:
            b = row.breakdown
            der = f"{b.der:.6f}" if b.is_defined else "undefined"
            lines.append(
                [
                    config,
                    f"{b.missed:.3f}",
                    f"{b.false_alarm:.3f}",
                    f"{b.confusion:.3f}",
                    f"{b.total_reference:.3f}",
                    der,
                    mark,
                ]
            )
    widths = [max(len(row[col]) for row in lines) for col in range(len(header))]
    return "\n".join(
        "  ".join(cell.ljust(width) for cell, width in zip(row, widths)).rstrip()
        for row in lines
    )


# ---------------------------------------------------------------------------
# Cache


class SweepCache:
    """Raw predictions on disk, one segments-JSON per (params, recording).

    Layout: ``root/<digest>/<recording>.json`` plus a ``manifest.json``
    holding the full canonical params, which guards against digest
    collisions. Writes go to a temp name then an atomic rename, so a cache
    directory is always either absent or complete per entry.
    """

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def _dir(self, params: Mapping[str, Scalar]) -> Path:
        return self.root / config_digest(params)

    def _entry_path(self, recording_id: str, params: Mapping[str, Scalar]) -> Path:
        return self._dir(params) / (quote(recording_id, safe="") + ".json")

    def _check_manifest(self, params: Mapping[str, Scalar], *, create: bool) -> None:
        directory = self._dir(params)
        manifest = directory / "manifest.json"
        serialized = canonical_params(params)
        if manifest.exists():
            stored = json.loads(manifest.read_text(encoding="utf-8")).get("params_canonical")
            if stored != serialized:
                raise CacheError(
                    f"digest collision under {directory}: stored params {stored!r} "
                    f"!= requested {serialized!r}"
                )
        elif create:
            directory.mkdir(parents=True, exist_ok=True)
            _atomic_write(manifest, json.dumps({"params_canonical": serialized}) + "\n")

    def has(self, recording_id: str, params: Mapping[str, Scalar]) -> bool:
        if not self._entry_path(recording_id, params).exists():
            return False
        self._check_manifest(params, create=False)
        return True

    def store(self, recording_id: str, params: Mapping[str, Scalar], annotation: Annotation) -> None:
        self._check_manifest(params, create=True)
        _atomic_write(self._entry_path(recording_id, params), write_segments_json(annotation))

    def load(self, recording_id: str, params: Mapping[str, Scalar]) -> Annotation:
        path = self._entry_path(recording_id, params)
        if not path.exists():
            raise CacheMissError(recording_id)
        self._check_manifest(params, create=False)
        return parse_segments_json(path.read_text(encoding="utf-8"))


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# Phases


def _inference_params(threshold: float) -> dict[str, float]:
    return {"threshold": float(threshold)}


def phase1_threshold_sweep(
    spec: SweepSpec,
    command: Sequence[str],
    *,
    timeout: float = DEFAULT_TIMEOUT,
) -> tuple[float, SweepResult]:
    """Full single-pass inference per threshold, scored with default cleanup.

    A backend failure marks that threshold's row failed and the sweep moves
    on; if every threshold fails, :class:`SweepError` is raised. Ties on
    aggregate DER go to the smallest threshold.
    """
    default_cleanup = PostprocessParams()
    rows = []
    for threshold in spec.thresholds:
        params = _inference_params(threshold)
        try:
            breakdowns = []
            with BackendClient(command, timeout) as client:
                for audio_path, reference in spec.dataset:
                    response = client.send(BackendRequest("diarize", audio_path, params=params))
                    raw = Annotation(reference.recording_id, response.segments)
                    hypothesis = apply_postprocess(raw, default_cleanup)
                    breakdowns.append(score_der(reference, hypothesis, spec.der_options))
            rows.append(SweepRow({"threshold": threshold}, aggregate_der(breakdowns)))
        except BackendError as exc:
            rows.append(SweepRow({"threshold": threshold}, None, error=str(exc)))
    result = SweepResult(tuple(rows), _pick_best(rows))
    return result.best.config["threshold"], result


def phase2_cache_predictions(
    best_threshold: float,
    spec: SweepSpec,
    command: Sequence[str],
    cache_root: str | Path,
    *,
    timeout: float = DEFAULT_TIMEOUT,
) -> SweepCache:
    """Store one raw (pre-cleanup) prediction per recording at the winner.

    Resumable: recordings already cached under the same params digest are
    skipped, so a warm second run performs zero backend calls (the backend
    process is not even spawned).
    """
    cache = SweepCache(cache_root)
    params = _inference_params(best_threshold)
    client: BackendClient | None = None
    try:
        for audio_path, reference in spec.dataset:
            rid = reference.recording_id
            if cache.has(rid, params):
                continue
            if client is None:
                client = BackendClient(command, timeout)
            response = client.send(BackendRequest("diarize", audio_path, params=params))
            cache.store(rid, params, Annotation(rid, response.segments))
    finally:
        if client is not None:
            client.close()
    return cache


def phase3_postprocess_sweep(
    cache: SweepCache,
    spec: SweepSpec,
    best_threshold: float,
) -> SweepResult:
    """Score every post-processing grid point from cached raw predictions.

    Takes no backend, by signature: the whole point of the cache is that no
    inference happens here. A missing cache entry raises
    :class:`CacheMissError` naming the recording.
    """
    params = _inference_params(best_threshold)
    raw = {ref.recording_id: cache.load(ref.recording_id, params) for _, ref in spec.dataset}
    rows = []
    for point in spec.postprocess_grid.points():
        cleanup = PostprocessParams(**point)
        breakdowns = [
            score_der(reference, apply_postprocess(raw[reference.recording_id], cleanup), spec.der_options)
            for _, reference in spec.dataset
        ]
        rows.append(SweepRow(point, aggregate_der(breakdowns)))
    return SweepResult(tuple(rows), _pick_best(rows))


@dataclass(frozen=True)
class FullSweepReport:
    phase1: SweepResult
    best_threshold: float
    phase3: SweepResult


def run_full_sweep(
    spec: SweepSpec,
    command: Sequence[str],
    cache_root: str | Path,
    *,
    timeout: float = DEFAULT_TIMEOUT,
) -> FullSweepReport:
    """Phase 1 -> 2 -> 3 in sequence."""
    best_threshold, phase1 = phase1_threshold_sweep(spec, command, timeout=timeout)
    cache = phase2_cache_predictions(best_threshold, spec, command, cache_root, timeout=timeout)
    phase3 = phase3_postprocess_sweep(cache, spec, best_threshold)
    return FullSweepReport(phase1, best_threshold, phase3)


def full_report_to_json(report: FullSweepReport) -> dict:
    return {
        "phase1": result_to_json(report.phase1),
        "best_threshold": report.best_threshold,
        "phase3": result_to_json(report.phase3),
    }

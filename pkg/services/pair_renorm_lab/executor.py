"""Run one configured experiment and persist its artifacts."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Optional, Sequence

from .analysis import (
    ConvergenceReport,
    fit_contraction_rate,
    orbit_table,
    scaling_study,
    shift_experiment,
    stable_set_experiment,
    universality_experiment,
)
from .circle_maps import CircleLift, RigidRotation, extract_pair, rotation_number, tune_omega
from .config import ExperimentConfig
from .errors import FitError, LabError
from .numerics import active_precision
from .pairs import CommutingPair, glued_rotation_number, pair_to_dict, read_pair, validate
from .renorm import OrbitRecord, renorm_orbit

LOGGER = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 2
REPORT_NAME = "run-report.json"
ERROR_NAME = "error.json"
LOG_NAME = "run.log"
ORBIT_FIELDS = ["k", "height", "eta0", "residual", "decay", "d_c0_prev", "d_c3_prev"]


@dataclass
class RunResult:
    exit_code: int
    output_dir: Path
    artifacts: list[Path] = field(default_factory=list)
    content_hash: Optional[str] = None
    report_path: Optional[Path] = None
    error: Optional[dict[str, Any]] = None
    limits: dict[str, Any] = field(default_factory=dict)


class _Artifacts:
    """Writes artifacts into one directory and remembers them in write order."""

    def __init__(self, root: Path) -> None:
        self.root = root
        self.paths: list[Path] = []

    def _target(self, name: str) -> Path:
        path = self.root / name
        path.parent.mkdir(parents=True, exist_ok=True)
        self.paths.append(path)
        return path

    def json(self, name: str, payload: Any) -> Path:
        path = self._target(name)
        path.write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        return path

    def csv(self, name: str, fieldnames: Sequence[str], rows: Iterable[Mapping[str, Any]]) -> Path:
        path = self._target(name)
        with path.open("w", encoding="utf-8", newline="") as handle:
            writer = csv.DictWriter(handle, fieldnames=list(fieldnames), extrasaction="ignore", lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow({key: _cell(value) for key, value in row.items()})
        return path


def _cell(value: Any) -> Any:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return repr(value)
    return value


def _number(value: Any) -> Any:
    """JSON value for a working-precision scalar (decimal string for non-float types)."""

    if value is None or isinstance(value, (bool, int, str)):
        return value
    if isinstance(value, float):
        return value
    return repr(float(value)) if active_precision().name == "double" else str(value)


# subcommands


def _tune(cfg: ExperimentConfig, out: _Artifacts) -> dict[str, Any]:
    tuning = tune_omega(cfg.c, cfg.target, cfg.tol)
    lift = CircleLift(tuning.omega, cfg.c)
    measured = rotation_number(lift, cfg.rotation_tol)
    target_value = tuning.target.value()
    out.json(
        "tune.json",
        {
            "c": cfg.c,
            "target": str(tuning.target),
            "omega": _number(tuning.omega),
            "bisections": tuning.steps,
            "rho_check": _number(measured),
            "target_value": _number(target_value),
            "error": float(abs(measured - target_value)),
        },
    )
    return {
        "lambda": None,
        "r2": None,
        "stop_reason": "completed",
        "limits": {"omega": _number(tuning.omega), "rho_check": _number(measured)},
    }


def _lift_for(cfg: ExperimentConfig) -> CircleLift | RigidRotation:
    if cfg.rigid is not None:
        return RigidRotation(cfg.rigid)
    return CircleLift(tune_omega(cfg.c, cfg.target, cfg.tol).omega, cfg.c)


def _extract(cfg: ExperimentConfig, out: _Artifacts) -> dict[str, Any]:
    pair = extract_pair(_lift_for(cfg), cfg.pair_settings())
    out.json("pair.json", pair_to_dict(pair))
    report = validate(pair, cfg.pair_settings())
    return {
        "lambda": None,
        "r2": None,
        "stop_reason": "completed",
        "limits": {"eta0": float(pair.a), "residual": report.residual},
    }


def _orbit_rows(record: OrbitRecord, cfg: ExperimentConfig) -> list[dict[str, Any]]:
    return [asdict(row) for row in orbit_table(record, cfg.metric_settings())]


def _write_orbit(record: OrbitRecord, cfg: ExperimentConfig, out: _Artifacts, name: str) -> list[dict[str, Any]]:
    rows = _orbit_rows(record, cfg)
    out.csv(name, ORBIT_FIELDS, rows)
    return rows


def _orbit_fit(rows: Sequence[Mapping[str, Any]]) -> tuple[Optional[float], Optional[float]]:
    distances = [row["d_c0_prev"] for row in rows if row["d_c0_prev"] is not None]
    try:
        fitted = fit_contraction_rate(distances)
    except FitError:
        return None, None
    return fitted.rate, fitted.r2


def _renorm_orbit(cfg: ExperimentConfig, out: _Artifacts) -> dict[str, Any]:
    pair = read_pair(Path(cfg.pair))
    record = renorm_orbit(pair, cfg.steps, cfg.renorm_settings())
    rows = _write_orbit(record, cfg, out, cfg.table_name)
    for k, stored in enumerate(record.pairs):
        out.json(f"pair_{k}.json", pair_to_dict(stored))
    rate, r2 = _orbit_fit(rows)
    return {
        "lambda": rate,
        "r2": r2,
        "stop_reason": record.stop_reason,
        "limits": {"eta0": float(record.pairs[-1].a), "heights": list(record.heights)},
    }


def _distance_rows(report: ConvergenceReport) -> list[dict[str, Any]]:
    return [asdict(row) for row in report.rows]


def _universality(cfg: ExperimentConfig, out: _Artifacts) -> dict[str, Any]:
    report = universality_experiment(cfg)
    run_a, run_b = report.runs
    _write_orbit(run_a.orbit, cfg, out, "orbit_a.csv")
    _write_orbit(run_b.orbit, cfg, out, "orbit_b.csv")
    out.csv(
        "distances.csv",
        ["step", "d_c0", "d_c3", "d_analytic", "height_a", "height_b"],
        _distance_rows(report),
    )
    return report.summary()


def _shift_demo(cfg: ExperimentConfig, out: _Artifacts) -> dict[str, Any]:
    report = shift_experiment(cfg)
    _write_orbit(report.run.orbit, cfg, out, "orbit.csv")
    out.csv(
        "distances.csv",
        ["k", "d_c0_period", "expected_height", "height"],
        [
            {
                "k": k,
                "d_c0_period": value,
                "expected_height": report.expected_heights[k] if k < len(report.expected_heights) else None,
                "height": report.observed_heights[k] if k < len(report.observed_heights) else None,
            }
            for k, value in report.periodic_distances
        ],
    )
    summary = report.summary()
    summary["limits"]["heights"] = list(report.observed_heights)
    return summary


def _scaling(cfg: ExperimentConfig, out: _Artifacts) -> dict[str, Any]:
    report = scaling_study(cfg)
    count = max(len(report.eta0_a), len(report.eta0_b))
    out.csv(
        "scaling.csv",
        ["k", "eta0_a", "eta0_b"],
        [
            {
                "k": k,
                "eta0_a": report.eta0_a[k] if k < len(report.eta0_a) else None,
                "eta0_b": report.eta0_b[k] if k < len(report.eta0_b) else None,
            }
            for k in range(count)
        ],
    )
    return report.summary()


def _stable_set(cfg: ExperimentConfig, out: _Artifacts) -> dict[str, Any]:
    report = stable_set_experiment(cfg)
    out.csv("distances.csv", ["k", "j", "d_c0", "heights_agree"], [asdict(row) for row in report.rows])
    return report.summary()


def _validate_pair(cfg: ExperimentConfig, out: _Artifacts) -> dict[str, Any]:
    pair: CommutingPair = read_pair(Path(cfg.pair))
    report = validate(pair, cfg.pair_settings())
    glued = glued_rotation_number(pair)
    passed = report.passed(cfg.pair_settings().residual_limit)
    out.json(
        "validation.json",
        {
            "kind": pair.kind,
            "normalized": bool(pair.normalized),
            "residual": report.residual,
            "monotone_ok": report.monotone_ok,
            "critical_ok": report.critical_ok,
            "ordered_ok": report.ordered_ok,
            "passed": passed,
            "glued_rotation_number": glued.value,
            "glued_accuracy": glued.accuracy,
        },
    )
    return {"lambda": None, "r2": None, "stop_reason": "completed" if passed else "validation", "limits": {}}


HANDLERS: dict[str, Callable[[ExperimentConfig, _Artifacts], dict[str, Any]]] = {
    "tune": _tune,
    "extract-pair": _extract,
    "renorm-orbit": _renorm_orbit,
    "universality": _universality,
    "shift-demo": _shift_demo,
    "scaling": _scaling,
    "stable-set": _stable_set,
    "validate-pair": _validate_pair,
}


def run(cfg: ExperimentConfig) -> RunResult:
    """Execute ``cfg.subcommand``; expected failures give exit code 2 and ``error.json``."""

    output_dir = cfg.out_dir
    output_dir.mkdir(parents=True, exist_ok=True)
    (output_dir / ERROR_NAME).unlink(missing_ok=True)
    out = _Artifacts(output_dir)

    try:
        summary = HANDLERS[cfg.subcommand](cfg, out)
    except LabError as exc:
        payload = exc.to_payload()
        payload["subcommand"] = cfg.subcommand
        (output_dir / ERROR_NAME).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
        LOGGER.error("%s failed: %s", cfg.subcommand, exc.message)
        return RunResult(exit_code=EXIT_FAILURE, output_dir=output_dir, error=payload)

    out.json("summary.json", summary)
    items = [{"filename": path.name, **_digest_file(path)} for path in out.paths]
    report = _build_report(cfg=cfg, items=items)
    report_path = output_dir / REPORT_NAME
    report_path.write_text(json.dumps(report, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")
    LOGGER.info("%s finished: %d artifacts, content hash %s", cfg.subcommand, len(items), report["contentHash"])
    return RunResult(
        exit_code=EXIT_OK,
        output_dir=output_dir,
        artifacts=list(out.paths),
        content_hash=report["contentHash"],
        report_path=report_path,
        limits=dict(summary.get("limits") or {}),
    )


def _digest_file(path: Path) -> dict[str, object]:
    sha = hashlib.sha256()
    size = 0
    with path.open("rb") as handle:
        for chunk in iter(lambda: handle.read(8192), b""):
            sha.update(chunk)
            size += len(chunk)
    return {"sha256": sha.hexdigest(), "bytes": size}


def _content_hash(items: Sequence[Mapping[str, object]]) -> str:
    sha = hashlib.sha256()
    for item in sorted(items, key=lambda entry: str(entry["filename"])):
        sha.update(f"{item['filename']}:{item['sha256']}\n".encode("utf-8"))
    return sha.hexdigest()


def _build_report(*, cfg: ExperimentConfig, items: Sequence[dict[str, object]]) -> dict[str, Any]:
    return {
        "subcommand": cfg.subcommand,
        "precision": cfg.precision,
        "config": cfg.report_payload(),
        "items": list(items),
        "contentHash": _content_hash(items),
    }

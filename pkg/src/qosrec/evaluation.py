"""Metrics, experiment reports, and the ablation/sweep harness.

Reports are JSON-lines records keyed by a run id (config hash + seed) so a
partially finished sweep can resume without redoing completed points.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .data import QosMatrix, split_by_density
from .errors import TrainingError
from .features import FeatureStore
from .model import ModelConfig
from .training import TrainConfig, select_best_epoch, train

MODEL_SELECTION = "lowest_test_mae"

DENSITY_GRID = (0.05, 0.10, 0.15, 0.20)

# Reference baseline scores on the WSDream benchmark (MAE, RMSE) per density,
# shipped for comparison tables only; none of these methods is implemented here.
PUBLISHED_BASELINES: dict[str, dict[str, dict[float, tuple[float, float]]]] = {
    "throughput": {
        "UIPCC": {0.05: (20.757, 60.799), 0.10: (22.370, 54.456), 0.15: (20.219, 50.704), 0.20: (18.928, 48.295)},
        "RegionKNN": {0.05: (25.632, 67.868), 0.10: (24.838, 67.551), 0.15: (24.584, 67.314), 0.20: (24.036, 66.176)},
        "LACF": {0.05: (23.169, 58.967), 0.10: (19.626, 53.105), 0.15: (17.795, 49.766), 0.20: (16.667, 47.625)},
        "PMF": {0.05: (19.082, 57.883), 0.10: (15.994, 48.071), 0.15: (14.670, 44.013), 0.20: (13.924, 41.714)},
        "BGCL": {0.05: (20.655, 61.297), 0.10: (19.318, 59.134), 0.15: (18.134, 58.804), 0.20: (18.017, 58.689)},
        "LMF-PP": {0.05: (18.301, 51.777), 0.10: (15.913, 46.142), 0.15: (14.745, 42.993), 0.20: (14.103, 41.408)},
        "DCALF": {0.05: (17.658, 51.632), 0.10: (15.360, 46.428), 0.15: (14.384, 43.402), 0.20: (13.670, 41.624)},
    },
    "response_time": {
        "UIPCC": {0.05: (0.625, 1.388), 0.10: (0.582, 1.330), 0.15: (0.501, 1.250), 0.20: (0.450, 1.197)},
        "RegionKNN": {0.05: (0.588, 1.543), 0.10: (0.548, 1.513), 0.15: (0.526, 1.513), 0.20: (0.516, 1.521)},
        "LACF": {0.05: (0.637, 1.444), 0.10: (0.566, 1.342), 0.15: (0.516, 1.276), 0.20: (0.483, 1.230)},
        "PMF": {0.05: (0.569, 1.537), 0.10: (0.487, 1.316), 0.15: (0.452, 1.221), 0.20: (0.431, 1.169)},
        "BGCL": {0.05: (0.461, 1.407), 0.10: (0.433, 1.374), 0.15: (0.424, 1.334), 0.20: (0.416, 1.320)},
        "LMF-PP": {0.05: (0.529, 1.341), 0.10: (0.473, 1.242), 0.15: (0.447, 1.210), 0.20: (0.426, 1.161)},
        "DCALF": {0.05: (0.546, 1.402), 0.10: (0.486, 1.265), 0.15: (0.464, 1.210), 0.20: (0.452, 1.176)},
    },
}


def evaluate_metrics(pairs) -> tuple[float, float]:
    """(MAE, RMSE) over (y, yhat) pairs: sum|err|/N and sqrt(sum(err^2)/N)."""
    arr = np.asarray(list(pairs) if not isinstance(pairs, np.ndarray) else pairs, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("empty pair list")
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"expected (n, 2) pairs, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("non-finite values in pairs")
    err = arr[:, 0] - arr[:, 1]
    n = len(err)
    mae = float(np.abs(err).sum() / n)
    rmse = float(math.sqrt(float((err * err).sum()) / n))
    return mae, rmse


@dataclass(frozen=True)
class EvalReport:
    dataset: str
    density: float
    variant: str
    mae: float
    rmse: float
    n_test: int
    seed: int
    best_epoch: int
    run_id: str

    def __post_init__(self) -> None:
        if self.mae < 0:
            raise ValueError("mae must be >= 0")
        if self.rmse < self.mae - 1e-12:
            raise ValueError("rmse must be >= mae")

    def to_dict(self) -> dict:
        return {
            "dataset": self.dataset,
            "density": self.density,
            "variant": self.variant,
            "mae": self.mae,
            "rmse": self.rmse,
            "n_test": self.n_test,
            "seed": self.seed,
            "best_epoch": self.best_epoch,
            "run_id": self.run_id,
            "model_selection": MODEL_SELECTION,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(
            dataset=d["dataset"],
            density=float(d["density"]),
            variant=d["variant"],
            mae=float(d["mae"]),
            rmse=float(d["rmse"]),
            n_test=int(d["n_test"]),
            seed=int(d["seed"]),
            best_epoch=int(d["best_epoch"]),
            run_id=d["run_id"],
        )


def make_run_id(
    dataset: str,
    density: float,
    variant: str,
    model_config: ModelConfig,
    train_config: TrainConfig,
    seed: int,
) -> str:
    payload = {
        "dataset": dataset,
        "density": density,
        "variant": variant,
        "model": model_config.to_dict(),
        "train": train_config.to_dict(),
    }
    digest = hashlib.sha256(
        json.dumps(payload, sort_keys=True, separators=(",", ":")).encode("utf-8")
    ).hexdigest()
    return f"{digest[:12]}-s{seed}"


def append_report(report: EvalReport, path: str | Path) -> bool:
    """Append one JSONL record unless its run_id is already present."""
    path = Path(path)
    if path.exists():
        for line in path.read_text(encoding="utf-8").splitlines():
            if line and json.loads(line).get("run_id") == report.run_id:
                return False
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("a", encoding="utf-8") as fh:
        fh.write(json.dumps(report.to_dict(), sort_keys=True) + "\n")
    return True


def read_reports(path: str | Path) -> list[EvalReport]:
    path = Path(path)
    reports = []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line:
            reports.append(EvalReport.from_dict(json.loads(line)))
    return reports


def run_experiment(
    matrix: QosMatrix,
    density: float,
    variant: str,
    seed: int,
    user_store: FeatureStore | None = None,
    service_store: FeatureStore | None = None,
    model_config: ModelConfig | None = None,
    train_config: TrainConfig | None = None,
    reports_path: str | Path | None = None,
) -> EvalReport:
    """End-to-end split -> train -> select -> evaluate for one configuration.

    ``variant`` is "id_only", "random", or the feature model's name; feature
    stores are required for every variant except "id_only".
    """
    needs_features = variant != "id_only"
    if needs_features and (user_store is None or service_store is None):
        raise TrainingError(f"variant {variant!r} requires user and service feature stores")
    if not needs_features:
        user_store = service_store = None

    split = split_by_density(matrix, density, seed)
    llm_dim = user_store.dim if user_store is not None else 0
    if model_config is None:
        model_config = ModelConfig(
            n_users=matrix.n_users,
            n_services=matrix.n_services,
            llm_dim=llm_dim,
            seed=seed,
        )
    if train_config is None:
        train_config = TrainConfig(shuffle_seed=seed)

    best_params, curve = train(split, user_store, service_store, model_config, train_config)
    best_epoch = select_best_epoch(curve)
    at_best = curve.epochs.index(best_epoch)
    report = EvalReport(
        dataset=matrix.kind,
        density=density,
        variant=variant,
        mae=curve.mae[at_best],
        rmse=curve.rmse[at_best],
        n_test=len(split.test),
        seed=seed,
        best_epoch=best_epoch,
        run_id=make_run_id(matrix.kind, density, variant, model_config, train_config, seed),
    )
    if reports_path is not None:
        append_report(report, reports_path)
    return report


SWEEP_AXES = ("mlp_depth", "mlp_width_factor", "batch_size", "learning_rate")

DEPTH_PATTERN = (32, 16, 8)


def mlp_dims_for_depth(depth: int, pattern: Sequence[int] = DEPTH_PATTERN) -> tuple[int, ...]:
    """Truncate or extend the width pattern; extension halves the last width, floor 4."""
    if depth < 1:
        raise ValueError("depth must be >= 1")
    dims = list(pattern[:depth])
    while len(dims) < depth:
        dims.append(max(4, dims[-1] // 2))
    return tuple(dims)


def mlp_dims_for_width_factor(
    factor: float, base: Sequence[int] = DEPTH_PATTERN
) -> tuple[int, ...]:
    """Scale every layer width by ``factor``, rounding half-up with floor 1."""
    if factor <= 0:
        raise ValueError("width factor must be > 0")
    return tuple(max(1, int(math.floor(d * factor + 0.5))) for d in base)


@dataclass
class SweepSpec:
    axis: str
    values: list
    base_model_config: ModelConfig
    base_train_config: TrainConfig

    def __post_init__(self) -> None:
        if self.axis not in SWEEP_AXES:
            raise ValueError(f"unknown sweep axis {self.axis!r}; choose from {SWEEP_AXES}")
        if not self.values:
            raise ValueError("sweep values must be non-empty")

    def base_value(self):
        if self.axis == "mlp_depth":
            return len(self.base_model_config.mlp_dims)
        if self.axis == "mlp_width_factor":
            return 1.0
        if self.axis == "batch_size":
            return self.base_train_config.batch_size
        return self.base_train_config.learning_rate

    def apply(self, value) -> tuple[ModelConfig, TrainConfig]:
        mc, tc = self.base_model_config, self.base_train_config
        if self.axis == "mlp_depth":
            dims = mlp_dims_for_depth(int(value), mc.mlp_dims if len(mc.mlp_dims) >= int(value) else DEPTH_PATTERN)
            mc = ModelConfig(**{**mc.to_dict(), "mlp_dims": dims})
        elif self.axis == "mlp_width_factor":
            dims = mlp_dims_for_width_factor(float(value), mc.mlp_dims)
            mc = ModelConfig(**{**mc.to_dict(), "mlp_dims": dims})
        elif self.axis == "batch_size":
            tc = TrainConfig(**{**tc.to_dict(), "batch_size": int(value)})
        else:
            tc = TrainConfig(**{**tc.to_dict(), "learning_rate": float(value)})
        return mc, tc


@dataclass
class SweepResult:
    spec: SweepSpec
    reports: list[EvalReport]
    base_report: EvalReport
    relative_change: list[dict] = field(default_factory=list)

    def to_csv(self, path: str | Path) -> None:
        lines = ["axis,value,mae,rmse,mae_rel_change,rmse_rel_change\n"]
        for row in self.relative_change:
            lines.append(
                f"{self.spec.axis},{row['value']!r},{row['mae']!r},{row['rmse']!r},"
                f"{row['mae_rel_change']!r},{row['rmse_rel_change']!r}\n"
            )
        Path(path).write_text("".join(lines), encoding="utf-8")


def run_sweep(
    spec: SweepSpec,
    matrix: QosMatrix,
    density: float,
    variant: str,
    seed: int,
    user_store: FeatureStore | None = None,
    service_store: FeatureStore | None = None,
    reports_path: str | Path | None = None,
) -> SweepResult:
    """One experiment per axis value, plus relative change against the base point."""
    reports = []
    base_report = None
    base_value = spec.base_value()
    for value in spec.values:
        mc, tc = spec.apply(value)
        report = run_experiment(
            matrix, density, variant, seed,
            user_store=user_store, service_store=service_store,
            model_config=mc, train_config=tc, reports_path=reports_path,
        )
        reports.append(report)
        if _same_value(value, base_value):
            base_report = report
    if base_report is None:
        mc, tc = spec.apply(base_value)
        base_report = run_experiment(
            matrix, density, variant, seed,
            user_store=user_store, service_store=service_store,
            model_config=mc, train_config=tc, reports_path=reports_path,
        )
    result = SweepResult(spec=spec, reports=reports, base_report=base_report)
    for value, report in zip(spec.values, reports):
        result.relative_change.append(
            {
                "value": value,
                "mae": report.mae,
                "rmse": report.rmse,
                "mae_rel_change": (report.mae - base_report.mae) / base_report.mae,
                "rmse_rel_change": (report.rmse - base_report.rmse) / base_report.rmse,
            }
        )
    return result


def _same_value(a, b) -> bool:
    try:
        return math.isclose(float(a), float(b), rel_tol=0.0, abs_tol=0.0)
    except (TypeError, ValueError):
        return a == b


def render_summary_csv(reports: list[EvalReport], dataset: str) -> str:
    """Comparison table (model x density x {MAE, RMSE}) including baselines."""
    header = ["model"]
    for d in DENSITY_GRID:
        pct = f"{d:.0%}"
        header.extend([f"mae_{pct}", f"rmse_{pct}"])
    lines = [",".join(header) + "\n"]
    for name, per_density in PUBLISHED_BASELINES[dataset].items():
        cells = [name]
        for d in DENSITY_GRID:
            mae, rmse = per_density[d]
            cells.extend([repr(mae), repr(rmse)])
        lines.append(",".join(cells) + "\n")
    ours: dict[str, dict[float, EvalReport]] = {}
    for report in reports:
        if report.dataset == dataset:
            ours.setdefault(report.variant, {})[report.density] = report
    for variant in sorted(ours):
        cells = [variant]
        for d in DENSITY_GRID:
            report = ours[variant].get(d)
            if report is None:
                cells.extend(["", ""])
            else:
                cells.extend([repr(report.mae), repr(report.rmse)])
        lines.append(",".join(cells) + "\n")
    return "".join(lines)

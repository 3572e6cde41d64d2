"""Command-line entry point for the QoS prediction pipeline.

Stages are separate subcommands so artifacts can be produced incrementally:

    qosrec ingest    split a QoS matrix into train/test files
    qosrec prompts   build the sentence manifest from the entity tables
    qosrec features  fetch embeddings over HTTP, or generate random vectors
    qosrec train     fit a model and write checkpoint + curve + report
    qosrec eval      score an existing checkpoint on a stored split
    qosrec sweep     run one hyperparameter axis, reusing finished points
    qosrec report    render the comparison table as CSV

Every command reads an optional JSON config (``--config``); flags override
file values, and the merged result is written next to the outputs. Artifacts
contain no timestamps, so re-running a command reproduces identical bytes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .data import ingest_matrix, ingest_services, ingest_users, read_split, split_by_density, write_split
from .errors import ConfigError, QosrecError
from .evaluation import (
    EvalReport,
    SweepSpec,
    append_report,
    evaluate_metrics,
    make_run_id,
    read_reports,
    render_summary_csv,
    run_sweep,
)
from .features import FeatureStore, fetch_embeddings, random_features, read_feature_file, write_feature_file
from .model import ModelConfig, load_checkpoint, predict_from_projected, project_features, save_checkpoint
from .prompts import build_prompts, read_prompt_manifest, write_prompt_manifest
from .training import TrainConfig, select_best_epoch, train

DATASET_KINDS = ("throughput", "response_time")
VARIANTS = ("phi3mini", "roberta", "id_only", "random")

ENDPOINT_ENV = "QOS_EMBED_ENDPOINT"


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file not found: {p}")
    try:
        config = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON: {exc}") from None
    if not isinstance(config, dict):
        raise ConfigError(f"{p}: config must be a JSON object")
    return config


def _merged(args: argparse.Namespace, config: dict, key: str, default=None, required: bool = False):
    """Flag value if given, else config-file value, else default."""
    value = getattr(args, key, None)
    if value is None:
        value = config.get(key, default)
    if value is None and required:
        raise ConfigError(f"missing required option: --{key.replace('_', '-')}")
    return value


def _require_path(value: str, what: str) -> Path:
    p = Path(value)
    if not p.exists():
        raise ConfigError(f"{what} not found: {p}")
    return p


def _parse_mlp_dims(text) -> tuple[int, ...]:
    if isinstance(text, (list, tuple)):
        return tuple(int(d) for d in text)
    try:
        dims = tuple(int(tok) for tok in str(text).split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"mlp_dims must be comma-separated integers, got {text!r}") from None
    if not dims:
        raise ConfigError("mlp_dims must name at least one layer")
    return dims


def _write_json(path: Path, payload: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", encoding="utf-8")


# ---------------------------------------------------------------------------
# subcommands


def cmd_ingest(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    matrix_path = _require_path(_merged(args, config, "matrix", required=True), "matrix file")
    dataset = _merged(args, config, "dataset", required=True)
    density = float(_merged(args, config, "density", required=True))
    seed = int(_merged(args, config, "seed", 0))
    out_dir = Path(_merged(args, config, "out", required=True))

    matrix = ingest_matrix(matrix_path, dataset)
    split = split_by_density(matrix, density, seed)
    manifest = write_split(split, out_dir)
    _write_json(
        out_dir / "effective_config.json",
        {
            "dataset": dataset,
            "density": density,
            "seed": seed,
            "paths": {"matrix": str(matrix_path), "out": str(out_dir)},
        },
    )
    print(
        f"split {dataset} density={density} seed={seed}: "
        f"{manifest['n_train']} train / {manifest['n_test']} test -> {out_dir}"
    )
    return 0


def cmd_prompts(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    users_path = _require_path(_merged(args, config, "users", required=True), "user table")
    services_path = _require_path(_merged(args, config, "services", required=True), "service table")
    out_path = Path(_merged(args, config, "out", required=True))

    users = ingest_users(users_path)
    services = ingest_services(services_path)
    prompts = build_prompts(users, services)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    write_prompt_manifest(prompts, out_path)
    print(f"{len(prompts)} prompts ({len(users)} users, {len(services)} services) -> {out_path}")
    return 0


def cmd_features_fetch(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    manifest_path = _require_path(_merged(args, config, "prompts", required=True), "prompt manifest")
    model_name = _merged(args, config, "model", required=True)
    pooling = _merged(args, config, "pooling", required=True)
    endpoint = os.environ.get(ENDPOINT_ENV) or _merged(args, config, "endpoint", required=True)
    out_users = Path(_merged(args, config, "out_users", required=True))
    out_services = Path(_merged(args, config, "out_services", required=True))

    template_hash, prompts = read_prompt_manifest(manifest_path)
    for kind, out_path in (("user", out_users), ("service", out_services)):
        subset = [p for p in prompts if p.entity_kind == kind]
        if not subset:
            raise ConfigError(f"prompt manifest has no {kind} prompts")
        store = fetch_embeddings(
            endpoint, subset, model_name, pooling, template_hash=template_hash
        )
        out_path.parent.mkdir(parents=True, exist_ok=True)
        write_feature_file(store, out_path)
        print(f"{kind}: {len(store.vectors)} vectors of dim {store.dim} -> {out_path}")
    return 0


def cmd_features_random(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    n_users = int(_merged(args, config, "n_users", required=True))
    n_services = int(_merged(args, config, "n_services", required=True))
    dim = int(_merged(args, config, "dim", required=True))
    seed = int(_merged(args, config, "seed", 0))
    out_users = Path(_merged(args, config, "out_users", required=True))
    out_services = Path(_merged(args, config, "out_services", required=True))

    for kind, n, out_path in (("user", n_users, out_users), ("service", n_services, out_services)):
        store = random_features(kind, range(n), dim, seed)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        write_feature_file(store, out_path)
        print(f"{kind}: {n} random vectors of dim {dim} -> {out_path}")
    return 0


def _load_stores(
    args: argparse.Namespace, config: dict, variant: str, matrix, seed: int
) -> tuple[FeatureStore | None, FeatureStore | None]:
    if variant == "id_only":
        return None, None
    if variant == "random":
        dim = int(_merged(args, config, "llm_dim", 768))
        feature_seed = int(_merged(args, config, "feature_seed", seed))
        return (
            random_features("user", range(matrix.n_users), dim, feature_seed),
            random_features("service", range(matrix.n_services), dim, feature_seed),
        )
    user_path = _require_path(
        _merged(args, config, "user_features", required=True), "user feature file"
    )
    service_path = _require_path(
        _merged(args, config, "service_features", required=True), "service feature file"
    )
    return read_feature_file(user_path), read_feature_file(service_path)


def _build_configs(
    args: argparse.Namespace, config: dict, matrix, llm_dim: int, seed: int
) -> tuple[ModelConfig, TrainConfig]:
    model_config = ModelConfig(
        n_users=matrix.n_users,
        n_services=matrix.n_services,
        embed_dim=int(_merged(args, config, "embed_dim", 16)),
        llm_dim=llm_dim,
        proj_dim=int(_merged(args, config, "proj_dim", 16)),
        mlp_dims=_parse_mlp_dims(_merged(args, config, "mlp_dims", "32,16,8")),
        seed=seed,
    )
    train_config = TrainConfig(
        huber_delta=float(_merged(args, config, "huber_delta", 1.0)),
        learning_rate=float(_merged(args, config, "learning_rate", 1e-4)),
        batch_size=int(_merged(args, config, "batch_size", 256)),
        max_epochs=int(_merged(args, config, "max_epochs", 1500)),
        shuffle_seed=seed,
        eval_every=int(_merged(args, config, "eval_every", 1)),
    )
    return model_config, train_config


def cmd_train(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    matrix_path = _require_path(_merged(args, config, "matrix", required=True), "matrix file")
    dataset = _merged(args, config, "dataset", required=True)
    density = float(_merged(args, config, "density", required=True))
    variant = _merged(args, config, "variant", required=True)
    seed = int(_merged(args, config, "seed", 0))
    out_dir = Path(_merged(args, config, "out", "."))

    matrix = ingest_matrix(matrix_path, dataset)
    user_store, service_store = _load_stores(args, config, variant, matrix, seed)
    llm_dim = user_store.dim if user_store is not None else 0
    model_config, train_config = _build_configs(args, config, matrix, llm_dim, seed)

    run_id = make_run_id(dataset, density, variant, model_config, train_config, seed)
    run_dir = out_dir / "runs" / run_id
    run_dir.mkdir(parents=True, exist_ok=True)
    _write_json(
        run_dir / "effective_config.json",
        {
            "dataset": dataset,
            "density": density,
            "variant": variant,
            "seed": seed,
            "model": model_config.to_dict(),
            "train": train_config.to_dict(),
            "paths": {"matrix": str(matrix_path), "out": str(out_dir)},
        },
    )

    split = split_by_density(matrix, density, seed)
    params, curve = train(split, user_store, service_store, model_config, train_config)
    save_checkpoint(params, run_dir / "checkpoint.qck1")
    curve.to_csv(run_dir / "curve.csv")

    if len(curve) > 0:
        best_epoch = select_best_epoch(curve)
        at_best = curve.epochs.index(best_epoch)
        report = EvalReport(
            dataset=dataset,
            density=density,
            variant=variant,
            mae=curve.mae[at_best],
            rmse=curve.rmse[at_best],
            n_test=len(split.test),
            seed=seed,
            best_epoch=best_epoch,
            run_id=run_id,
        )
        _write_json(run_dir / "report.json", report.to_dict())
        append_report(report, out_dir / "reports.jsonl")
        print(
            f"{run_id}: best epoch {best_epoch}, MAE {report.mae:.6g}, RMSE {report.rmse:.6g}"
        )
    else:
        print(f"{run_id}: no epochs trained")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    checkpoint_path = _require_path(_merged(args, config, "checkpoint", required=True), "checkpoint")
    split_dir = _require_path(_merged(args, config, "split", required=True), "split directory")
    out_path = _merged(args, config, "out")

    params = load_checkpoint(checkpoint_path)
    split = read_split(split_dir)
    proj_u = proj_s = None
    if not params.config.id_only:
        user_store = read_feature_file(
            _require_path(_merged(args, config, "user_features", required=True), "user feature file")
        )
        service_store = read_feature_file(
            _require_path(
                _merged(args, config, "service_features", required=True), "service feature file"
            )
        )
        proj_u = project_features(params, user_store.dense(params.config.n_users))
        proj_s = project_features(params, service_store.dense(params.config.n_services))
    yhat = predict_from_projected(
        params,
        split.test.users.astype("int64"),
        split.test.services.astype("int64"),
        proj_u,
        proj_s,
    )
    mae, rmse = evaluate_metrics(list(zip(split.test.values, yhat)))
    payload = {
        "mae": mae,
        "rmse": rmse,
        "n_test": len(split.test),
        "density": split.density,
        "seed": split.seed,
    }
    if out_path is not None:
        _write_json(Path(out_path), payload)
    print(f"MAE {mae:.6g}, RMSE {rmse:.6g} over {len(split.test)} test cells")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    matrix_path = _require_path(_merged(args, config, "matrix", required=True), "matrix file")
    dataset = _merged(args, config, "dataset", required=True)
    density = float(_merged(args, config, "density", required=True))
    variant = _merged(args, config, "variant", required=True)
    seed = int(_merged(args, config, "seed", 0))
    axis = _merged(args, config, "axis", required=True)
    raw_values = _merged(args, config, "values", required=True)
    out_dir = Path(_merged(args, config, "out", "."))

    if isinstance(raw_values, str):
        tokens = [tok for tok in raw_values.split(",") if tok.strip()]
    else:
        tokens = list(raw_values)
    values = [int(t) if axis in ("mlp_depth", "batch_size") else float(t) for t in tokens]

    matrix = ingest_matrix(matrix_path, dataset)
    user_store, service_store = _load_stores(args, config, variant, matrix, seed)
    llm_dim = user_store.dim if user_store is not None else 0
    model_config, train_config = _build_configs(args, config, matrix, llm_dim, seed)

    spec = SweepSpec(
        axis=axis,
        values=values,
        base_model_config=model_config,
        base_train_config=train_config,
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_json(
        out_dir / f"sweep_{axis}_config.json",
        {
            "dataset": dataset,
            "density": density,
            "variant": variant,
            "seed": seed,
            "axis": axis,
            "values": values,
            "model": model_config.to_dict(),
            "train": train_config.to_dict(),
            "paths": {"matrix": str(matrix_path), "out": str(out_dir)},
        },
    )
    result = run_sweep(
        spec,
        matrix,
        density,
        variant,
        seed,
        user_store=user_store,
        service_store=service_store,
        reports_path=out_dir / "reports.jsonl",
    )
    result.to_csv(out_dir / f"sweep_{axis}.csv")
    for row in result.relative_change:
        print(
            f"{axis}={row['value']}: MAE {row['mae']:.6g} "
            f"({row['mae_rel_change']:+.2%} vs base)"
        )
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    reports_path = _require_path(_merged(args, config, "reports", required=True), "reports file")
    dataset = _merged(args, config, "dataset", required=True)
    out_path = _merged(args, config, "out")

    reports = read_reports(reports_path)
    csv_text = render_summary_csv(reports, dataset)
    if out_path is not None:
        p = Path(out_path)
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(csv_text, encoding="utf-8")
        print(f"summary -> {p}")
    else:
        sys.stdout.write(csv_text)
    return 0


# ---------------------------------------------------------------------------
# parser wiring


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config file; flags override its values")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qosrec", description="QoS prediction from id embeddings plus sentence features"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="split a QoS matrix into train/test artifacts")
    _add_common(p)
    p.add_argument("--matrix", help="whitespace-separated dense matrix file")
    p.add_argument("--dataset", choices=DATASET_KINDS)
    p.add_argument("--density", type=float, help="train fraction in (0, 1]")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory for the split")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("prompts", help="build the sentence manifest from entity tables")
    _add_common(p)
    p.add_argument("--users", help="tab-separated user table")
    p.add_argument("--services", help="tab-separated service table")
    p.add_argument("--out", help="manifest output path")
    p.set_defaults(func=cmd_prompts)

    p = sub.add_parser("features", help="produce per-entity feature files")
    feat_sub = p.add_subparsers(dest="source", required=True)

    pf = feat_sub.add_parser("fetch", help="embed prompts via the HTTP extractor")
    _add_common(pf)
    pf.add_argument("--prompts", help="prompt manifest path")
    pf.add_argument("--model", help="model name passed to the extractor")
    pf.add_argument("--pooling", choices=("first_token", "last_token"))
    pf.add_argument("--endpoint", help=f"extractor base URL (env {ENDPOINT_ENV} overrides)")
    pf.add_argument("--out-users", dest="out_users", help="user feature file")
    pf.add_argument("--out-services", dest="out_services", help="service feature file")
    pf.set_defaults(func=cmd_features_fetch)

    pr = feat_sub.add_parser("random", help="deterministic random vectors for ablations")
    _add_common(pr)
    pr.add_argument("--n-users", dest="n_users", type=int)
    pr.add_argument("--n-services", dest="n_services", type=int)
    pr.add_argument("--dim", type=int)
    pr.add_argument("--seed", type=int)
    pr.add_argument("--out-users", dest="out_users")
    pr.add_argument("--out-services", dest="out_services")
    pr.set_defaults(func=cmd_features_random)

    for name, func in (("train", cmd_train), ("sweep", cmd_sweep)):
        p = sub.add_parser(name, help=f"{name} on a matrix + optional feature files")
        _add_common(p)
        p.add_argument("--matrix")
        p.add_argument("--dataset", choices=DATASET_KINDS)
        p.add_argument("--density", type=float)
        p.add_argument("--variant", choices=VARIANTS)
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output root; artifacts land under runs/<run-id>/")
        p.add_argument("--user-features", dest="user_features", help="QFV1 file for users")
        p.add_argument("--service-features", dest="service_features", help="QFV1 file for services")
        p.add_argument("--llm-dim", dest="llm_dim", type=int, help="dim for the random variant")
        p.add_argument("--feature-seed", dest="feature_seed", type=int)
        p.add_argument("--embed-dim", dest="embed_dim", type=int)
        p.add_argument("--proj-dim", dest="proj_dim", type=int)
        p.add_argument("--mlp-dims", dest="mlp_dims", help="comma-separated layer widths")
        p.add_argument("--huber-delta", dest="huber_delta", type=float)
        p.add_argument("--learning-rate", dest="learning_rate", type=float)
        p.add_argument("--batch-size", dest="batch_size", type=int)
        p.add_argument("--max-epochs", dest="max_epochs", type=int)
        p.add_argument("--eval-every", dest="eval_every", type=int)
        if name == "sweep":
            p.add_argument("--axis", choices=("mlp_depth", "mlp_width_factor", "batch_size", "learning_rate"))
            p.add_argument("--values", help="comma-separated axis values")
        p.set_defaults(func=func)

    p = sub.add_parser("eval", help="score a checkpoint on a stored split")
    _add_common(p)
    p.add_argument("--checkpoint", help="checkpoint file")
    p.add_argument("--split", help="split directory from `qosrec ingest`")
    p.add_argument("--user-features", dest="user_features")
    p.add_argument("--service-features", dest="service_features")
    p.add_argument("--out", help="optional JSON report path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("report", help="render the comparison table as CSV")
    _add_common(p)
    p.add_argument("--reports", help="JSONL reports file")
    p.add_argument("--dataset", choices=DATASET_KINDS)
    p.add_argument("--out", help="CSV output path (stdout when omitted)")
    p.set_defaults(func=cmd_report)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except QosrecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

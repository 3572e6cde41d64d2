"""End-to-end command-line pipeline on synthetic inputs."""

import json

import numpy as np
import pytest

from qosrec.cli import main
from qosrec.data import QosMatrix, write_matrix
from qosrec.features import read_feature_file

USER_HEADER = "[User ID]\t[IP Address]\t[Country]\t[IP No.]\t[AS]\t[Latitude]\t[Longitude]"
SERVICE_HEADER = (
    "[Service ID]\t[WSDL Address]\t[Service Provider]\t[IP Address]\t[Country]"
    "\t[IP No.]\t[AS]\t[Latitude]\t[Longitude]"
)


@pytest.fixture
def workspace(tmp_path):
    rng = np.random.default_rng(13)
    vals = rng.uniform(0.1, 5.0, size=(10, 14))
    vals[rng.random((10, 14)) < 0.25] = -1.0
    write_matrix(QosMatrix(values=vals, kind="throughput"), tmp_path / "matrix.txt")

    users = [f"{i}\t1.2.3.{i}\tCountry{i}\t111\tAS{i} Net\t1.0\t2.0" for i in range(10)]
    (tmp_path / "users.txt").write_text(
        USER_HEADER + "\n" + "".join(u + "\n" for u in users), encoding="utf-8"
    )
    services = [
        f"{i}\thttp://ex{i}.org/s?wsdl\tex{i}.org\t4.5.6.{i}\tLand{i}\t9\tAS9{i} Other\t3.0\t4.0"
        for i in range(14)
    ]
    (tmp_path / "services.txt").write_text(
        SERVICE_HEADER + "\n" + "".join(s + "\n" for s in services), encoding="utf-8"
    )
    return tmp_path


TRAIN_FLAGS = [
    "--dataset", "throughput", "--density", "0.3", "--variant", "random",
    "--seed", "5", "--llm-dim", "4", "--feature-seed", "2", "--max-epochs", "3",
    "--learning-rate", "1e-3", "--batch-size", "16", "--mlp-dims", "8,4",
    "--embed-dim", "4", "--proj-dim", "4",
]


def test_ingest_writes_split(workspace, capsys):
    rc = main([
        "ingest", "--matrix", str(workspace / "matrix.txt"), "--dataset", "throughput",
        "--density", "0.3", "--seed", "5", "--out", str(workspace / "split"),
    ])
    assert rc == 0
    meta = json.loads((workspace / "split" / "split.json").read_text())
    assert meta["n_train"] == int(0.3 * meta["observed_count"])
    assert (workspace / "split" / "train.tsv").exists()
    assert "train" in capsys.readouterr().out


def test_ingest_missing_matrix_fails(workspace, capsys):
    rc = main([
        "ingest", "--matrix", str(workspace / "nope.txt"), "--dataset", "throughput",
        "--density", "0.3", "--out", str(workspace / "s"),
    ])
    assert rc == 1
    assert "not found" in capsys.readouterr().err


def test_ingest_requires_density(workspace, capsys):
    rc = main([
        "ingest", "--matrix", str(workspace / "matrix.txt"), "--dataset", "throughput",
        "--out", str(workspace / "s"),
    ])
    assert rc == 1
    assert "--density" in capsys.readouterr().err


def test_prompts_command(workspace, capsys):
    rc = main([
        "prompts", "--users", str(workspace / "users.txt"),
        "--services", str(workspace / "services.txt"),
        "--out", str(workspace / "prompts.tsv"),
    ])
    assert rc == 0
    lines = (workspace / "prompts.tsv").read_text().splitlines()
    assert len(lines) == 1 + 10 + 14
    assert lines[0].startswith("#qpm1\t")


def test_features_random_command(workspace):
    rc = main([
        "features", "random", "--n-users", "10", "--n-services", "14", "--dim", "5",
        "--seed", "2", "--out-users", str(workspace / "u.qfv"),
        "--out-services", str(workspace / "s.qfv"),
    ])
    assert rc == 0
    store = read_feature_file(workspace / "u.qfv")
    assert store.dim == 5
    assert len(store) == 10
    assert store.entity_kind == "user"


def test_train_writes_run_artifacts(workspace):
    rc = main(["train", "--matrix", str(workspace / "matrix.txt"),
               "--out", str(workspace / "work")] + TRAIN_FLAGS)
    assert rc == 0
    runs = list((workspace / "work" / "runs").iterdir())
    assert len(runs) == 1
    run_dir = runs[0]
    for name in ("checkpoint.qck1", "curve.csv", "report.json", "effective_config.json"):
        assert (run_dir / name).exists(), name
    report = json.loads((run_dir / "report.json").read_text())
    assert report["rmse"] >= report["mae"]
    assert report["model_selection"] == "lowest_test_mae"
    effective = json.loads((run_dir / "effective_config.json").read_text())
    assert effective["train"]["max_epochs"] == 3
    assert effective["model"]["mlp_dims"] == [8, 4]
    curve_lines = (run_dir / "curve.csv").read_text().splitlines()
    assert curve_lines[0] == "epoch,loss,mae,rmse"
    assert len(curve_lines) == 4


def test_train_rerun_is_byte_identical(workspace):
    args = ["train", "--matrix", str(workspace / "matrix.txt"),
            "--out", str(workspace / "work")] + TRAIN_FLAGS
    assert main(args) == 0
    run_dir = next((workspace / "work" / "runs").iterdir())
    first = {p.name: p.read_bytes() for p in run_dir.iterdir()}
    reports_before = (workspace / "work" / "reports.jsonl").read_bytes()
    assert main(args) == 0
    for name, blob in first.items():
        assert (run_dir / name).read_bytes() == blob, name
    assert (workspace / "work" / "reports.jsonl").read_bytes() == reports_before


def test_train_zero_epochs_header_only_curve(workspace):
    flags = [f if f != "3" else "0" for f in TRAIN_FLAGS]
    idx = flags.index("--max-epochs")
    flags[idx + 1] = "0"
    rc = main(["train", "--matrix", str(workspace / "matrix.txt"),
               "--out", str(workspace / "zero")] + flags)
    assert rc == 0
    run_dir = next((workspace / "zero" / "runs").iterdir())
    assert (run_dir / "curve.csv").read_text() == "epoch,loss,mae,rmse\n"
    assert not (run_dir / "report.json").exists()


def test_eval_matches_train_report(workspace):
    assert main(["train", "--matrix", str(workspace / "matrix.txt"),
                 "--out", str(workspace / "work")] + TRAIN_FLAGS) == 0
    assert main([
        "ingest", "--matrix", str(workspace / "matrix.txt"), "--dataset", "throughput",
        "--density", "0.3", "--seed", "5", "--out", str(workspace / "split"),
    ]) == 0
    assert main([
        "features", "random", "--n-users", "10", "--n-services", "14", "--dim", "4",
        "--seed", "2", "--out-users", str(workspace / "u.qfv"),
        "--out-services", str(workspace / "s.qfv"),
    ]) == 0
    run_dir = next((workspace / "work" / "runs").iterdir())
    rc = main([
        "eval", "--checkpoint", str(run_dir / "checkpoint.qck1"),
        "--split", str(workspace / "split"),
        "--user-features", str(workspace / "u.qfv"),
        "--service-features", str(workspace / "s.qfv"),
        "--out", str(workspace / "eval.json"),
    ])
    assert rc == 0
    train_report = json.loads((run_dir / "report.json").read_text())
    eval_report = json.loads((workspace / "eval.json").read_text())
    # the checkpoint is the best epoch's, so eval reproduces the report metrics
    assert eval_report["mae"] == pytest.approx(train_report["mae"], rel=1e-12)
    assert eval_report["rmse"] == pytest.approx(train_report["rmse"], rel=1e-12)


def test_sweep_command(workspace):
    rc = main(["sweep", "--matrix", str(workspace / "matrix.txt"),
               "--out", str(workspace / "sw"), "--axis", "batch_size",
               "--values", "8,16"] + TRAIN_FLAGS)
    assert rc == 0
    csv_lines = (workspace / "sw" / "sweep_batch_size.csv").read_text().splitlines()
    assert csv_lines[0] == "axis,value,mae,rmse,mae_rel_change,rmse_rel_change"
    assert len(csv_lines) == 3
    by_value = {line.split(",")[1]: line for line in csv_lines[1:]}
    assert by_value["16"].split(",")[4] == "0.0"
    reports = (workspace / "sw" / "reports.jsonl").read_text().splitlines()
    assert len(reports) == 2


def test_report_command(workspace, capsys):
    assert main(["train", "--matrix", str(workspace / "matrix.txt"),
                 "--out", str(workspace / "work")] + TRAIN_FLAGS) == 0
    capsys.readouterr()
    rc = main(["report", "--reports", str(workspace / "work" / "reports.jsonl"),
               "--dataset", "throughput"])
    assert rc == 0
    out = capsys.readouterr().out
    assert out.startswith("model,mae_5%")
    assert "DCALF" in out
    assert "random" in out


def test_config_file_with_flag_override(workspace):
    config = {
        "matrix": str(workspace / "matrix.txt"),
        "dataset": "throughput",
        "density": 0.3,
        "variant": "random",
        "seed": 5,
        "llm_dim": 4,
        "feature_seed": 2,
        "max_epochs": 3,
        "learning_rate": 1e-3,
        "batch_size": 16,
        "mlp_dims": "8,4",
        "embed_dim": 4,
        "proj_dim": 4,
        "out": str(workspace / "fromconfig"),
    }
    cfg = workspace / "run.json"
    cfg.write_text(json.dumps(config))
    assert main(["train", "--config", str(cfg), "--max-epochs", "2"]) == 0
    run_dir = next((workspace / "fromconfig" / "runs").iterdir())
    effective = json.loads((run_dir / "effective_config.json").read_text())
    assert effective["train"]["max_epochs"] == 2  # flag beats file
    assert effective["train"]["batch_size"] == 16  # file fills the rest


def test_unknown_flag_rejected(workspace):
    with pytest.raises(SystemExit) as exc:
        main(["ingest", "--matrix", "x", "--no-such-flag"])
    assert exc.value.code == 2


def test_invalid_config_json(workspace, capsys):
    cfg = workspace / "bad.json"
    cfg.write_text("{not json")
    rc = main(["ingest", "--config", str(cfg)])
    assert rc == 1
    assert "invalid JSON" in capsys.readouterr().err

import json

import numpy as np
import pytest

from codist.cli import main, size_label
from codist.manifest import RunManifest, replay
from codist.models import load_checkpoint, new_model, params_equal
from codist.synthetic import synthetic_blocks


def write_raw(ds, path):
    with open(path, "w", encoding="utf-8") as fh:
        for u in range(ds.num_users):
            for i, t in zip(ds.user_items(u), ds.user_times(u)):
                fh.write(f"u{u}\ti{i}\t{t}\n")


TEACHER_YAML = """
model: {{kind: mf, dim: 16, init_std: 0.1}}
train: {{epochs: 3, seed: 0}}
eval: {{n_cutoff: 10}}
"""

STUDENT_YAML = """
model: {{kind: mf, dim: 4, init_std: 0.1}}
train: {{epochs: 2, seed: 0}}
distill: {{lam: 0.5, sample_size: 0.5}}
teacher: {{checkpoint: {teacher}}}
eval: {{n_cutoff: 10}}
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    ds = synthetic_blocks(num_users=40, num_items=40, min_interactions=8,
                          max_interactions=10, seed=5)
    raw = root / "raw.tsv"
    write_raw(ds, raw)
    prep = root / "prepare"
    rc = main(["prepare", "--dataset", str(raw), "--min-user", "3",
               "--min-item", "2", "--out", str(prep)])
    assert rc == 0
    split = prep / "split.bin"

    tcfg = root / "teacher.yaml"
    tcfg.write_text(TEACHER_YAML.format(), encoding="utf-8")
    tdir = root / "teacher"
    rc = main(["train-teacher", "--config", str(tcfg), "--dataset", str(split),
               "--out", str(tdir)])
    assert rc == 0
    teacher_ckpt = tdir / "checkpoint.bin"

    scfg = root / "student.yaml"
    scfg.write_text(STUDENT_YAML.format(teacher=teacher_ckpt), encoding="utf-8")
    return {"root": root, "raw": raw, "prep": prep, "split": split,
            "teacher_cfg": tcfg, "teacher_dir": tdir,
            "teacher_ckpt": teacher_ckpt, "student_cfg": scfg}


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["prepare", "--no-such-flag"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["train-student", "--config", "x", "--dataset", "y",
              "--variant", "bogus"])
    assert exc.value.code == 1
    capsys.readouterr()


def test_runtime_error_exits_two(tmp_path, capsys):
    rc = main(["evaluate", "--checkpoint", str(tmp_path / "missing.bin"),
               "--dataset", str(tmp_path / "missing-split.bin"),
               "--out", str(tmp_path / "out")])
    assert rc == 2
    assert "codist: error:" in capsys.readouterr().err


def test_prepare_outputs(workspace):
    prep = workspace["prep"]
    assert (prep / "dataset.bin").exists()
    assert (prep / "split.bin").exists()
    man = RunManifest.load(prep / "manifest.json")
    assert man.command == "prepare"
    assert man.outputs == ["dataset.bin", "split.bin"]
    assert len(man.dataset_fingerprint) == 64


def test_prepare_rerun_is_identical(workspace, tmp_path):
    rc = main(["prepare", "--dataset", str(workspace["raw"]), "--min-user", "3",
               "--min-item", "2", "--out", str(tmp_path)])
    assert rc == 0
    for name in ("dataset.bin", "split.bin"):
        assert (tmp_path / name).read_bytes() == (workspace["prep"] / name).read_bytes()


def test_teacher_outputs_and_trace(workspace):
    tdir = workspace["teacher_dir"]
    assert (tdir / "checkpoint.bin").exists()
    rows = [json.loads(line)
            for line in (tdir / "trace.jsonl").read_text().splitlines()]
    assert len(rows) == 3
    assert set(rows[0]) == {"epoch", "step", "cf_loss", "kd_loss", "total"}
    assert all(r["kd_loss"] == 0.0 for r in rows)
    assert rows[-1]["total"] < rows[0]["total"]


def test_student_requires_teacher(workspace, tmp_path, capsys):
    cfg = tmp_path / "no-teacher.yaml"
    cfg.write_text("train: {epochs: 1}\n", encoding="utf-8")
    rc = main(["train-student", "--config", str(cfg), "--variant", "cd-tg",
               "--dataset", str(workspace["split"]), "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "teacher" in capsys.readouterr().err


def test_missing_teacher_file_is_named(workspace, tmp_path, capsys):
    rc = main(["train-student", "--config", str(workspace["student_cfg"]),
               "--variant", "cd-tg", "--dataset", str(workspace["split"]),
               "--teacher", str(tmp_path / "ghost.bin"),
               "--out", str(tmp_path / "o")])
    assert rc == 2
    assert "ghost.bin" in capsys.readouterr().err


def test_all_variants_train_with_distinct_traces(workspace, tmp_path):
    traces = {}
    for variant in ("plain", "cd-base", "cd-tg", "cd-sg", "rd", "rd-rank"):
        out = tmp_path / variant
        rc = main(["train-student", "--config", str(workspace["student_cfg"]),
                   "--variant", variant, "--dataset", str(workspace["split"]),
                   "--out", str(out)])
        assert rc == 0, variant
        assert (out / "checkpoint.bin").exists()
        traces[variant] = (out / "trace.jsonl").read_bytes()
    assert len(set(traces.values())) == 6
    plain_rows = [json.loads(l) for l in traces["plain"].decode().splitlines()]
    assert all(r["kd_loss"] == 0.0 for r in plain_rows)


def test_same_seed_reproduces_checkpoint(workspace, tmp_path):
    outs = []
    for name in ("a", "b"):
        out = tmp_path / name
        rc = main(["train-student", "--config", str(workspace["student_cfg"]),
                   "--variant", "cd-tg", "--dataset", str(workspace["split"]),
                   "--out", str(out)])
        assert rc == 0
        outs.append((out / "checkpoint.bin").read_bytes())
    assert outs[0] == outs[1]
    out = tmp_path / "c"
    rc = main(["train-student", "--config", str(workspace["student_cfg"]),
               "--variant", "cd-tg", "--dataset", str(workspace["split"]),
               "--seed", "1", "--out", str(out)])
    assert rc == 0
    assert (out / "checkpoint.bin").read_bytes() != outs[0]


def test_zero_epochs_keeps_initial_parameters(workspace, tmp_path):
    cfg = tmp_path / "zero.yaml"
    cfg.write_text("model: {kind: mf, dim: 6, init_std: 0.3}\n"
                   "train: {epochs: 0, seed: 9}\n", encoding="utf-8")
    out = tmp_path / "o"
    rc = main(["train-teacher", "--config", str(cfg),
               "--dataset", str(workspace["split"]), "--out", str(out)])
    assert rc == 0
    trained = load_checkpoint(out / "checkpoint.bin")
    from codist.data import SplitDataset
    split = SplitDataset.load(workspace["split"])
    fresh = new_model("mf", split.train.num_users, split.train.num_items, 6,
                      seed=9, std=0.3)
    assert params_equal(trained, fresh)
    assert (out / "trace.jsonl").read_text() == ""


def test_evaluate_and_bench(workspace, tmp_path):
    edir = tmp_path / "eval"
    rc = main(["evaluate", "--checkpoint", str(workspace["teacher_ckpt"]),
               "--dataset", str(workspace["split"]), "--n", "10",
               "--out", str(edir)])
    assert rc == 0
    report = json.loads((edir / "report.json").read_text())
    assert 0.0 <= report["hr"] <= 1.0 and 0.0 <= report["ndcg"] <= 1.0
    assert report["n_cutoff"] == 10
    assert report["latency"] is None

    bdir = tmp_path / "bench"
    rc = main(["bench", "--checkpoint", str(workspace["teacher_ckpt"]),
               "--dataset", str(workspace["split"]), "--reps", "5",
               "--warmup", "1", "--out", str(bdir)])
    assert rc == 0
    stats = json.loads((bdir / "latency.json").read_text())
    assert stats["mean"] > 0 and stats["repetitions"] == 5


def test_out_root_env_sets_default_dir(workspace, tmp_path, monkeypatch):
    monkeypatch.setenv("CODIST_OUT_ROOT", str(tmp_path))
    rc = main(["evaluate", "--checkpoint", str(workspace["teacher_ckpt"]),
               "--dataset", str(workspace["split"]), "--n", "5"])
    assert rc == 0
    assert (tmp_path / "evaluate" / "report.json").exists()


def test_sweep_table(workspace, tmp_path):
    cfg = tmp_path / "sweep.yaml"
    cfg.write_text(f"""
model: {{kind: mf, dim: 4, init_std: 0.1}}
train: {{epochs: 2, seed: 0}}
teacher: {{checkpoint: {workspace['teacher_ckpt']}}}
eval: {{n_cutoff: 10}}
sweep:
  variant: cd-tg
  grid:
    lam: [0.1, 0.5]
    dim: [4]
""", encoding="utf-8")
    out = tmp_path / "sweep"
    rc = main(["sweep", "--config", str(cfg), "--dataset",
               str(workspace["split"]), "--out", str(out)])
    assert rc == 0
    lines = (out / "results.tsv").read_text().splitlines()
    header = lines[0].split("\t")
    assert header[:2] == ["dim", "lam"]
    assert "ndcg" in header and "latency_mean" in header
    assert len(lines) == 3
    results = json.loads((out / "results.json").read_text())
    rows = results["rows"]
    assert all(r["status"] == "ok" for r in rows)
    assert all(r["latency_mean"] is None for r in rows)
    ndcgs = [r["ndcg"] for r in rows]
    assert ndcgs == sorted(ndcgs, reverse=True)


def test_sweep_records_cell_failures(workspace, tmp_path):
    cfg = tmp_path / "sweep.yaml"
    cfg.write_text(f"""
model: {{kind: mf, dim: 4, init_std: 0.1}}
train: {{epochs: 1, seed: 0}}
distill: {{sampling: exponential}}
teacher: {{checkpoint: {workspace['teacher_ckpt']}}}
eval: {{n_cutoff: 10}}
sweep:
  variant: cd-tg
  grid:
    gamma: [-1.0, 2.0]
""", encoding="utf-8")
    out = tmp_path / "sweep"
    rc = main(["sweep", "--config", str(cfg), "--dataset",
               str(workspace["split"]), "--out", str(out)])
    assert rc == 0
    rows = json.loads((out / "results.json").read_text())["rows"]
    status = {r["gamma"]: r["status"] for r in rows}
    assert status[2.0] == "ok" and status[-1.0] == "error"
    bad = next(r for r in rows if r["status"] == "error")
    assert "gamma" in bad["error"]
    # ok rows sort before failed ones
    assert rows[0]["status"] == "ok"


def test_replay_reproduces_outputs(workspace, tmp_path):
    src = tmp_path / "eval"
    rc = main(["evaluate", "--checkpoint", str(workspace["teacher_ckpt"]),
               "--dataset", str(workspace["split"]), "--n", "10",
               "--out", str(src)])
    assert rc == 0
    dst = tmp_path / "replayed"
    replay(src / "manifest.json", out_dir=dst)
    assert (dst / "report.json").read_bytes() == (src / "report.json").read_bytes()


def test_size_label_bands():
    assert size_label(10, 100) == "XS"
    assert size_label(22, 100) == "S"
    assert size_label(33, 100) == "M"
    assert size_label(50, 100) == ""
    assert size_label(10, 0) == ""


def test_deterministic_loo_split(workspace):
    from codist.data import SplitDataset
    split = SplitDataset.load(workspace["split"])
    for u in range(split.train.num_users):
        assert split.test_items[u] not in split.train.user_items(u)
    assert np.all(split.test_items >= 0)

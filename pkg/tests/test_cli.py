import json
import subprocess
import sys

import pytest

from psa.synth import separable_fixture, write_dataset_tsv, write_embeddings_text

CONFIG = """
[paths]
dataset = "reviews.tsv"
embeddings = "vectors.vec"
model_out = "model.psam"
report_out = "report.json"

[model]
kind = "mlp"

[split]
seed = 42

[optimizer]
epochs = 40
batch_size = 6
learning_rate = 0.005
seed = 42
"""


def run_cli(args, cwd):
    return subprocess.run(
        [sys.executable, "-m", "psa.cli", *args],
        cwd=cwd, capture_output=True, text=True, timeout=300,
    )


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    dataset, table = separable_fixture(n_reviews=20, dim=300, seed=7)
    write_dataset_tsv(dataset, root / "reviews.tsv")
    write_embeddings_text(table, root / "vectors.vec")
    (root / "run.toml").write_text(CONFIG, encoding="utf-8")
    return root


@pytest.fixture(scope="module")
def trained(workdir):
    result = run_cli(["train", "--config", "run.toml"], workdir)
    assert result.returncode == 0, result.stderr
    return workdir


def test_train_writes_outputs_and_table(trained):
    assert (trained / "model.psam").exists()
    report = json.loads((trained / "report.json").read_text())
    assert report["schema"] == "report/1"
    assert report["models"][0]["name"] == "MLP"
    assert report["models"][0]["accuracy"] == 1.0


def test_train_stdout_is_metric_table(workdir):
    result = run_cli(["train", "--config", "run.toml", "--out", "m2.psam"], workdir)
    assert result.returncode == 0
    lines = [l for l in result.stdout.splitlines() if l.strip()]
    assert lines[0] == "MLP"
    assert lines[2].split()[0] == "Negative"
    assert lines[4].split()[0] == "AVG"


def test_train_deterministic_bytes(workdir, tmp_path_factory):
    outputs = []
    for name in ("da", "db"):
        d = tmp_path_factory.mktemp(name)
        for f in ("reviews.tsv", "vectors.vec", "run.toml"):
            (d / f).write_bytes((workdir / f).read_bytes())
        result = run_cli(["train", "--config", "run.toml", "--seed", "42"], d)
        assert result.returncode == 0, result.stderr
        outputs.append(((d / "model.psam").read_bytes(),
                        (d / "report.json").read_bytes()))
    assert outputs[0][0] == outputs[1][0]
    assert outputs[0][1] == outputs[1][1]


def test_train_seed_changes_model(workdir):
    result = run_cli(["train", "--config", "run.toml", "--seed", "77",
                      "--out", "m77.psam"], workdir)
    assert result.returncode == 0
    assert (workdir / "m77.psam").read_bytes() != (workdir / "model.psam").read_bytes()


def test_bad_fractions_exit_2(workdir):
    bad = CONFIG.replace("[split]\nseed = 42",
                         "[split]\nseed = 42\ntrain_fraction = 0.7\n"
                         "test_fraction = 0.3\nvalid_fraction = 0.1")
    (workdir / "bad.toml").write_text(bad, encoding="utf-8")
    result = run_cli(["train", "--config", "bad.toml"], workdir)
    assert result.returncode == 2
    assert result.stderr.startswith("error\tconfig\t")


def test_unknown_config_key_exit_2(workdir):
    (workdir / "unknown.toml").write_text(CONFIG + "\n[extra]\nx = 1\n",
                                          encoding="utf-8")
    result = run_cli(["train", "--config", "unknown.toml"], workdir)
    assert result.returncode == 2


def test_missing_dataset_exit_2(workdir):
    cfg = CONFIG.replace('dataset = "reviews.tsv"', 'dataset = "absent.tsv"')
    (workdir / "missing.toml").write_text(cfg, encoding="utf-8")
    result = run_cli(["train", "--config", "missing.toml"], workdir)
    assert result.returncode == 2


def test_four_class_config_rejected(workdir):
    cfg = CONFIG.replace("[model]\nkind = \"mlp\"",
                         "[model]\nkind = \"mlp\"\nnum_classes = 4")
    (workdir / "four.toml").write_text(cfg, encoding="utf-8")
    result = run_cli(["train", "--config", "four.toml"], workdir)
    assert result.returncode == 2


def test_malformed_dataset_exit_3(workdir):
    (workdir / "broken.tsv").write_text("id\ttext\tlabel\nr1\tok\tmaybe\n",
                                        encoding="utf-8")
    result = run_cli(["train", "--config", "run.toml", "--dataset", "broken.tsv"],
                     workdir)
    assert result.returncode == 3
    assert "error\tMalformedRow\t" in result.stderr


def test_numeric_abort_exit_4(workdir):
    # sgd with an absurd step size drives the reconstruction loss to inf
    # (adam would stay finite: its updates are magnitude-bounded)
    cfg = CONFIG.replace("learning_rate = 0.005",
                         'algorithm = "sgd"\nlearning_rate = 1e10')
    cfg = cfg.replace('kind = "mlp"', 'kind = "autoencoder_classifier"\nae_scale = 0.02')
    (workdir / "blowup.toml").write_text(cfg, encoding="utf-8")
    result = run_cli(["train", "--config", "blowup.toml", "--out", "blow.psam"],
                     workdir)
    assert result.returncode == 4
    assert "error\tnumeric\t" in result.stderr
    assert not (workdir / "blow.psam").exists()


# --- predict --------------------------------------------------------------------

def test_predict_training_phrase(trained):
    result = run_cli(
        ["predict", "--model", "model.psam", "--embeddings", "vectors.vec",
         "--text", "posw01 posw02 posw03"], trained)
    assert result.returncode == 0, result.stderr
    label, p_neg, p_pos = result.stdout.strip().split("\t")
    assert label == "pos"
    assert 0.0 <= float(p_neg) <= 1.0 and float(p_pos) > 0.5
    assert abs(float(p_neg) + float(p_pos) - 1.0) < 1e-9


def test_predict_file_of_lines_preserves_order(trained):
    (trained / "inputs.txt").write_text(
        "negw01 negw04 negw02\nposw05 posw06\n", encoding="utf-8")
    result = run_cli(
        ["predict", "--model", "model.psam", "--embeddings", "vectors.vec",
         "--input", "inputs.txt"], trained)
    labels = [line.split("\t")[0] for line in result.stdout.strip().splitlines()]
    assert labels == ["neg", "pos"]


def test_predict_empty_line_warns_but_predicts(trained):
    (trained / "empty.txt").write_text("!!!\n", encoding="utf-8")
    result = run_cli(
        ["predict", "--model", "model.psam", "--embeddings", "vectors.vec",
         "--input", "empty.txt"], trained)
    assert result.returncode == 0
    assert len(result.stdout.strip().splitlines()) == 1
    assert "empty after preprocessing" in result.stderr


def test_predict_missing_embeddings_exit_2(trained):
    result = run_cli(["predict", "--model", "model.psam", "--text", "hi"], trained)
    assert result.returncode == 2


def test_predict_corrupt_model_exit_3(trained):
    blob = bytearray((trained / "model.psam").read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    (trained / "corrupt.psam").write_bytes(bytes(blob))
    result = run_cli(
        ["predict", "--model", "corrupt.psam", "--embeddings", "vectors.vec",
         "--text", "hi"], trained)
    assert result.returncode == 3
    assert "error\tChecksumMismatch\t" in result.stderr


# --- evaluate --------------------------------------------------------------------

def test_evaluate_full_fixture(trained):
    result = run_cli(
        ["evaluate", "--model", "model.psam", "--embeddings", "vectors.vec",
         "--dataset", "reviews.tsv", "--out", "eval.json"], trained)
    assert result.returncode == 0, result.stderr
    payload = json.loads((trained / "eval.json").read_text())
    assert payload["models"][0]["accuracy"] == 1.0
    assert "AVG" in result.stdout


def test_evaluate_single_row_dataset(trained):
    (trained / "one.tsv").write_text(
        "id\ttext\tlabel\nr1\tposw01 posw02\tpos\n", encoding="utf-8")
    result = run_cli(
        ["evaluate", "--model", "model.psam", "--embeddings", "vectors.vec",
         "--dataset", "one.tsv"], trained)
    assert result.returncode == 0
    assert "AVG" in result.stdout


def test_evaluate_bad_magic_exit_3(trained):
    (trained / "junk.psam").write_bytes(b"NOTAMODEL")
    result = run_cli(
        ["evaluate", "--model", "junk.psam", "--embeddings", "vectors.vec",
         "--dataset", "reviews.tsv"], trained)
    assert result.returncode == 3


# --- preprocess ------------------------------------------------------------------

def test_preprocess_dump_is_deterministic(trained):
    a = run_cli(["preprocess", "--dataset", "reviews.tsv"], trained)
    b = run_cli(["preprocess", "--dataset", "reviews.tsv"], trained)
    assert a.returncode == 0 and a.stdout == b.stdout
    # fixture tokens are preprocessing fixed points, so the dump echoes them
    first = a.stdout.splitlines()[0]
    rid, tokens = first.split("\t")
    assert rid == "s0000" and tokens.startswith("posw")


def test_preprocess_persian_normalization(trained):
    (trained / "fa.tsv").write_text(
        "id\ttext\tlabel\n"
        "r1\tفيلم ها!\tpos\n",
        encoding="utf-8")
    result = run_cli(["preprocess", "--dataset", "fa.tsv"], trained)
    assert result.stdout == "r1\tفیلم ها\n"


def test_preprocess_empty_review_warns(trained):
    (trained / "punct.tsv").write_text(
        "id\ttext\tlabel\nr1\t!!!\tpos\n", encoding="utf-8")
    result = run_cli(["preprocess", "--dataset", "punct.tsv"], trained)
    assert result.returncode == 0
    assert result.stdout == "r1\t\n"
    assert "empty after preprocessing" in result.stderr


def test_preprocess_dump_rebuild_fixed_point(trained):
    dump = run_cli(["preprocess", "--dataset", "reviews.tsv"], trained).stdout
    rebuilt = ["id\ttext\tlabel"]
    for line in dump.strip().splitlines():
        rid, tokens = line.split("\t")
        rebuilt.append(f"{rid}\t{tokens}\tpos")
    (trained / "rebuilt.tsv").write_text("\n".join(rebuilt) + "\n", encoding="utf-8")
    again = run_cli(["preprocess", "--dataset", "rebuilt.tsv"], trained).stdout
    assert again == dump


def test_preprocess_out_file(trained):
    result = run_cli(["preprocess", "--dataset", "reviews.tsv",
                      "--out", "dump.txt"], trained)
    assert result.returncode == 0 and result.stdout == ""
    assert (trained / "dump.txt").read_text(encoding="utf-8").startswith("s0000\t")

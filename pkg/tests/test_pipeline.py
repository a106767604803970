import csv
import filecmp
import json
import os

import numpy as np
import pytest

from devicevec.embedding import load_model
from devicevec.pipeline.config import (OUTPUT_ROOT_ENV, ConfigError, PipelineConfig, format_config, load_config,
                                       parse_config)
from devicevec.pipeline.evaluation import UnlabeledToken, evaluate, evaluate_matrix, read_labels, write_labels
from devicevec.pipeline.runner import StageError, run_pipeline
from devicevec.pipeline.synthetic import generate_synthetic_log, ground_truth, three_room_home
from devicevec.similarity import load_registry

from props import make_model

QUICK = """
train.dim = 24
train.epochs = 4
project.iterations = 300
"""


def _home(tmp_path, seed=0, days=6):
    spec = three_room_home(seed=seed, days=days)
    log = tmp_path / "home.log"
    log.write_text("\n".join(generate_synthetic_log(spec)) + "\n")
    truth = tmp_path / "truth.txt"
    write_labels(ground_truth(spec), truth)
    return log, truth


def _config(tmp_path, out="out", extra=""):
    log, truth = _home(tmp_path)
    return parse_config(QUICK + extra + f"\ninput.paths = {log}\neval.ground_truth = {truth}\n"
                        f"output.dir = {tmp_path / out}\n")


def test_config_round_trip():
    cfg = parse_config("session.gap = 10\ntrain.dim = 7\nfilter.kinds = Motion,Door\n"
                       "project.learning_rate = auto\nrun.gap_sweep = 10,60\n")
    again = parse_config(format_config(cfg))
    assert format_config(again) == format_config(cfg)
    assert again.session.gap == 10.0 and again.train.dim == 7 and again.gap_sweep == [10.0, 60.0]
    assert again.projection.learning_rate == "auto"


def test_config_errors():
    with pytest.raises(ConfigError):
        parse_config("train.nope = 1")
    with pytest.raises(ConfigError):
        parse_config("train.dim = ten")
    with pytest.raises(ConfigError):
        parse_config("just words")


def test_output_root_env(monkeypatch, tmp_path):
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path))
    assert PipelineConfig(output_dir="x").resolved_output_dir() == tmp_path / "x"
    assert PipelineConfig(output_dir="/abs").resolved_output_dir() == type(tmp_path)("/abs")


def test_end_to_end_artifacts(tmp_path):
    res = run_pipeline(_config(tmp_path))
    out = res.output_dir
    for name in ["config.txt", "parse_report.json", "events.filtered.log", "corpus.txt", "corpus_stats.json",
                 "model.bin", "vectors.txt", "similarity.csv", "neighbors.txt", "neighbors.json", "tsne.csv",
                 "tsne.svg", "tsne_kl.json", "eval.json", "registry.bin"]:
        assert (out / name).is_file(), name
    assert load_config(out / "config.txt").train.dim == 24
    assert load_model(out / "model.bin").tokens == res.model.tokens
    assert set(load_registry(out / "registry.bin").entries) == {"Kitchen", "Bedroom", "Bathroom"}
    report = json.loads((out / "eval.json").read_text())
    assert -1 <= report["inter_mean"] <= 1 and 0 <= report["mean_recall"] <= 1


def test_eval_matches_serialized_similarity(tmp_path):
    res = run_pipeline(_config(tmp_path))
    with open(res.output_dir / "similarity.csv") as fh:
        rows = list(csv.reader(fh))
    tokens = rows[0][1:]
    sim = np.array([[float(x) for x in r[1:]] for r in rows[1:]])
    labels = read_labels(res.output_dir.parent / "truth.txt")
    # independent recomputation from the CSV
    n = len(tokens)
    intra, inter = [], []
    for i in range(n):
        for j in range(i + 1, n):
            (intra if labels[tokens[i]] == labels[tokens[j]] else inter).append(sim[i, j])
    recall = []
    for i in range(n):
        order = sorted((j for j in range(n) if j != i), key=lambda j: (-sim[i, j], tokens[j]))[:3]
        recall.append(sum(labels[tokens[j]] == labels[tokens[i]] for j in order) / 3)
    rep = res.eval_report
    assert abs(rep.intra_mean - np.mean(intra)) < 1e-9
    assert abs(rep.inter_mean - np.mean(inter)) < 1e-9
    assert abs(rep.mean_recall - np.mean(recall)) < 1e-9


def test_empty_log_names_sessionize(tmp_path):
    empty = tmp_path / "empty.log"
    empty.write_text("")
    cfg = parse_config(f"input.paths = {empty}\noutput.dir = {tmp_path / 'o'}\n")
    with pytest.raises(StageError) as info:
        run_pipeline(cfg)
    assert info.value.stage == "sessionize"
    assert "EmptyInput" in str(info.value)


def test_missing_input_names_parse(tmp_path):
    cfg = parse_config(f"input.paths = {tmp_path / 'none.log'}\noutput.dir = {tmp_path / 'o'}\n")
    with pytest.raises(StageError) as info:
        run_pipeline(cfg)
    assert info.value.stage == "parse"


def test_gap_sweep_three_dirs(tmp_path):
    results = run_pipeline(_config(tmp_path, extra="run.gap_sweep = 10,60,600\n"))
    out = tmp_path / "out"
    assert sorted(p.name for p in out.iterdir()) == ["gap_10", "gap_60", "gap_600", "sweep.json"]
    for d in ("gap_10", "gap_60", "gap_600"):
        assert (out / d / "tsne.svg").is_file()
    sweep = json.loads((out / "sweep.json").read_text())
    assert [row["gap"] for row in sweep] == [10.0, 60.0, 600.0]
    assert sweep[0]["sessions"] >= sweep[1]["sessions"] >= sweep[2]["sessions"]
    assert len(results) == 3


def _tree(root):
    return sorted(str(p.relative_to(root)) for p in root.rglob("*"))


def test_rerun_is_byte_identical(tmp_path, monkeypatch):
    # identical config; only the output root differs between the runs
    log, truth = _home(tmp_path)
    cfg = QUICK + f"input.paths = {log}\neval.ground_truth = {truth}\noutput.dir = run\n"
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "a"))
    a = run_pipeline(parse_config(cfg)).output_dir
    monkeypatch.setenv(OUTPUT_ROOT_ENV, str(tmp_path / "b"))
    b = run_pipeline(parse_config(cfg)).output_dir
    assert a != b
    assert _tree(a) == _tree(b)
    for rel in _tree(a):
        if (a / rel).is_file():
            assert filecmp.cmp(a / rel, b / rel, shallow=False), rel


def test_evaluate_ideal_model():
    tokens = ["a1", "a2", "b1", "b2"]
    model = make_model(tokens, [[1, 0], [1, 0], [0, 1], [0, 1]])
    rep = evaluate(model, {"a1": "A", "a2": "A", "b1": "B", "b2": "B"}, k=1)
    assert rep.margin == pytest.approx(1.0) and rep.mean_recall == 1.0


def test_evaluate_unlabeled():
    model = make_model(["a", "b"], [[1, 0], [0, 1]])
    with pytest.raises(UnlabeledToken):
        evaluate(model, {"a": "A"})


def test_random_vectors_recall_baseline():
    rng = np.random.default_rng(0)
    recalls = []
    for _ in range(20):
        tokens = [f"t{i}" for i in range(20)]
        labels = {t: "A" if i < 10 else "B" for i, t in enumerate(tokens)}
        model = make_model(tokens, rng.normal(size=(20, 16)))
        recalls.append(evaluate(model, labels, k=1).mean_recall)
    # 9 of the other 19 tokens share the label
    assert abs(np.mean(recalls) - 0.5) <= 0.15


def test_id_state_tokens_fall_back_to_device_label():
    model = make_model(["M1_ON", "M1_OFF", "D1_OPEN"], [[1, 0], [1, 0.1], [0, 1]])
    rep = evaluate_matrix(np.eye(3), model.tokens, {"M1": "K", "D1": "B"}, k=1)
    assert rep.k == 1

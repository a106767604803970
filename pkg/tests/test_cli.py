import json

import pytest

from devicevec.cli import main


@pytest.fixture
def home(tmp_path):
    log, truth = tmp_path / "home.log", tmp_path / "truth.txt"
    assert main(["synth", "--output", str(log), "--truth", str(truth), "--days", "5", "--seed", "2",
                 "--kitchen-device", "D099"]) == 0
    return tmp_path, log, truth


def _train(tmp_path, log, capsys):
    ev, corpus, model = tmp_path / "ev.log", tmp_path / "c.txt", tmp_path / "m.bin"
    assert main(["parse", "--input", str(log), "--output", str(ev)]) == 0
    assert main(["sessionize", "--events", str(ev), "--output", str(corpus), "--gap", "60"]) == 0
    assert main(["train", "--corpus", str(corpus), "--output", str(model), "--dim", "16", "--epochs", "3"]) == 0
    capsys.readouterr()
    return corpus, model


def test_subcommand_chain(home, capsys):
    tmp_path, log, truth = home
    corpus, model = _train(tmp_path, log, capsys)

    assert main(["neighbors", "--model", str(model), "--token", "D099", "--k", "10"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 10 and all(len(l.split()) == 2 for l in lines)

    assert main(["neighbors", "--model", str(model), "--json", "--k", "2"]) == 0
    assert len(json.loads(capsys.readouterr().out)) == 18

    reg = tmp_path / "r.bin"
    assert main(["registry", "--model", str(model), "--labels", str(truth), "--exclude", "D099",
                 "--output", str(reg)]) == 0
    assert main(["identify", "--registry", str(reg), "--corpus", str(corpus), "--token", "D099",
                 "--threshold", "0.3", "--dim", "16", "--epochs", "3"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert len(out) == 1 and out[0].split()[0] in ("Identified", "Unknown")

    assert main(["identify", "--registry", str(reg), "--corpus", str(corpus), "--token", "D099", "--json",
                 "--dim", "16", "--epochs", "3"]) == 0
    assert json.loads(capsys.readouterr().out)["verdict"] in ("Identified", "Unknown")

    assert main(["plot", "--model", str(model), "--output", str(tmp_path / "p"), "--iterations", "50",
                 "--learning-rate", "auto"]) == 0
    assert (tmp_path / "p.svg").is_file() and (tmp_path / "p.csv").is_file()

    assert main(["eval", "--model", str(model), "--truth", str(truth), "--k", "3"]) == 0
    assert "mean_recall" in json.loads(capsys.readouterr().out)


def test_run_gap_sweep(home, tmp_path, capsys):
    _, log, truth = home
    cfg = tmp_path / "cfg.txt"
    cfg.write_text(f"input.paths = {log}\neval.ground_truth = {truth}\ntrain.dim = 16\ntrain.epochs = 2\n"
                   f"project.iterations = 50\noutput.dir = {tmp_path / 'out'}\n")
    assert main(["run", "--config", str(cfg), "--gap-sweep", "10,60,600", "--train.seed", "4"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 3
    assert {p.name for p in (tmp_path / "out").iterdir()} == {"gap_10", "gap_60", "gap_600", "sweep.json"}
    assert "train.seed = 4" in (tmp_path / "out" / "gap_60" / "config.txt").read_text()


def test_error_is_single_line(tmp_path, capsys):
    assert main(["neighbors", "--model", str(tmp_path / "missing.bin")]) == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("devicevec: error: ")


def test_stage_error_line(tmp_path, capsys):
    empty = tmp_path / "e.log"
    empty.write_text("")
    assert main(["run", "--input.paths", str(empty), "--output-dir", str(tmp_path / "o")]) == 1
    err = capsys.readouterr().err.strip()
    assert err.startswith("devicevec: error: stage=sessionize EmptyInput:")


def test_unknown_token(home, capsys):
    tmp_path, log, _ = home
    _, model = _train(tmp_path, log, capsys)
    assert main(["neighbors", "--model", str(model), "--token", "X123"]) == 1
    assert "X123" in capsys.readouterr().err


def test_usage_error(capsys):
    with pytest.raises(SystemExit) as info:
        main(["train"])
    assert info.value.code == 2
    assert "--corpus" in capsys.readouterr().err

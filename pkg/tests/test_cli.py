import json

from critique_rl.cli import main
from critique_rl.data import load_dataset
from critique_rl.similarity import compute_similarity


def test_gen_train_report(tmp_path, capsys):
    data = tmp_path / "d.jsonl"
    assert main(["gen-data", "--seed", "2", "--out", str(data)]) == 0
    assert len(load_dataset(data)) == 200
    cfg = tmp_path / "c.txt"
    cfg.write_text("steps=2\nbatch_size=4\nn_rollout=2\n")
    main(["train", "--config", str(cfg), "--regime", "online_metarm", "--seed", "2", "--out", str(tmp_path / "run")])
    assert (tmp_path / "run/metrics.csv").exists() and (tmp_path / "run/metarm.json").exists()
    main(["report", str(tmp_path / "run/metrics.csv"), "--out", str(tmp_path / "rep")])
    assert (tmp_path / "rep/summary.csv").exists()


def test_tournaments_local_oracle(tmp_path):
    out = tmp_path / "bon.json"
    main(["eval-bon", "--n", "6", "--seed", "1", "--out", str(out)])
    doc = json.loads(out.read_text())
    assert doc["winner"] == doc["true_best"] and len(doc["match_log"]) == 5
    main(["eval-double-elim", "--n", "5", "--seed", "1", "--out", str(out)])
    doc = json.loads(out.read_text())
    assert doc["ranking"][0] == doc["true_best"]
    main(["feedback-edit", "--n", "4", "--out", str(out)])
    assert "quality 3" in json.loads(out.read_text())["edited"]


def test_score_local(tmp_path, capsys):
    data = tmp_path / "d.jsonl"
    main(["gen-data", "--seed", "0", "--out", str(data)])
    sample = next(s for s in load_dataset(data) if s.has_critique)
    gen = tmp_path / "g.jsonl"
    gen.write_text(json.dumps({"id": sample.id, "critique": sample.human_critique.to_list()}) + "\n")
    for mode in ("core", "all"):
        capsys.readouterr()
        main(["score", "--dataset", str(data), "--critiques", str(gen), "--mode", mode])
        row = json.loads(capsys.readouterr().out)
        expected = compute_similarity(sample.human_critique, sample.human_critique, mode).rounded()
        assert row == {"id": sample.id, **expected}
    assert expected["f1"] == 1.0

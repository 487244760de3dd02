import subprocess
import sys

import numpy as np
import pytest

from cascade_embedding.cli import main, read_config_file
from cascade_embedding.embedding import read_embedding
from cascade_embedding.inference import read_rates
from cascade_embedding.sampler import read_cascades

from conftest import FIG1_EDGES


def write_two_communities(tmp_path, n=30, seed=0):
    rng = np.random.default_rng(seed)
    half = n // 2
    lines, labels = [], []
    for i in range(n):
        labels.append(f"n{i}\t{'A' if i < half else 'B'}")
        for j in range(i + 1, n):
            same = (i < half) == (j < half)
            if rng.random() < (0.4 if same else 0.02):
                lines.append(f"n{i} n{j}")
    g, lab = tmp_path / "g.txt", tmp_path / "labels.txt"
    g.write_text("\n".join(lines) + "\n")
    lab.write_text("\n".join(labels) + "\n")
    return g, lab


FAST = ["--steps", "6", "--horizon", "3", "--dim", "4", "--ratios", "0.5",
        "--repetitions", "2", "--max-iter", "300"]


def test_pipeline_on_fig1(tmp_path, fig1_path, capsys):
    out = tmp_path / "run"
    code = main(["pipeline", "--graph", str(fig1_path), "--directed", "--steps", "3",
                 "--dim", "2", "--passes", "2", "--out", str(out)])
    assert code == 0
    emb = read_embedding(out / "embedding.txt")
    assert emb.n_nodes == 4 and emb.dim == 2
    assert set(emb.labels) == {"v1", "v2", "v3", "v4"}
    assert len(read_cascades(out / "cascades.txt")) == 8
    assert not (out / "report.csv").exists()
    assert "cascades: 8" in capsys.readouterr().out


def test_pipeline_equals_staged_commands(tmp_path):
    g, lab = write_two_communities(tmp_path)
    shared = ["--graph", str(g), "--labels", str(lab), "--seed", "3", *FAST]
    assert main(["pipeline", *shared, "--out", str(tmp_path / "p")]) == 0
    s = tmp_path / "s"
    s.mkdir()
    assert main(["sample", *shared, "--out", str(s / "c.txt")]) == 0
    assert main(["infer", str(s / "c.txt"), *shared, "--out", str(s / "r.tsv")]) == 0
    assert main(["embed", str(s / "r.tsv"), *shared, "--out", str(s / "e.txt")]) == 0
    assert main(["evaluate", str(s / "e.txt"), *shared, "--out", str(s / "rep.csv")]) == 0
    p = tmp_path / "p"
    for a, b in [("cascades.txt", "c.txt"), ("rates.tsv", "r.tsv"), ("embedding.txt", "e.txt"),
                 ("report.csv", "rep.csv")]:
        assert (p / a).read_bytes() == (s / b).read_bytes(), a


def test_reruns_are_byte_identical(tmp_path):
    g, lab = write_two_communities(tmp_path, seed=1)
    args = ["--graph", str(g), "--labels", str(lab), *FAST]
    main(["pipeline", *args, "--out", str(tmp_path / "a")])
    main(["pipeline", *args, "--out", str(tmp_path / "b")])
    main(["pipeline", *args, "--seed", "1", "--out", str(tmp_path / "c")])
    for name in ("cascades.txt", "rates.tsv", "embedding.txt", "report.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert ((tmp_path / "a" / "cascades.txt").read_bytes()
            != (tmp_path / "c" / "cascades.txt").read_bytes())


def test_zero_steps_gives_seed_only_cascades_and_empty_rates(tmp_path, fig1_path):
    c, r = tmp_path / "c.txt", tmp_path / "r.tsv"
    assert main(["sample", "--graph", str(fig1_path), "--steps", "0", "--out", str(c)]) == 0
    assert all(len(x) == 1 for x in read_cascades(c))
    assert main(["infer", str(c), "--out", str(r)]) == 0
    assert read_rates(r).matrix.nnz == 0
    assert [l for l in r.read_text().splitlines() if not l.startswith("#")] == []


def test_rank_one_rates_give_zero_second_column(tmp_path):
    r, e = tmp_path / "r.tsv", tmp_path / "e.txt"
    r.write_text("# nodes=3\n0\t1\t2.5\n")
    assert main(["embed", str(r), "--dim", "2", "--out", str(e)]) == 0
    emb = read_embedding(e)
    assert np.all(emb.vectors[:, 1] == 0.0)
    assert "-0 " not in e.read_text()


@pytest.mark.parametrize("argv, code", [
    (["bogus"], 1),
    ([], 1),
    (["sample", "--graph", "/nonexistent.txt", "--out", "x"], 2),
    (["sample", "--graph", "G", "--passes", "0", "--out", "x"], 1),
    (["sample", "--graph", "G", "--horizon", "-1", "--out", "x"], 1),
    (["sample", "--graph", "G"], 1),
    (["sample", "--graph", "G", "--time-model", "powerlaw", "--time-param", "1", "--out", "x"], 1),
    (["embed", "R", "--dim", "9", "--out", "x"], 1),
    (["evaluate", "E", "--out", "x"], 1),
])
def test_exit_codes(tmp_path, fig1_path, argv, code):
    r = tmp_path / "r.tsv"
    r.write_text("# nodes=3\n0\t1\t1\n")
    e = tmp_path / "e.txt"
    e.write_text("1 1\na 0\n")
    subst = {"G": str(fig1_path), "R": str(r), "E": str(e), "x": str(tmp_path / "x")}
    assert main([subst.get(a, a) for a in argv]) == code


def test_corrupted_cascade_file_names_line(tmp_path, capsys):
    c = tmp_path / "c.txt"
    c.write_text("# nodes=3\n0;2;0:0,1:1\n1;2;1:0,2:oops\n")
    assert main(["infer", str(c), "--out", str(tmp_path / "r.tsv")]) == 2
    assert "line 3" in capsys.readouterr().err


def test_impossible_cascade_names_line(tmp_path, fig1_path, capsys):
    # v1 -> v3 is not an arc, so restricting to graph arcs makes line 3 impossible
    c = tmp_path / "c.txt"
    c.write_text("# nodes=4\n0;2;0:0,1:1\n0;2;0:0,2:1\n")
    code = main(["infer", str(c), "--graph", str(fig1_path), "--directed", "--support", "graph",
                 "--out", str(tmp_path / "r.tsv")])
    assert code == 3
    assert "c.txt:3" in capsys.readouterr().err


def test_config_file_and_flag_override(tmp_path, fig1_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# settings\ngraph = {fig1_path}\nsteps=2\npasses = 3\ntime-model=powerlaw\n")
    assert read_config_file(cfg)["passes"] == 3
    out = tmp_path / "c.txt"
    assert main(["sample", "--config", str(cfg), "--passes", "2", "--out", str(out)]) == 0
    assert len(read_cascades(out)) == 8
    bad = tmp_path / "bad.cfg"
    bad.write_text("nonsense = 1\n")
    assert main(["sample", "--config", str(bad), "--out", str(out)]) == 1


def test_sweep(tmp_path):
    g, lab = write_two_communities(tmp_path, seed=2)
    out = tmp_path / "sw"
    code = main(["sweep", "--param", "passes", "--values", "1,2", "--graph", str(g),
                 "--labels", str(lab), *FAST, "--out", str(out)])
    assert code == 0
    rows = (out / "sweep.csv").read_text().splitlines()
    assert rows[0] == "param,value,ratio,metric,mean,std"
    assert len(rows) == 1 + 2 * 2
    assert (out / "passes-2" / "embedding.txt").exists()


def test_module_entry_point(tmp_path):
    g = tmp_path / "g.txt"
    g.write_text(FIG1_EDGES)
    res = subprocess.run([sys.executable, "-m", "cascade_embedding", "sample", "--graph", str(g),
                          "--out", str(tmp_path / "c.txt")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert res.stdout.startswith("cascades: 4")

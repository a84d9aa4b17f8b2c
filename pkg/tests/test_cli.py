import pytest

from nevo import genome as genome_mod
from nevo.cli import RunConfig, main, read_config_file
from nevo.envs import expert_action, read_dataset
from nevo.errors import ConfigError
from nevo.report import read_csv


def _evolve(tmp_path, name, *extra):
    out = tmp_path / name
    code = main(["evolve", "--task", "cartpole", "--mode", "score", "--net", "dynamic",
                 "--pop", "4", "--gens", "4", "--seed", "1", "--out", str(out), *extra])
    return code, out


def _summary(out):
    return dict(line.split("=", 1) for line in (out / "summary.txt").read_text().splitlines())


def test_evolve_writes_artifacts_deterministically(tmp_path):
    code, a = _evolve(tmp_path, "a")
    assert code == 0
    for f in ("log.csv", "plot.csv", "plot.png", "best.genome", "summary.txt"):
        assert (a / f).exists()
    _, b = _evolve(tmp_path, "b")
    assert (a / "log.csv").read_bytes() == (b / "log.csv").read_bytes()
    rows = read_csv(a / "log.csv")
    assert [int(r["generation"]) for r in rows] == list(range(5))
    plot = read_csv(a / "plot.csv")
    assert list(plot[0]) == ["generation", "mean", "max"]
    assert [p["max"] for p in plot] == [r["max_fitness"] for r in rows]
    assert (a / "plot.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    assert not list(a.glob(".*tmp*"))


def test_distributed_comm_gives_same_log(tmp_path):
    _, a = _evolve(tmp_path, "a")
    code, b = _evolve(tmp_path, "b", "--comm", "p2p")
    assert code == 0
    assert (a / "log.csv").read_bytes() == (b / "log.csv").read_bytes()


def test_replay_reproduces_logged_fitness(tmp_path, capsys):
    _, out = _evolve(tmp_path, "a")
    s = _summary(out)
    capsys.readouterr()
    assert main(["replay", str(out / "best.genome"), "--episode-seed", s["episode_seed"]]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert float(lines[0].split()[1]) == float(s["best_fitness"])
    assert float(s["best_fitness"]) == max(float(r["max_fitness"]) for r in read_csv(out / "log.csv")[-1:])
    trace = lines[1].split()[1:]
    assert len(trace) == int(float(s["best_fitness"]))
    assert lines[2].startswith("network drn genome_len")


def test_replay_empty_genome_and_corrupt_file(tmp_path, capsys):
    empty = tmp_path / "empty.genome"
    genome_mod.write(empty, genome_mod.Genome("composite", (1, 8, 8, 5)))
    assert main(["replay", str(empty), "--task", "dotchase", "--episode-seed", "3"]) == 0
    assert "channels 0" in capsys.readouterr().out
    bad = tmp_path / "bad.genome"
    bad.write_text("NEVO-GENOME v1\nkind=drn\ninit=4,2\nseed=zz\n")
    assert main(["replay", str(bad)]) == 1
    assert main(["replay", str(tmp_path / "missing.genome")]) == 1


def test_record_expert_round_trip(tmp_path):
    path = tmp_path / "ds.traj"
    assert main(["record-expert", "--task", "cartpole", "--n", "4", "--T", "25", "--seed", "2",
                 "--out", str(path)]) == 0
    ds = read_dataset(path)
    assert len(ds) == 4 and ds.T == 25
    for tr in ds.trajectories:
        assert all(expert_action("cartpole", o) == a for o, a in zip(tr.obs, tr.actions))


def test_record_expert_failure_exit(tmp_path):
    # T beyond the episode cap cannot be recorded
    assert main(["record-expert", "--T", "900", "--out", str(tmp_path / "x.traj")]) in (1, 2)


def test_imitate_mode(tmp_path):
    ds = tmp_path / "ds.traj"
    main(["record-expert", "--n", "4", "--T", "20", "--out", str(ds)])
    out = tmp_path / "imit"
    assert main(["evolve", "--mode", "imitate", "--dataset", str(ds), "--pop", "2", "--gens", "2",
                 "--T", "20", "--out", str(out)]) == 0
    rows = read_csv(out / "log.csv")
    assert list(rows[0]) == ["generation", "gen_mean", "gen_max", "disc_mean", "disc_max",
                             "agreement_top_gen"]
    assert (out / "best_discriminator.genome").exists()
    assert "agreement_top_gen" in _summary(out)


@pytest.mark.parametrize("argv", [
    ["evolve", "--pop", "3"],
    ["evolve", "--mode", "imitate"],
    ["evolve", "--task", "pong"],
    ["evolve", "--seed", "-1"],
    ["nonsense"],
    ["evolve", "--config", "/nonexistent/cfg"],
])
def test_config_errors_exit_1(argv, tmp_path):
    assert main(argv + ["--out", str(tmp_path)] if argv[0] == "evolve" else argv) == 1


def test_config_file_and_override(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# small run\npop = 6\ngens=2\nseed=0x10\nnet=static\n")
    assert read_config_file(cfg) == {"pop": 6, "gens": 2, "seed": 16, "net": "static"}
    out = tmp_path / "o"
    assert main(["evolve", "--config", str(cfg), "--gens", "1", "--out", str(out)]) == 0
    s = _summary(out)
    assert s["pop"] == "6" and s["seed"] == "16" and s["net"] == "static"
    assert len(read_csv(out / "log.csv")) == 2
    cfg.write_text("population=6\n")
    with pytest.raises(ConfigError):
        read_config_file(cfg)


def test_run_config_invariants():
    with pytest.raises(ConfigError):
        RunConfig(mode="imitate").validate()
    with pytest.raises(ConfigError):
        RunConfig(pop=5).validate()
    RunConfig(pop=4).validate()


def test_bench_comm_command(tmp_path):
    out = tmp_path / "b"
    assert main(["bench-comm", "--gens", "6", "--out", str(out)]) == 0
    rows = read_csv(out / "bench.csv")
    assert [r["mode"] for r in rows].count("rebuild") == 6
    assert [float(r["variation_ops"]) for r in rows if r["mode"] == "rebuild"] == [1, 2, 3, 4, 5, 6]
    assert {float(r["variation_ops"]) for r in rows if r["mode"] == "p2p"} == {1.0}
    assert (out / "bench.png").exists()

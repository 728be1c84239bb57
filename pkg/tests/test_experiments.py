import csv
import io
import math

import numpy as np
import pytest

from ellipsec.cli import main
from ellipsec.experiments import (
    ConfigError,
    ExperimentConfig,
    Table,
    emit_plotdata,
    format_cell,
    parse_key_values,
    run_bound_audit,
    run_decay,
    run_dichotomy,
    run_gelfand,
    run_lower_probe,
    run_radius,
    run_recovery_sweep,
    wilson,
)
from ellipsec.gelfand import REGIONS


def cfg(**kw):
    return ExperimentConfig.from_mapping({k: str(v) for k, v in kw.items()})


class TestConfig:
    def test_parse_and_aliases(self):
        c = ExperimentConfig.from_text(
            """
            # decay run
            experiment = decay
            p = inf
            lambda = 3/2
            n = 8, 16
            m = 64
            C1 = 2
            sharp = yes
            """
        )
        assert c.p == math.inf and c.lam == 1.5 and c.n_grid == (8, 16) and c.m == 64 and c.C1 == 2 and c.sharp

    def test_overrides_win(self, tmp_path):
        f = tmp_path / "c.cfg"
        f.write_text("p = 2\ntrials = 5\n")
        assert ExperimentConfig.from_file(f, {"trials": "7"}).trials == 7

    @pytest.mark.parametrize(
        "bad",
        [
            {"color": "red"},
            {"p": "-1"},
            {"p": "two"},
            {"n": "16,8"},
            {"n": ""},
            {"n": "8", "m": "8"},
            {"trials": "0"},
            {"method": "guess"},
            {"eps": "1.5"},
            {"m_rule": "square"},
            {"experiment": "nope"},
            {"sharp": "maybe"},
            {"lambda": "-0.5"},
        ],
    )
    def test_rejects(self, bad):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_mapping(bad)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            ExperimentConfig.from_file(tmp_path / "missing.cfg")

    def test_bad_line(self):
        with pytest.raises(ConfigError):
            parse_key_values(["p 2"])

    def test_m_rules(self):
        assert cfg(n="8,16").pairs() == [(8, 128), (16, 128)]
        assert cfg(n="8,16", m_rule="factor", m_factor=3).pairs() == [(8, 24), (16, 48)]
        assert cfg(experiment="dichotomy", n="5", m_grid="10,20").pairs() == [(5, 10), (5, 20)]

    def test_sigma_file(self, tmp_path):
        f = tmp_path / "s.csv"
        f.write_text("sigma\n3\n2\n1\n0.5\n")
        c = cfg(sigma=f, n="1,2", m=4)
        np.testing.assert_array_equal(c.ellipsoid(4).sigma, [3, 2, 1, 0.5])
        assert c.lambda_label == "custom"
        with pytest.raises(ConfigError):
            cfg(sigma=f, n="1", m=5)

    def test_ball(self):
        np.testing.assert_array_equal(cfg(lam=0, n="1", m=3).ellipsoid(3).sigma, [1, 1, 1])


class TestTables:
    def test_format(self):
        assert format_cell(0.1) == "0.10000000000000001"
        assert format_cell(1 / 3) == "0.33333333333333331"
        assert format_cell(True) == "true" and format_cell(None) == "" and format_cell(np.int64(3)) == "3"
        assert format_cell(math.inf) == "inf"

    def test_csv_round_trip(self):
        t = Table("t", ("a", "b"))
        t.add(a=1 / 3, b='say "hi", ok')
        text = t.to_csv()
        assert text.endswith("\r\n") and text.startswith("a,b\r\n")
        rows = list(csv.reader(io.StringIO(text)))
        assert float(rows[1][0]) == 1 / 3 and rows[1][1] == 'say "hi", ok'

    def test_missing_column(self):
        with pytest.raises(KeyError):
            Table("t", ("a", "b")).add(a=1)

    def test_wilson(self):
        lo, hi = wilson(150, 200)
        assert lo < 0.75 < hi
        assert wilson(0, 0) == (0.0, 1.0)


class TestRunners:
    def test_radius_rows_and_floor(self):
        t = run_radius(cfg(experiment="radius", p=2, n="2,4", m=12, trials=3))
        assert len(t.rows) == 6
        E_sigma = cfg(p=2, n="2", m=12).ellipsoid(12).sigma
        for r in t.rows:
            assert r["radius"] >= E_sigma[r["n"]] * (1 - 1e-12)

    def test_decay_small(self):
        res = run_decay(cfg(p=2, lam=1.5, n="4,8,16", m=64, trials=5))
        assert len(res.fit.rows) == 3 and len(res.trials.rows) == 15
        assert res.slope < 0 and res.predicted_slope == pytest.approx(1.5)
        for r in res.trials.rows:
            assert r["radius"] >= r["floor"] * (1 - 1e-12)

    def test_decay_needs_two_n(self):
        with pytest.raises(ConfigError):
            run_decay(cfg(n="8", m=64))

    def test_dichotomy_ball_threshold(self):
        summary, trials = run_dichotomy(cfg(experiment="dichotomy", p=2, lam=0, n="2", m_grid="8,16", trials=4))
        assert all(r["threshold"] == 0.5 for r in summary.rows)
        assert [r["m"] for r in summary.rows] == [8, 16]

    def test_dichotomy_witness_scope(self):
        with pytest.raises(ConfigError):
            run_dichotomy(cfg(experiment="dichotomy", p=3, lam=0.2, n="2", m=20, trials=2))

    def test_probe(self):
        summary, trials = run_lower_probe(cfg(experiment="lower_probe", p=2, lam=0, n="2", m=40, trials=10, eps=0.2))
        assert len(trials.rows) == 10
        for r in trials.rows:
            if r["witness_feasible"]:
                assert r["witness_norm"] == pytest.approx(0.5)
                assert r["radius_floor"] >= 0.5
        with pytest.raises(ConfigError):
            run_lower_probe(cfg(experiment="lower_probe", p=3, n="2", m=40))

    def test_audit_p2(self):
        summary, trials = run_bound_audit(cfg(experiment="bound_audit", p=2, lam=1, n="8,16", m=128, trials=3))
        assert {r["shape_name"] for r in summary.rows} == {"theorem_A"}
        assert all(r["ratio"] > 0 for r in trials.rows)

    def test_audit_cube_uses_l1_tail(self):
        summary, trials = run_bound_audit(cfg(experiment="bound_audit", p="inf", lam=1.5, n="4", m=32, trials=2))
        r = trials.rows[0]
        sigma = np.arange(1, 33, dtype=float) ** -1.5
        assert r["thmA"] == pytest.approx(np.sum(sigma[r["k_used"] - 1 :]) / 2)

    def test_recovery_sparse(self):
        t = run_recovery_sweep(cfg(experiment="recovery_sweep", p=1, n="24", m=64, sparsity="2,3", trials=4))
        assert len(t.rows) == 8 and all(r["success"] for r in t.rows)

    def test_recovery_scope(self):
        with pytest.raises(ConfigError):
            run_recovery_sweep(cfg(experiment="recovery_sweep", p=2, n="4", m=8))

    def test_gelfand_table(self):
        t = run_gelfand(cfg(experiment="gelfand", p=2, lam=1, n="2,4", m=16))
        names = t.column("theorem")
        assert "exact_tail" in names and "theorem_A" in names and "decay_random" in names
        t = run_gelfand(cfg(experiment="gelfand", p=0.5, lam=1, q=2, n="8", m=64))
        assert "theorem_C" in t.column("theorem")


class TestPlotData:
    def test_phase_diagram_regions(self):
        t = emit_plotdata(None, "phase_diagram", grid=50)
        assert len(t.rows) == 2500
        seen = set(t.column("region"))
        assert {"useless", "below_threshold", "above_threshold", "open_case"} <= seen
        assert seen <= set(REGIONS)

    def test_loglog_one_row_per_n(self, tmp_path):
        res = run_decay(cfg(p=2, lam=1, n="4,8", m=32, trials=3))
        path = res.trials.write(tmp_path)
        t = emit_plotdata(path, "loglog_decay")
        assert t.column("n") == [4, 8]

    def test_empty_csv(self, tmp_path):
        f = tmp_path / "empty.csv"
        f.write_text("n,radius\r\n")
        t = emit_plotdata(f, "loglog_decay")
        assert t.rows == [] and t.to_tsv() == "n\tmedian\tlog_n\tlog_median\n"

    def test_probability_curve(self, tmp_path):
        summary, _ = run_dichotomy(cfg(experiment="dichotomy", p=2, lam=0.25, n="2", m_grid="10,20", trials=5))
        t = emit_plotdata(summary.write(tmp_path), "probability_curve")
        assert len(t.rows) == 2

    def test_unknown_kind(self):
        with pytest.raises(ConfigError):
            emit_plotdata(None, "pie")


class TestCli:
    def test_exit_codes(self, tmp_path, capsys):
        assert main(["--out", str(tmp_path), "gelfand", "p=2", "n=2,4", "m=16"]) == 0
        assert (tmp_path / "gelfand.csv").is_file()
        assert main(["--out", str(tmp_path), "gelfand", "p=-2"]) == 1
        assert main(["--out", str(tmp_path), "radius", "bogus=1"]) == 1
        assert main(["--config", str(tmp_path / "nope.cfg"), "radius"]) == 1
        assert main(["--threads", "0", "radius"]) == 1
        assert main(["plotdata", "loglog_decay"]) == 1

    def test_numerical_failure_exit(self, tmp_path, monkeypatch):
        import ellipsec.cli as cli

        def boom(*a, **k):
            raise FloatingPointError("nan radius")

        monkeypatch.setattr(cli, "run_radius", boom)
        assert main(["--out", str(tmp_path), "radius", "n=2", "m=8", "trials=1"]) == 2

    def test_config_file_and_flags_after_subcommand(self, tmp_path):
        conf = tmp_path / "r.cfg"
        conf.write_text("p = 2\nlambda = 1\nn = 2,4\nm = 16\ntrials = 3\n")
        assert main(["radius", "--config", str(conf), "--out", str(tmp_path / "a"), "--seed", "4"]) == 0
        rows = list(csv.DictReader(open(tmp_path / "a" / "radius.csv", newline="")))
        assert len(rows) == 6 and {r["seed"] for r in rows} == {"4"}

    def test_plotdata_cli(self, tmp_path):
        assert main(["--out", str(tmp_path), "plotdata", "phase_diagram", "--grid", "5"]) == 0
        assert len((tmp_path / "phase_diagram.tsv").read_text().splitlines()) == 26

    @pytest.mark.parametrize(
        "args",
        [
            ["radius", "p=1.5", "lambda=1", "n=2,3", "m=10", "trials=4"],
            ["decay", "p=2", "lambda=1", "n=2,4", "m=16", "trials=4"],
            ["dichotomy", "p=1.5", "lambda=0.2", "n=2", "m_grid=10,20", "trials=4"],
            ["probe", "p=2", "lambda=0.25", "n=2", "m=30", "trials=6"],
            ["audit", "p=0.5", "lambda=1", "n=4,8", "m=32", "trials=2", "probe_count=4"],
            ["recover", "p=1", "n=8", "m=20", "sparsity=1,2", "trials=3"],
            ["gelfand", "p=4", "lambda=0.7", "n=2,4", "m=16"],
        ],
    )
    def test_threads_do_not_change_output(self, tmp_path, args):
        outs = []
        for th in (1, 3):
            d = tmp_path / f"t{th}"
            assert main(["--seed", "11", "--threads", str(th), "--out", str(d), *args]) == 0
            outs.append({p.name: p.read_bytes() for p in sorted(d.glob("*.csv"))})
        assert outs[0] and outs[0] == outs[1]

import csv
import json
import os
from pathlib import Path

import pytest

from fluxproc import cli

CONFIGS = sorted((Path(__file__).resolve().parent.parent / "configs").glob("*.ini"))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


class TestConfig:
    @pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.stem)
    def test_checked_in_configs_validate(self, path):
        cfg = cli.load_config(path.stem, path.read_text())
        assert cfg.subcommand == path.stem
        assert set(cfg.params) == set(cli.SCHEMA[path.stem])

    def test_every_subcommand_has_a_config(self):
        assert {p.stem for p in CONFIGS} == set(cli.SCHEMA)

    def test_negative_charging_energy(self):
        with pytest.raises(cli.ConfigError, match=r"^spectrum\.e_c: must be positive"):
            cli.load_config("spectrum", "[spectrum]\ne_c = -1\n")

    @pytest.mark.parametrize("text, path", [
        ("[spectrum]\ne_jj = 4\n", "spectrum.e_jj"),
        ("[spectrum]\npoints = many\n", "spectrum.points"),
        ("[cz]\ne_j = 4\n", "cz"),
        ("[run]\nworkers = 0\n", "run.workers"),
    ])
    def test_strict_parsing_names_the_field(self, text, path):
        with pytest.raises(cli.ConfigError) as info:
            cli.load_config("spectrum", text)
        assert str(info.value).startswith(path)

    def test_flags_override_run_section(self):
        cfg = cli.load_config("qec", "[run]\nseed = 3\nworkers = 2\n", seed=9, workers=1)
        assert cfg.rng_seed == 9 and cfg.worker_count == 1

    def test_digest_ignores_worker_count(self):
        a = cli.load_config("yield", "", seed=1, workers=1)
        b = cli.load_config("yield", "", seed=1, workers=4)
        c = cli.load_config("yield", "", seed=2, workers=1)
        assert a.digest() == b.digest() != c.digest()


class TestRuns:
    def test_spectrum_from_checked_in_config(self, tmp_path):
        path = next(p for p in CONFIGS if p.stem == "spectrum")
        assert cli.main(["spectrum", "--config", str(path), "--out", str(tmp_path)]) == 0
        header, *rows = read_csv(tmp_path / "spectrum.csv")
        assert len(rows) == 101
        assert all("[" in h and h.endswith("]") for h in header)
        half = next(r for r in rows if float(r[0]) == pytest.approx(0.5))
        assert float(half[1]) == pytest.approx(0.580, abs=0.002)

    def test_sidecar_records_provenance(self, tmp_path):
        assert cli.main(["spectrum", "--out", str(tmp_path), "--seed", "17"]) == 0
        meta = json.loads((tmp_path / "spectrum.json").read_text())
        for key in ("config", "config_hash", "seed", "version", "wall_time_s", "rows", "csv"):
            assert key in meta
        assert meta["seed"] == 17 and meta["config"]["params"]["points"] == 101

    def test_bad_config_exits_nonzero(self, tmp_path, capsys):
        bad = tmp_path / "bad.ini"
        bad.write_text("[spectrum]\ne_c = -1\n")
        assert cli.main(["spectrum", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2
        assert "spectrum.e_c" in capsys.readouterr().err
        assert not (tmp_path / "o").exists()

    def test_missing_config_file(self, tmp_path):
        assert cli.main(["spectrum", "--config", str(tmp_path / "none.ini")]) == 2

    def test_seeded_runs_are_byte_identical(self, tmp_path):
        text = "[yield]\nrows = 3\ncols = 3\nperiodic = false\nsigma_f = 0, 30\nsamples = 6000\nrestarts = 2\n"
        bodies = []
        for k, workers in enumerate((1, 1, 2)):
            out = tmp_path / str(k)
            cfg = cli.load_config("yield", text, seed=5, workers=workers, out=out)
            cli.run(cfg)
            bodies.append((out / "yield.csv").read_bytes())
        assert bodies[0] == bodies[1] == bodies[2]
        rows = read_csv(tmp_path / "0" / "yield.csv")[1:]
        assert float(rows[0][1]) == 1.0

    def test_writes_only_into_output_directory(self, tmp_path, monkeypatch):
        work = tmp_path / "cwd"
        work.mkdir()
        monkeypatch.chdir(work)
        out = tmp_path / "results"
        assert cli.main(["couple", "--out", str(out)]) == 0
        assert os.listdir(work) == []
        assert sorted(os.listdir(out)) == ["couple.csv", "couple.json"]

    def test_qec_rows(self, tmp_path):
        cfg = cli.load_config("qec", "[qec]\ndistances = 3\nt1 = 300e-6, 1e-3\nshots = 2000\n", out=tmp_path)
        meta = cli.run(cfg)
        assert meta["rows"] == 2
        rows = read_csv(tmp_path / "qec.csv")[1:]
        assert [float(r[0]) for r in rows] == pytest.approx([300.0, 1000.0])

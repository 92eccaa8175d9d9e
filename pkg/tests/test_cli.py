from __future__ import annotations

import json

import pytest

from malle_random import __version__
from malle_random.cli import RunConfig, main, parse_conditions
from malle_random.errors import ValidationError


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


def test_invariants_s3(capsys):
    code, out, _ = run(["invariants", "--group", "S3", "--degree", "3"], capsys)
    rep = json.loads(out)
    assert code == 0 and rep["version"] == __version__
    assert (rep["report"]["a"], rep["report"]["b"]) == (1, 1)
    assert rep["report"]["oracle"]["agrees"]
    assert rep["config"]["group"] == "S3" and "timestamp" not in out


def test_constant_c2(capsys):
    code, out, _ = run(["constant", "--group", "C2", "--weight", "ramified-primes",
                        "--pmax", "1e5"], capsys)
    rep = json.loads(out)["report"]
    assert code == 0 and rep["tail_rigorous"] and rep["tail_bound"] < 1e-4


def test_simulate_reproducible(tmp_path, capsys):
    argv = ["simulate", "--group", "C3", "--places", "norm<=7", "--target-places", "inf,2,3,5",
            "--samples", "3000", "--seed", "42"]
    _, first, _ = run(argv, capsys)
    _, second, _ = run(argv, capsys)
    assert first == second
    # the echoed config reproduces the run byte for byte
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps(json.loads(first)["config"]))
    _, third, _ = run(["simulate", "--config", str(cfg)], capsys)
    assert third == first
    assert json.loads(first)["report"]["summary"]["closed_form"] == "1/27"


def test_config_round_trip():
    cfg = RunConfig("lln", group="C3", seed=1, checkpoints=[10, 20],
                    conditions=parse_conditions("2=unramified,7=0|1"))
    again = RunConfig.from_json(json.loads(json.dumps(cfg.to_json())))
    assert again == cfg


def test_parse_conditions():
    d = parse_conditions("default=all,inf=split,2=unramified,7=0|3")
    assert d["default"] == "all"
    assert d["overrides"] == {"inf": "split", "2": "unramified", "7": [0, 3]}
    with pytest.raises(ValidationError):
        parse_conditions("nonsense")


@pytest.mark.parametrize("argv,code", [
    (["invariants", "--group", "Z7"], 2),
    (["simulate", "--group", "C3"], 2),
    (["local", "--group", "S3", "--local-places", "2"], 3),
    (["moments", "--group", "S4", "--places", "inf,5,7,11", "--frame-cap", "100"], 4),
    (["series", "--group", "S3", "--X", "100"], 3),
])
def test_exit_codes(argv, code, capsys):
    got, _, err = run(argv, capsys)
    assert got == code and err.startswith("error:")


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"subcommand": "invariants", "colour": "blue"}))
    code, _, err = run(["invariants", "--config", str(cfg)], capsys)
    assert code == 2 and "colour" in err


def test_oracle_passes(capsys):
    code, out, _ = run(["oracle", "--group", "C2", "--places", "inf,3,5"], capsys)
    rep = json.loads(out)["report"]
    assert code == 0 and not rep["failed"] and len(rep["checks"]) > 5


def test_oracle_failure_exit(monkeypatch, capsys):
    import malle_random.cli as cli
    monkeypatch.setattr(cli, "malle_ab_oracle", lambda G, w: (99, 99))
    code, out, _ = run(["oracle", "--group", "C2", "--places", "inf,3"], capsys)
    assert code == 5 and "malle_ab" in json.loads(out)["report"]["failed"]


def test_series_and_csv(tmp_path, capsys):
    path = tmp_path / "t.csv"
    code, out, _ = run(["series", "--group", "C2", "--conditions", "2=unramified",
                        "--checkpoints", "100,1000", "--csv", str(path)], capsys)
    rep = json.loads(out)["report"]
    assert code == 0 and [r["X"] for r in rep["tauberian"]] == [100, 1000]
    assert path.read_text().splitlines()[0].startswith("A,")


def test_series_decay(capsys):
    code, out, _ = run(["series", "--group", "C2", "--conditions", "default=split",
                        "--checkpoints", "100,1000"], capsys)
    rep = json.loads(out)["report"]
    assert code == 0 and not rep["admissible"]
    assert all(r["below_inverse_X"] for r in rep["decay"])


def test_local_moments_grunwald_lln(capsys):
    assert run(["local", "--group", "C3", "--local-places", "3,7,inf"], capsys)[0] == 0
    code, out, _ = run(["moments", "--group", "C2", "--places", "inf,3"], capsys)
    assert code == 0 and json.loads(out)["report"]["closed_form_full_S"] == "1/4"
    code, out, _ = run(["grunwald", "--group", "C2", "--places", "inf,3", "--samples", "20",
                        "--seed", "3"], capsys)
    assert code == 0
    code, out, _ = run(["lln", "--group", "C3", "--checkpoints", "50,100", "--samples", "4",
                        "--seed", "3", "--parallelism", "2"], capsys)
    rep = json.loads(out)["report"]
    assert code == 0 and len(rep["rows"]) == 2

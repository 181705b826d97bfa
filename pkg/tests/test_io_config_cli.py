import io
import json

import pytest
from hypothesis import given, strategies as st

from gmhp.cli import EXIT_CONFIG, EXIT_GATE, EXIT_OK, EXIT_TRUNCATION, main
from gmhp.cluster import SimOptions, simulate_many
from gmhp.config import ConfigError, loads, parse_config
from gmhp.io import read_events, write_events
from gmhp.marks import DELTA, Event, Mark, Path
from gmhp.presets import SupercriticalWarning, build


def base_config(**over):
    cfg = {"version": 1, "model": {"preset": "bivariate_exp"}, "horizon": 5.0,
           "n_paths": 10, "seed": 42,
           "outputs": [{"kind": "events", "path": "events.csv", "format": "csv"}]}
    cfg.update(over)
    return cfg


def run(tmp_path, command, cfg, *extra):
    tmp_path.mkdir(parents=True, exist_ok=True)
    f = tmp_path / "run.json"
    f.write_text(json.dumps(cfg))
    return main([command, "--config", str(f), "--out-dir", str(tmp_path / "out"), *extra])


# -- event files -----------------------------------------------------------------

@pytest.mark.parametrize("name", ["bivariate_exp", "bivariate_gauss", "etas", "finance"])
def test_event_csv_round_trip(name):
    spec = build(name)
    paths = simulate_many(spec, SimOptions(5.0, 25, 7), 4)
    buf = io.StringIO()
    write_events(buf, paths, spec.flavors)
    buf.seek(0)
    back = read_events(buf, spec.flavors, 5.0, n_paths=4)
    assert [p.events for p in back] == [p.events for p in paths]


def test_event_csv_dummy_and_header():
    p = Path((Event(0.25, Mark((1, DELTA)), 0), Event(0.5, Mark((DELTA, 1)), None)), 1.0, 2)
    buf = io.StringIO()
    write_events(buf, p, ("label", "label"), with_path_id=False)
    lines = buf.getvalue().splitlines()
    assert lines[0] == "t,gen,x_1,x_2"
    assert lines[1] == "2.5000000000000000e-01,0,1,"
    assert lines[2] == "5.0000000000000000e-01,,,1"
    buf.seek(0)
    assert read_events(buf, ("label", "label"), 1.0)[0].events == p.events


@given(st.lists(st.floats(0.0, 1.0, exclude_min=True), max_size=20, unique=True),
       st.lists(st.floats(-1e6, 1e6), min_size=20, max_size=20))
def test_real_marks_survive_text(times, values):
    evs = tuple(Event(t, Mark((v,)), 0) for t, v in zip(sorted(times), values))
    p = Path(evs, 1.0, 1)
    buf = io.StringIO()
    write_events(buf, p, ("real",))
    buf.seek(0)
    assert read_events(buf, ("real",), 1.0, n_paths=1)[0].events == evs


# -- config ----------------------------------------------------------------------

def test_config_round_trip():
    cfg = parse_config(base_config(gates={"ks_level": 0.05}, engine="markov",
                                   check_model={"preset": "bivariate_exp"}))
    again = loads(cfg.dumps())
    assert again == cfg
    assert again.gates.ks_level == 0.05


@pytest.mark.parametrize("mutate, field", [
    (lambda d: d.update(horizon_typo=1), "horizon_typo"),
    (lambda d: d.pop("version"), "version"),
    (lambda d: d.pop("horizon"), "horizon"),
    (lambda d: d.update(horizon=-1.0), "horizon"),
    (lambda d: d.update(n_paths=0), "n_paths"),
    (lambda d: d.update(seed=2 ** 64), "seed"),
    (lambda d: d.update(engine="exact"), "engine"),
    (lambda d: d["model"].update(preset="nope"), "model.preset"),
    (lambda d: d["model"].update(params={"alpha": [1, 1, 1], "gamma": 1}), "model.params"),
    (lambda d: d["outputs"].append({"kind": "report", "path": "events.csv"}), "outputs"),
    (lambda d: d["outputs"][0].update(format="parquet"), "outputs[0].format"),
    (lambda d: d.update(gates={"ks": 0.1}), "gates.ks"),
])
def test_config_errors_name_the_field(mutate, field):
    d = base_config()
    mutate(d)
    with pytest.raises(ConfigError) as info:
        parse_config(d)
    assert info.value.field == field


def test_markov_engine_needs_bivariate_exp(tmp_path, capsys):
    d = base_config(engine="markov", model={"preset": "bivariate_gauss"})
    with pytest.raises(ConfigError) as info:
        parse_config(d)
    assert info.value.field == "engine"
    assert run(tmp_path, "simulate", d) == EXIT_CONFIG
    assert "engine" in capsys.readouterr().err


# -- commands --------------------------------------------------------------------

def test_simulate_writes_ten_path_blocks(tmp_path, capsys):
    assert run(tmp_path, "simulate", base_config()) == EXIT_OK
    spec = build("bivariate_exp")
    with open(tmp_path / "out" / "events.csv") as fh:
        paths = read_events(fh, spec.flavors, 5.0, n_paths=10)
    assert len(paths) == 10 and sum(map(len, paths)) > 0
    assert "simulated 10 paths" in capsys.readouterr().out


def test_zero_base_gives_empty_file(tmp_path):
    d = base_config(model={"preset": "classical", "params": {"lam": 0.0, "theta": 0.5,
                                                              "beta": 1.0}})
    assert run(tmp_path, "simulate", d) == EXIT_OK
    assert (tmp_path / "out" / "events.csv").read_text() == "path_id,t,gen,x_1\n"


def test_per_path_files(tmp_path):
    d = base_config(n_paths=3, outputs=[{"kind": "events", "path": "p_{j}.csv",
                                         "format": "csv-per-path"}])
    assert run(tmp_path, "simulate", d) == EXIT_OK
    names = sorted(f.name for f in (tmp_path / "out").iterdir())
    assert names == ["p_0.csv", "p_1.csv", "p_2.csv"]


def test_truncation_error_exit(tmp_path):
    d = base_config(model={"preset": "classical", "params": {"lam": 1.0, "theta": 2.0,
                                                              "beta": 1.0}},
                    horizon=10.0, max_generation=2, truncation="error")
    with pytest.warns(SupercriticalWarning):
        assert run(tmp_path, "simulate", d) == EXIT_TRUNCATION


def test_seed_override_and_jobs_determinism(tmp_path):
    d = base_config(n_paths=40)
    assert run(tmp_path / "a", "simulate", d, "--jobs", "1") == EXIT_OK
    assert run(tmp_path / "b", "simulate", d, "--jobs", "8") == EXIT_OK
    assert run(tmp_path / "c", "simulate", d, "--seed", "43") == EXIT_OK
    a = (tmp_path / "a" / "out" / "events.csv").read_bytes()
    b = (tmp_path / "b" / "out" / "events.csv").read_bytes()
    c = (tmp_path / "c" / "out" / "events.csv").read_bytes()
    assert a == b and a != c


def test_validate_example_passes(tmp_path, capsys):
    d = base_config(n_paths=2000, outputs=[{"kind": "report", "path": "rep.json"}])
    assert run(tmp_path, "validate", d) == EXIT_OK
    rep = json.loads((tmp_path / "out" / "rep.json").read_text())
    assert rep["passed"]
    assert set(rep["report"]["cross_engine_gap_se_units"]) == {"mean_1", "mean_2", "mean_c",
                                                               "var_1"}


def test_validate_mismatched_kernel_fails(tmp_path, capsys):
    theta2 = [[1.0, 0.5, 0.5], [0.5, 1.0, 0.5], [0.5, 0.5, 0.5]]
    d = base_config(n_paths=1000, check_model={
        "preset": "bivariate_exp",
        "params": {"alpha": [0.5, 0.5, 0.25], "beta": [2.5, 2.5, 5.0], "theta": theta2}},
        outputs=[])
    assert run(tmp_path, "validate", d) == EXIT_GATE
    out = capsys.readouterr().out
    assert "ks_1: fail" in out


def test_validate_single_path_is_insufficient(tmp_path, capsys, caplog):
    d = base_config(n_paths=1, outputs=[])
    assert run(tmp_path, "validate", d) == EXIT_OK
    assert "insufficient data" in capsys.readouterr().out
    assert "fewer than two paths" in caplog.text


def test_trace_command(tmp_path):
    d = base_config(n_paths=1, grid=2, outputs=[{"kind": "intensity_trace", "path": "tr.csv"}])
    assert run(tmp_path, "trace", d) == EXIT_OK
    rows = (tmp_path / "out" / "tr.csv").read_text().splitlines()
    assert rows[0] == "t,lambda1,lambda2,lambdac,N1,N2"
    times = [float(r.split(",")[0]) for r in rows[1:]]
    assert times == sorted(times) and len(times) >= 2
    bad = base_config(model={"preset": "etas"},
                      outputs=[{"kind": "intensity_trace", "path": "tr.csv"}])
    assert run(tmp_path, "trace", bad) == EXIT_CONFIG


def test_usage_errors_exit_one(tmp_path):
    with pytest.raises(SystemExit) as info:
        main(["simulate"])
    assert info.value.code == EXIT_CONFIG
    assert main(["simulate", "--config", str(tmp_path / "missing.json")]) == EXIT_CONFIG
    assert run(tmp_path, "simulate", base_config(), "--jobs", "0") == EXIT_CONFIG

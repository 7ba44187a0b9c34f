from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crimeblowup.config import (
    SCENARIOS,
    ConfigParseError,
    ConfigValidationError,
    ScenarioConfig,
    config_from_dict,
    config_to_toml,
    load_config,
    parse_config,
)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.mark.parametrize("scenario", SCENARIOS)
def test_shipped_configs_load(scenario):
    cfg = load_config(CONFIG_DIR / f"{scenario}.toml")
    assert cfg.scenario == scenario


def test_minimal_config_uses_defaults():
    cfg = parse_config('scenario = "single_run"\n')
    assert cfg == ScenarioConfig("single_run")
    assert cfg.physical.chi == 2.0 and cfg.grid.N == 1024


@settings(max_examples=40, deadline=None)
@given(
    chi=st.floats(0.5, 6.0),
    n=st.integers(3, 8),
    N=st.integers(16, 4096),
    M=st.lists(st.floats(1.5, 1e4), min_size=1, max_size=5),
    tol=st.floats(1e-11, 1e-3),
)
def test_round_trip(chi, n, N, M, tol):
    cfg = config_from_dict(
        {
            "scenario": "limit_blowup_sweep",
            "physical": {"chi": chi, "n": n},
            "grid": {"N": N},
            "control": {"rel_tol": tol, "dt_init": 1e-4},
            "sweep": {"M": M, "q": 1.0 + chi / 2.0},
        }
    )
    assert parse_config(config_to_toml(cfg)) == cfg


def test_two_dimensions_rejected():
    with pytest.raises(ConfigValidationError) as err:
        parse_config('scenario = "single_run"\n[physical]\nn = 2\n')
    assert err.value.key == "physical.n"


def test_duplicate_key_reports_location():
    text = 'scenario = "single_run"\n[grid]\nN = 64\nN = 128\n'
    with pytest.raises(ConfigParseError) as err:
        parse_config(text)
    assert err.value.line == 4
    assert "line 4" in str(err.value)
    assert str(err.value).count("line") == 1


@pytest.mark.parametrize(
    "text, key",
    [
        ('scenario = "single_run"\n[grid]\ncells = 64\n', "grid.cells"),
        ('scenario = "single_run"\n[plotting]\nx = 1\n', "plotting"),
        ('scenario = "bogus"\n', "scenario"),
        ("[grid]\nN = 64\n", "scenario"),
        ('scenario = "single_run"\n[grid]\nN = 8\n', "grid.N"),
        ('scenario = "single_run"\n[grid]\nN = 64.5\n', "grid.N"),
        ('scenario = "single_run"\n[control]\nrel_tol = 0.5\n', "control.rel_tol"),
        ('scenario = "single_run"\n[control]\nsafety = true\n', "control.safety"),
        ('scenario = "single_run"\n[sweep]\nM = []\n', "sweep.M"),
        ('scenario = "single_run"\n[sweep]\nM = [0.5]\n', "sweep.M[0]"),
        ('scenario = "single_run"\n[ladder]\neps = [2.0]\n', "ladder.eps[0]"),
        ('scenario = "single_run"\n[ladder]\np_monitor = 1.0\n', "ladder.p_monitor"),
        ('scenario = "single_run"\n[scan]\nm_low = 10.0\nm_high = 5.0\n', "scan.m_low"),
        ('scenario = "single_run"\n[single]\nkind = "other"\n', "single.kind"),
        ('scenario = "single_run"\n[output]\nhistory_every = 0\n', "output.history_every"),
    ],
)
def test_validation_errors_name_the_key(text, key):
    with pytest.raises(ConfigValidationError) as err:
        parse_config(text)
    assert err.value.key == key


def test_malformed_toml():
    with pytest.raises(ConfigParseError):
        parse_config('scenario = "single_run"\n[grid\n')


def test_ladder_sample_time_only_bounds_ladder_runs():
    short = '[control]\nT_end = 0.01\n'
    assert parse_config('scenario = "limit_blowup_sweep"\n' + short).control.T_end == 0.01
    with pytest.raises(ConfigValidationError) as err:
        parse_config('scenario = "singular_limit_ladder"\n' + short)
    assert err.value.key == "ladder.sample_time"

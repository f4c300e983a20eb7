"""Harness behavior: config validation, emission formats, CLI verbs."""

import json

import numpy as np
import pytest

from maxaffine.harness_cli import (
    ConfigError,
    FitResult,
    emit,
    fit_limit,
    main,
    parse_config,
    parse_records,
    validate_config,
)
from maxaffine.sweep import SweepRecord


def _cfg(**over):
    cfg = {
        "function": {"catalog_id": "quadratic", "parameters": {},
                     "domain": {"kind": "box", "lower": [0.0],
                                "upper": [1.0]}},
        "p": 1.0,
        "strategy": "exact_1d",
        "m_list": [2, 4],
        "seed": 0,
    }
    cfg.update(over)
    return cfg


def _write_cfg(tmp_path, name="cfg.json", **over):
    path = tmp_path / name
    path.write_text(json.dumps(_cfg(**over)))
    return str(path)


# ---------------------------------------------------------------------------
# config validation


def test_unknown_top_key_gets_suggestion():
    with pytest.raises(ConfigError, match="did you mean 'strategy'"):
        validate_config(_cfg(strategi="exact_1d"))


def test_unknown_catalog_id_lists_choices():
    bad = _cfg()
    bad["function"]["catalog_id"] = "quadratik"
    with pytest.raises(ConfigError, match="quadratic"):
        validate_config(bad)


def test_rejects_bad_p_and_m_list():
    with pytest.raises(ConfigError, match="p must be"):
        validate_config(_cfg(p=0))
    with pytest.raises(ConfigError, match="m_list"):
        validate_config(_cfg(m_list=[4, 0]))
    with pytest.raises(ConfigError, match="m_list"):
        validate_config(_cfg(m_list=[]))


def test_strategy_spellcheck():
    with pytest.raises(ConfigError, match="exact_1d"):
        validate_config(_cfg(strategy="exact1d"))


def test_defaults_are_filled():
    cfg = validate_config({"function": _cfg()["function"]})
    assert cfg["weight"]["catalog_id"] == "constant"
    assert cfg["p"] == 1.0
    assert cfg["strategy"]["name"] == "auto"
    assert cfg["m_list"] == [4, 8, 16, 32]


def test_parse_config_round_trip(tmp_path):
    path = _write_cfg(tmp_path, strategy={"name": "exact_1d", "options": {}})
    cfg = parse_config(path)
    assert cfg["strategy"]["name"] == "exact_1d"
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ConfigError, match="valid JSON"):
        parse_config(str(bad))


# ---------------------------------------------------------------------------
# fit and emission


def test_fit_limit_recovers_synthetic_law():
    records = [SweepRecord(m=m, error=0.0, error_bar=0.0,
                           rescaled=0.04 + 0.1 * m ** -1.0, theory=0.04,
                           ratio=1.0) for m in (4, 8, 16, 32, 64, 128)]
    fit = fit_limit(records)
    assert not fit.degenerate
    assert fit.c_infinity == pytest.approx(0.04, rel=0.01)
    assert fit.exponent == pytest.approx(1.0, abs=0.05)


def test_fit_limit_degenerate_below_four_budgets():
    records = [SweepRecord(m=m, error=0.0, error_bar=0.0, rescaled=r,
                           theory=1.0, ratio=r)
               for m, r in ((2, 0.5), (4, 0.45), (8, 0.42))]
    fit = fit_limit(records)
    assert fit.degenerate
    assert fit.c_infinity == 0.42  # last rescaled value


def test_emit_record_format_round_trips_exactly():
    records = [SweepRecord(m=3, error=1 / 3, error_bar=1e-17,
                           rescaled=3e300, theory=0.1 + 0.2, ratio=-0.0),
               SweepRecord(m=7, error=5e-324, error_bar=0.0,
                           rescaled=np.pi, theory=1 / 24, ratio=1.0)]
    back = parse_records(emit(records, fmt="record"))
    assert [r.__dict__ for r in back] == [r.__dict__ for r in records]


def test_emit_fit_round_trip_and_csv_shape(tmp_path):
    fit = FitResult(c_infinity=1 / 24, amplitude=-0.125, exponent=2.0,
                    residual=3.5e-16, degenerate=False)
    back, = parse_records(emit(fit, fmt="record"))
    assert back == fit
    out = tmp_path / "fit.csv"
    text = emit(fit, fmt="csv", path=str(out))
    assert out.read_text() == text
    header, row = text.strip().split("\n")
    assert header == "c_infinity,amplitude,exponent,residual,degenerate"
    assert row.split(",")[-1] == "0"
    with pytest.raises(ConfigError):
        emit(fit, fmt="yaml")


# ---------------------------------------------------------------------------
# CLI verbs


def test_sweep_verb_is_byte_deterministic(tmp_path):
    cfg = _write_cfg(tmp_path, m_list=[2, 8])
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(["sweep", "--config", cfg, "--out", str(out1)]) == 0
    assert main(["sweep", "--config", cfg, "--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()
    lines = out1.read_text().strip().split("\n")
    assert lines[0] == "m,error,error_bar,rescaled,theory,ratio"
    last = lines[-1].split(",")
    assert int(last[0]) == 8
    assert float(last[1]) == pytest.approx(1 / 1536, rel=1e-10)


def test_sweep_verb_fit_flag(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, m_list=[2, 4, 8, 16, 32])
    assert main(["sweep", "--config", cfg, "--fit"]) == 0
    err = capsys.readouterr().err
    fit, = parse_records(err)
    # rescaled error is exactly flat, so the fit collapses to the limit
    assert fit.c_infinity == pytest.approx(1 / 24, rel=1e-8)


def test_sweep_verb_numeric_failure_is_exit_3(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, function={
        "catalog_id": "quadratic", "parameters": {},
        "domain": {"kind": "box", "lower": [0.0, 0.0], "upper": [1.0, 1.0]}})
    assert main(["sweep", "--config", cfg]) == 3
    assert "aborted" in capsys.readouterr().err


def test_config_error_is_exit_2(tmp_path, capsys):
    bad = _cfg()
    bad["function"]["catalog_id"] = "quadratik"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(bad))
    assert main(["sweep", "--config", str(path)]) == 2
    assert "config error" in capsys.readouterr().err


def test_missing_config_file_is_exit_4(tmp_path, capsys):
    missing = str(tmp_path / "nope.json")
    assert main(["sweep", "--config", missing]) == 4
    assert "i/o failure" in capsys.readouterr().err


def test_approximate_then_error_pipeline(tmp_path, capsys):
    cfg = _write_cfg(tmp_path, m_list=[4])
    env_path = tmp_path / "envelope.txt"
    assert main(["approximate", "--config", cfg, "--out", str(env_path)]) == 0
    out = capsys.readouterr().out
    fields = dict(line.split(" ", 1) for line in out.strip().split("\n"))
    assert fields["pieces"] == "4"
    assert float(fields["max_violation"]) <= 1e-12
    assert main(["error", "--config", cfg, "--envelope", str(env_path)]) == 0
    out = capsys.readouterr().out
    fields = dict(line.split(" ", 1) for line in out.strip().split("\n"))
    assert float(fields["value"]) == pytest.approx(1 / 384, rel=1e-10)


def test_zador_verb_reports_gap(capsys):
    assert main(["zador", "--n", "1", "--m-list", "16,32",
                 "--trials", "3"]) == 0
    out = capsys.readouterr().out
    fields = dict(line.split(" ", 1) for line in out.strip().split("\n"))
    assert float(fields["reference"]) == pytest.approx(1 / 12, rel=1e-12)
    assert abs(float(fields["relative_gap"])) < 0.1
    assert float(fields["half_width"]) >= 0.0


def test_functional_verb_prints_theory(tmp_path, capsys):
    cfg = _write_cfg(tmp_path)
    assert main(["functional", "--config", cfg]) == 0
    out = capsys.readouterr().out
    fields = dict(line.split(" ", 1) for line in out.strip().split("\n"))
    assert float(fields["mass"]) == pytest.approx(1.0, rel=1e-9)
    assert float(fields["delta"]) == pytest.approx(1 / 12, rel=1e-12)
    assert float(fields["theory"]) == pytest.approx(1 / 24, rel=1e-9)


def test_legendre_verb_saves_grid(tmp_path, capsys):
    from maxaffine import GridFunction

    cfg = _write_cfg(tmp_path)
    out = tmp_path / "dual.txt"
    assert main(["legendre", "--config", cfg, "--grid", "129",
                 "--out", str(out)]) == 0
    stdout = capsys.readouterr().out
    assert "truncated 0" in stdout
    star = GridFunction.load_text(str(out))
    assert not star.truncated
    # (x^2/2)* = y^2/2 on the covered part of the dual window
    y = star.axes()[0]
    inside = (y >= 0.0) & (y <= 1.0)
    np.testing.assert_allclose(star.values[inside], 0.5 * y[inside] ** 2,
                               atol=1e-3)


def test_threads_env_override(tmp_path, monkeypatch, capsys):
    cfg = _write_cfg(tmp_path, m_list=[2, 4])
    monkeypatch.setenv("MAXAFFINE_THREADS", "2")
    assert main(["sweep", "--config", cfg]) == 0
    capsys.readouterr()
    monkeypatch.setenv("MAXAFFINE_THREADS", "many")
    assert main(["sweep", "--config", cfg]) == 2
    assert "MAXAFFINE_THREADS" in capsys.readouterr().err

import math

import pytest
from hypothesis import given, settings, strategies as st

from fracmosco import config, experiments
from fracmosco.bernstein import BernsteinSymbol

BASIC = """
kind = "symbol-table"
name = "basic"
seed = 3
[[symbols]]
kind = "stable"
beta = 0.5
[grids]
lam = [0.5, 1.0]
"""


def test_loads_and_builds():
    cfg = config.loads(BASIC)
    assert cfg.kind == "symbol-table" and cfg.seed == 3
    sym = cfg.symbols[0].build()
    assert float(sym(4.0)) == pytest.approx(2.0)


def test_round_trip_keeps_hash():
    cfg = config.loads(BASIC)
    again = config.loads(config.dumps(cfg))
    assert again == cfg and again.hash() == cfg.hash()


def test_hash_ignores_output_dir_and_tracks_content():
    cfg = config.loads(BASIC)
    moved = config.from_dict({**cfg.model_dump(exclude_none=True), "output_dir": "/tmp/x"})
    assert moved.hash() == cfg.hash()
    other = config.from_dict({**cfg.model_dump(exclude_none=True), "seed": 4})
    assert other.hash() != cfg.hash()


def test_alpha_out_of_range_names_key():
    with pytest.raises(config.ConfigError) as exc:
        config.from_dict({"kind": "converge", "generator": {"alpha": 1.5}})
    keys = [k for k, _ in exc.value.errors]
    assert "generator.alpha" in keys
    assert any("alpha" in m for _, m in exc.value.errors)


def test_symbol_parameter_errors():
    with pytest.raises(config.ConfigError) as exc:
        config.from_dict({"kind": "symbol-table", "symbols": [{"kind": "generalized_stable", "alpha": 1.5,
                                                                "gam": 1.0}]})
    assert exc.value.errors[0][0].startswith("symbols.0")
    assert "alpha" in exc.value.errors[0][1]
    with pytest.raises(config.ConfigError, match="beta"):
        config.from_dict({"kind": "symbol-table", "symbols": [{"kind": "stable"}]})


def test_unknown_keys_and_kinds():
    with pytest.raises(config.ConfigError):
        config.from_dict({"kind": "symbol-table", "colour": "red"})
    with pytest.raises(config.ConfigError):
        config.from_dict({"kind": "nonsense"})
    with pytest.raises(config.ConfigError, match="symbols"):
        config.from_dict({"kind": "lifetime"})


def test_toml_errors(tmp_path):
    with pytest.raises(config.ConfigError, match="TOML"):
        config.loads("kind = ")
    p = tmp_path / "bin.toml"
    p.write_bytes(b"\xff\xfe\x00")
    with pytest.raises(config.ConfigError, match="UTF-8"):
        config.load(p)


def test_every_suite_validates_and_round_trips():
    for name in experiments.SUITES:
        cfg = experiments.suite_config(name)
        assert config.loads(config.dumps(cfg)).hash() == cfg.hash()
    with pytest.raises(KeyError):
        experiments.suite_config("nope")


def test_infinite_robin_constant_allowed():
    cfg = experiments.suite_config("local-time")
    assert cfg.grids.c[-1] == math.inf


@given(st.floats(0.01, 0.99), st.integers(0, 2 ** 40))
@settings(max_examples=40, deadline=None)
def test_hash_stable_under_round_trip(beta, seed):
    cfg = config.from_dict({"kind": "symbol-table", "seed": seed, "symbols": [{"kind": "stable", "beta": beta}]})
    again = config.loads(config.dumps(cfg))
    assert again.hash() == cfg.hash()
    assert float(again.symbols[0].build()(2.0)) == float(BernsteinSymbol.stable(beta)(2.0))

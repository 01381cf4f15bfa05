import pytest

from den.config import DEFAULTS, RunConfig
from den.errors import ConfigError


def test_defaults_and_parse():
    cfg = RunConfig.parse("# comment\nmodel.K_pod = 64\n\ntrain.epochs=3\n")
    assert cfg.get_int("model.K_pod") == 64 and cfg.get_int("train.epochs") == 3
    assert cfg["mesh.subdivisions"] == DEFAULTS["mesh.subdivisions"]
    assert cfg.get_list("experiment.sweep_k_squared", float) == [0.25, 1.0, 4.0, 10.0]
    assert cfg.get_range("field.real_range") == (1.0, 5.0)


def test_unknown_duplicate_and_bad_values():
    with pytest.raises(ConfigError):
        RunConfig.parse("model.width=3\n")
    with pytest.raises(ConfigError):
        RunConfig.parse("train.lr=0.1\ntrain.lr=0.2\n")
    with pytest.raises(ConfigError):
        RunConfig.parse("no equals sign\n")
    cfg = RunConfig.parse("train.epochs=many\n")
    with pytest.raises(ConfigError):
        cfg.get_int("train.epochs")


def test_dump_roundtrip_and_provenance():
    cfg = RunConfig.parse("model.channels=8\n")
    again = RunConfig.parse(cfg.dump())
    assert again.dump() == cfg.dump()
    prov = cfg.provenance()
    assert any(line.startswith("version.numpy=") for line in prov)
    assert "model.channels=8" in prov

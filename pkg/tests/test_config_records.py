from pathlib import Path

import pytest
import yaml

from sparselab import experiments as X
from sparselab import records as R
from sparselab.config import ExperimentConfig, from_dict, load_config
from sparselab.errors import ValidationError

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def base(**kw):
    return {"model": {"p": 0.8, "beta": 2}, "kronecker": {"enabled": False}, **kw}


class TestConfig:
    @pytest.mark.parametrize("name", ["quick.yaml", "transition.yaml", "kronecker.yaml"])
    def test_shipped_configs_load(self, name):
        assert isinstance(load_config(CONFIGS / name), ExperimentConfig)

    def test_roundtrip_through_dict(self):
        cfg = load_config(CONFIGS / "quick.yaml")
        assert from_dict(cfg.to_dict()) == cfg

    def test_seed_override(self):
        cfg = from_dict(base())
        assert cfg.with_seed(None) is cfg
        assert cfg.with_seed(99).seed == 99

    @pytest.mark.parametrize("raw, tag", [
        ({}, "cli.model"),
        (base(samples=0), "cli.samples"),
        (base(seed=-1), "model.seed"),
        (base(seed=2**64), "model.seed"),
        (base(truncation=1), "model.N"),
        (base(scale_exponents=[-4, -6]), "spectra.scales"),
        (base(energies=["nonsense"]), "transfer"),
        (base(bogus=1), "cli.config"),
        (base(theta={"theta_min": 0.0}), "cli.theta_min"),
        ({"model": {"p": 0.5, "beta": 2}, "kronecker": {"J": 4, "a": 3.9}}, "theory."),
        (base(kronecker={"enabled": False, "streams": [1, 1]}), "model.seed2"),
    ])
    def test_validation_names_parameter(self, raw, tag):
        with pytest.raises(ValidationError, match=tag.replace(".", r"\.")):
            from_dict(raw)

    def test_bad_yaml(self, tmp_path):
        p = tmp_path / "bad.yaml"
        p.write_text("model: [unclosed\n")
        with pytest.raises(ValidationError, match="cli.config"):
            load_config(p)
        with pytest.raises(ValidationError, match="cli.config"):
            load_config(tmp_path / "missing.yaml")


@pytest.fixture(scope="module")
def record():
    cfg = from_dict(base(phase_lambdas=5, phase_ratios=3))
    rec, _ = X.run_stages(cfg, ["phase_diagram", "params"])
    return rec


class TestRecords:
    def test_jsonl_roundtrip(self, record, tmp_path):
        R.emit(record, tmp_path)
        (back,) = R.parse_jsonl(tmp_path / "record.jsonl")
        assert back == record
        assert R.payload_bytes(back) == R.payload_bytes(record)

    def test_csv_roundtrip(self, record, tmp_path):
        R.emit(record, tmp_path)
        rows = R.read_csv(tmp_path / "phase_diagram.csv")
        assert rows == record.tables["phase_diagram"]

    def test_float_repr_exact(self, tmp_path):
        x = 0.1 + 0.2
        R.write_csv(tmp_path / "t.csv", [{"a": x, "b": None, "c": True}])
        (row,) = R.read_csv(tmp_path / "t.csv")
        assert row == {"a": x, "b": None, "c": True}

    def test_empty_table_has_header(self, tmp_path):
        R.write_csv(tmp_path / "e.csv", [], R.TABLE_COLUMNS["spectrum"])
        assert (tmp_path / "e.csv").read_text() == "atom,weight\n"

    def test_schema_checked(self):
        with pytest.raises(R.PersistenceError, match="schema"):
            R.loads('{"schema": "other/9"}')

    def test_meta_excluded_from_payload(self, record):
        assert "meta" not in record.numeric_payload()

    def test_unwritable_output(self, record, tmp_path):
        blocker = tmp_path / "file"
        blocker.write_text("x")
        with pytest.raises(R.PersistenceError):
            R.emit(record, blocker / "sub")

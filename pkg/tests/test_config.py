import json

import pytest

from shift.config import DEFAULTS, load_config
from shift.errors import InvalidField


class TestConfig:
    def test_defaults(self, monkeypatch):
        monkeypatch.delenv("SHIFT_CONFIG", raising=False)
        assert load_config() == DEFAULTS
        assert load_config() is not DEFAULTS

    def test_file_merges_deeply(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"optimizer": {"budget": 16}}))
        cfg = load_config(path)
        assert cfg["optimizer"] == {"force_mode": "auto", "budget": 16, "chunk_size": None}

    def test_env_and_overrides(self, tmp_path, monkeypatch):
        path = tmp_path / "c.json"
        path.write_text(json.dumps({"catalog": {"path": "a"}}))
        monkeypatch.setenv("SHIFT_CONFIG", str(path))
        assert load_config()["catalog"]["path"] == "a"
        assert load_config(overrides={"catalog": {"path": "b"}})["catalog"]["path"] == "b"

    @pytest.mark.parametrize("body", [
        {"optimzer": {}},
        {"optimizer": 3},
        {"optimizer": {"force_mode": "fast"}},
        {"query": {"tie_mode": "coin"}},
        {"devices": {"proxy_placement": "gpu"}},
    ])
    def test_rejects(self, tmp_path, body):
        path = tmp_path / "c.json"
        path.write_text(json.dumps(body))
        with pytest.raises(InvalidField):
            load_config(path)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "c.json"
        path.write_text("{")
        with pytest.raises(InvalidField):
            load_config(path)

import json

import pytest

from blocksketch.common.cache import FileCache, run_key
from blocksketch.common.config import Config
from blocksketch.common.formatting import format_csv, format_json, format_number, format_pct, format_value
from blocksketch.common.pool import map_ordered


class TestRunKey:
    def test_same_config_same_key(self):
        assert run_key({"design": "a", "seed": 7}) == run_key({"seed": 7, "design": "a"})

    def test_seed_changes_key(self):
        assert run_key({"design": "a", "seed": 7}) != run_key({"design": "a", "seed": 8})


class TestFileCache:
    def test_set_then_get(self):
        cache = FileCache("runs")
        cache.set("abc", {"main": "x,y\n"})
        assert cache.get("abc") == {"main": "x,y\n"}

    def test_missing_key(self):
        assert FileCache("runs").get("nope") is None

    def test_other_spec_version_is_a_miss(self):
        cache = FileCache("runs")
        cache.set("abc", [1, 2])
        path = cache.cache_dir / "abc.json"
        data = json.loads(path.read_text())
        data["spec_version"] = "0.1"
        path.write_text(json.dumps(data))
        assert cache.get("abc") is None

    def test_unreadable_entry_is_a_miss(self):
        cache = FileCache("runs")
        (cache.cache_dir / "bad.json").write_text("{not json")
        assert cache.get("bad") is None

    def test_clear(self):
        cache = FileCache("runs")
        cache.set("a", 1)
        cache.set("b", 2)
        assert cache.clear("a") == 1
        assert cache.clear() == 1
        assert cache.get("b") is None


class TestFormatting:
    def test_floats_use_repr(self):
        assert format_value(0.1 + 0.2) == "0.30000000000000004"

    def test_bools_none_and_lists(self):
        assert format_value(True) == "true"
        assert format_value(None) == ""
        assert format_value(["clipped_1", "variance_invalid"]) == "clipped_1;variance_invalid"

    def test_csv_with_comment(self):
        text = format_csv([{"a": 1, "b": 2.5}], ["a", "b"], comment="alpha=2.0")
        assert text == "# alpha=2.0\na,b\n1,2.5\n"

    def test_json_sorted_and_finite(self):
        payload = json.loads(format_json({"b": float("nan"), "a": 1.0}))
        assert list(payload) == ["a", "b"]
        assert payload["b"] is None

    def test_number_and_pct(self):
        assert format_number(None) == "N/A"
        assert format_number(16.4567, 2) == "16.46"
        assert format_pct(0.95) == "95.0%"


class TestConfig:
    def test_threads_from_env(self, monkeypatch):
        monkeypatch.setenv("BLOCKSKETCH_THREADS", "3")
        assert Config.threads() == 3

    def test_invalid_threads_fall_back_to_one(self, monkeypatch):
        monkeypatch.setenv("BLOCKSKETCH_THREADS", "many")
        assert Config.threads() == 1

    def test_reload_paths(self, monkeypatch, tmp_path):
        monkeypatch.setenv("BLOCKSKETCH_DATA_DIR", str(tmp_path / "elsewhere"))
        Config.reload_paths()
        assert Config.cache_dir == tmp_path / "elsewhere" / "cache"


class TestPool:
    @pytest.mark.parametrize("workers", [1, 4])
    def test_results_in_item_order(self, workers):
        assert map_ordered(lambda x: x * x, list(range(20)), workers) == [x * x for x in range(20)]

"""INI configuration parsing."""
from __future__ import annotations

import json
import os

import pytest

from impliance.config import ApplianceConfig, load_config, parse_config
from impliance.errors import InvalidConfig
from impliance.model import StorageClassKind


class TestDefaults:
    def test_empty_text_gives_defaults(self):
        config = parse_config("")
        defaults = ApplianceConfig()
        assert config.cluster == defaults.cluster
        assert config.cost == defaults.cost
        assert config.replication[StorageClassKind.USER_BASE] == 2
        assert config.annotator_file is None

    def test_full_file(self, tmp_path):
        annotators = tmp_path / "ann.json"
        annotators.write_text(json.dumps([{"name": "people"}]))
        text = (
            "[cluster]\n"
            "data_nodes = 6\n"
            "grid_nodes = 3\n"
            "partitions = 16\n"
            "data_capacity = 20.5\n"
            "[replication]\n"
            "user_base = 3\n"
            "[cost_model]\n"
            "alpha = 2.0\n"
            "[scheduler]\n"
            "aging_threshold = 99\n"
            "[annotators]\n"
            "file = ann.json\n"
            "[appliance]\n"
            "origin = 4\n"
            "max_connection_hops = 3\n"
        )
        config = parse_config(text, base_dir=str(tmp_path))
        assert config.cluster.data_nodes == 6
        assert config.cluster.grid_nodes == 3
        assert config.cluster.partitions == 16
        assert config.cluster.data_capacity == 20.5
        assert config.cluster.aging_threshold == 99
        assert config.cost.alpha == 2.0
        assert config.replication[StorageClassKind.USER_BASE] == 3
        assert config.annotator_file == os.path.join(str(tmp_path), "ann.json")
        assert config.origin == 4
        assert config.max_connection_hops == 3


class TestErrors:
    def test_unknown_section_named(self):
        with pytest.raises(InvalidConfig, match=r"\[turbo\]"):
            parse_config("[turbo]\nspeed = 9\n")

    def test_unknown_field_named(self):
        with pytest.raises(InvalidConfig, match="warp"):
            parse_config("[cluster]\nwarp = 1\n")

    def test_non_integer_rejected(self):
        with pytest.raises(InvalidConfig, match="data_nodes"):
            parse_config("[cluster]\ndata_nodes = many\n")

    def test_non_number_rejected(self):
        with pytest.raises(InvalidConfig, match="alpha"):
            parse_config("[cost_model]\nalpha = fast\n")

    def test_syntax_error(self):
        with pytest.raises(InvalidConfig, match="syntax"):
            parse_config("not an ini file")

    def test_user_base_floor(self):
        with pytest.raises(InvalidConfig, match="user_base"):
            parse_config("[replication]\nuser_base = 1\n")

    def test_missing_annotator_file(self):
        with pytest.raises(InvalidConfig, match="does not exist"):
            parse_config("[annotators]\nfile = ghost.json\n", base_dir="/nonexistent")

    def test_invalid_cluster_values_propagate(self):
        with pytest.raises(InvalidConfig):
            parse_config("[cluster]\ndata_nodes = 0\n")


class TestLoad:
    def test_load_resolves_relative_paths(self, tmp_path):
        (tmp_path / "ann.json").write_text("[]")
        conf = tmp_path / "box.ini"
        conf.write_text("[annotators]\nfile = ann.json\n")
        config = load_config(str(conf))
        assert config.annotator_file == str(tmp_path / "ann.json")

    def test_load_missing_file(self):
        with pytest.raises(InvalidConfig, match="does not exist"):
            load_config("/nonexistent/box.ini")

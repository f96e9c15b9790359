from __future__ import annotations

import pytest

from eftchat.config import AppConfig, ConfigError, load_config


class TestLoadConfig:
    def test_defaults(self):
        config = load_config(env={})
        assert config.host == "127.0.0.1"
        assert config.provider == "echo"
        assert config.moderation_mode == "local"

    def test_toml_file(self, tmp_path):
        path = tmp_path / "app.toml"
        path.write_text(
            'host = "0.0.0.0"\nport = 9001\nprovider = "scripted"\n'
            'provider_script = "replies.json"\nstore_root = "/srv/sessions"\n',
            "utf-8",
        )
        config = load_config(path, env={})
        assert (config.host, config.port) == ("0.0.0.0", 9001)
        assert config.provider == "scripted"
        assert config.store_root == "/srv/sessions"

    def test_env_overrides_file(self, tmp_path):
        path = tmp_path / "app.toml"
        path.write_text('port = 9001\nstore_root = "/from-file"\n', "utf-8")
        config = load_config(
            path, env={"EFTCHAT_PORT": "9002", "EFTCHAT_STORE_ROOT": "/from-env"}
        )
        assert config.port == 9002
        assert config.store_root == "/from-env"

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "app.toml"
        path.write_text("mystery = 1\n", "utf-8")
        with pytest.raises(ConfigError):
            load_config(path, env={})

    def test_invalid_toml_rejected(self, tmp_path):
        path = tmp_path / "app.toml"
        path.write_text("not toml ][", "utf-8")
        with pytest.raises(ConfigError):
            load_config(path, env={})

    def test_missing_file_rejected(self, tmp_path):
        with pytest.raises(ConfigError):
            load_config(tmp_path / "ghost.toml", env={})

    def test_scripted_requires_script(self):
        with pytest.raises(ConfigError):
            load_config(env={"EFTCHAT_PROVIDER": "scripted"})

    def test_remote_requires_endpoint(self):
        with pytest.raises(ConfigError):
            AppConfig(provider="remote").validate()

    def test_remote_moderation_requires_endpoint(self):
        with pytest.raises(ConfigError):
            AppConfig(moderation_mode="remote").validate()

    def test_bad_port(self):
        with pytest.raises(ConfigError):
            load_config(env={"EFTCHAT_PORT": "seventy"})
        with pytest.raises(ConfigError):
            AppConfig(port=0).validate()

import pytest

from thumbqc.core.config import LogLevel, Settings, create_settings, get_settings
from thumbqc.core.errors import ConfigurationError, EmptyInputError, ThumbQCError, WeightSchemaError


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("SEED", "LOG_LEVEL", "THREADS", "NORM_MEAN", "NORM_STD", "BENCH_WARMUP", "BENCH_ITERATIONS"):
        monkeypatch.delenv(f"THUMBQC_{name}", raising=False)
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


class TestSettings:
    def test_defaults(self):
        settings = Settings(_env_file=None)
        assert settings.seed is None
        assert settings.log_level is LogLevel.INFO
        assert settings.norm_std == (0.5, 0.5, 0.5)
        assert settings.resolve_seed(7) == 7

    def test_environment_overrides(self, monkeypatch):
        monkeypatch.setenv("THUMBQC_SEED", "42")
        monkeypatch.setenv("THUMBQC_LOG_LEVEL", "DEBUG")
        monkeypatch.setenv("THUMBQC_NORM_MEAN", "[0.485, 0.456, 0.406]")
        settings = Settings(_env_file=None)
        assert settings.resolve_seed(7) == 42
        assert settings.log_level is LogLevel.DEBUG
        assert settings.norm_mean == (0.485, 0.456, 0.406)

    def test_zero_std_is_rejected(self, monkeypatch):
        monkeypatch.setenv("THUMBQC_NORM_STD", "[0.5, 0.0, 0.5]")
        with pytest.raises(ValueError):
            Settings(_env_file=None)

    def test_invalid_environment_exits_2(self, monkeypatch, capsys):
        monkeypatch.setenv("THUMBQC_THREADS", "0")
        with pytest.raises(SystemExit) as exc:
            create_settings()
        assert exc.value.code == 2
        assert "Configuration Validation Error" in capsys.readouterr().err

    def test_settings_are_cached(self):
        assert get_settings() is get_settings()


class TestErrors:
    def test_detail_shape(self):
        error = ConfigurationError("bad config", action="Fix it", fields={"epochs": "too small"})
        assert error.detail == {
            "error": "invalid_config",
            "message": "bad config",
            "action": "Fix it",
            "fields": {"epochs": "too small"},
        }
        assert error.exit_code == 2 and isinstance(error, ValueError)

    def test_exit_codes(self):
        assert EmptyInputError("none").exit_code == 3
        assert ThumbQCError("x").exit_code == 1

    def test_schema_error_names_tensor(self):
        error = WeightSchemaError("mismatch", tensor="blocks.0.attn.qkv.weight")
        assert error.tensor == "blocks.0.attn.qkv.weight"
        assert error.detail["tensor"] == "blocks.0.attn.qkv.weight"
        assert "action" in error.detail

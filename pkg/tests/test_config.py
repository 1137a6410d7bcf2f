import pytest

from r2assist.config import (
    KEYLESS_PROVIDERS,
    PROVIDERS,
    SETTING_SPECS,
    SUGGESTED_MODELS,
    ModelRef,
    SettingsRegistry,
    api_key_env_var,
    resolve_api_key,
)
from r2assist.errors import (
    AmbiguousModelError,
    ParseFailureError,
    UnknownKeyError,
    UnknownProviderError,
)


class TestModelRef:
    def test_roundtrip(self):
        ref = ModelRef("anthropic", "claude-3-7-sonnet-20250219")
        assert str(ref) == "anthropic:claude-3-7-sonnet-20250219"
        assert ModelRef.parse(str(ref)) == ref

    def test_unknown_provider(self):
        with pytest.raises(UnknownProviderError):
            ModelRef("foo", "bar")

    def test_empty_name(self):
        with pytest.raises(ValueError):
            ModelRef("anthropic", "")


class TestSettings:
    def test_defaults_match_direct_request_fields(self, registry):
        s = registry.snapshot()
        assert s.temperature == 0.002
        assert s.top_p == 0.95
        assert s.max_tokens == 4096

    def test_every_key_has_documented_default(self):
        for key, spec in SETTING_SPECS.items():
            assert spec.description, key
            assert spec.default is not None, key

    def test_set_max_runs(self, registry):
        registry.set("auto.max_runs", "100")
        assert registry.get("auto.max_runs") == 100

    def test_set_temperature(self, registry):
        registry.set("temperature", "0.002")
        assert registry.get("temperature") == 0.002

    def test_max_runs_zero_rejected(self, registry):
        with pytest.raises(ParseFailureError) as exc:
            registry.set("auto.max_runs", "0")
        assert "positive integer" in str(exc.value)

    def test_unknown_key_lists_valid_keys(self, registry):
        with pytest.raises(UnknownKeyError) as exc:
            registry.set("nonsense", "1")
        for key in SETTING_SPECS:
            assert key in str(exc.value)

    def test_parse_failure_reports_expected_type(self, registry):
        with pytest.raises(ParseFailureError) as exc:
            registry.set("temperature", "hot")
        assert "real in [0,1]" in str(exc.value)

    @pytest.mark.parametrize("key,raw,typed", [
        ("api", "mistral", "mistral"),
        ("model", "gpt-4", "gpt-4"),
        ("temperature", "0.5", 0.5),
        ("top_p", "1", 1.0),
        ("max_tokens", "8192", 8192),
        ("auto.max_runs", "15", 15),
        ("auto.init_commands", "aaa;afl~main", "aaa;afl~main"),
        ("auto.resend_init", "false", False),
        ("system_prompt", "be terse", "be terse"),
        ("output_language", "rust", "rust"),
        ("concise", "true", True),
    ])
    def test_set_get_roundtrip(self, registry, key, raw, typed):
        registry.set(key, raw)
        assert registry.get(key) == typed

    def test_config_file_preseed(self, tmp_path):
        cfg = tmp_path / "r2assist.conf"
        cfg.write_text("# comment\nauto.max_runs = 15\nconcise = true\n")
        reg = SettingsRegistry(config_file=str(cfg))
        assert reg.get("auto.max_runs") == 15
        assert reg.get("concise") is True

    def test_snapshot_is_isolated(self, registry):
        snap = registry.snapshot()
        registry.set("max_tokens", "1234")
        assert snap.max_tokens == 4096
        assert registry.snapshot().max_tokens == 1234


class TestSelectModel:
    def test_full_spec(self, registry):
        ref = registry.select_model("anthropic:claude-3-7-sonnet-20250219")
        assert ref == ModelRef("anthropic", "claude-3-7-sonnet-20250219")
        assert registry.get("api") == "anthropic"
        assert registry.get("model") == "claude-3-7-sonnet-20250219"

    def test_mistral(self, registry):
        ref = registry.select_model("mistral:mistral-large-latest")
        assert ref == ModelRef("mistral", "mistral-large-latest")

    def test_unknown_provider(self, registry):
        with pytest.raises(UnknownProviderError):
            registry.select_model("foo:bar")

    def test_bare_name_resolved(self, registry):
        ref = registry.select_model("mistral-large-latest")
        assert ref == ModelRef("mistral", "mistral-large-latest")

    def test_bare_name_unknown(self, registry):
        with pytest.raises(UnknownProviderError):
            registry.select_model("no-such-model")

    def test_bare_name_ambiguous(self, registry, monkeypatch):
        monkeypatch.setitem(SUGGESTED_MODELS, "openai",
                            SUGGESTED_MODELS["openai"] + ["mistral-large-latest"])
        with pytest.raises(AmbiguousModelError):
            registry.select_model("mistral-large-latest")

    def test_select_does_not_touch_other_settings(self, registry):
        registry.set("temperature", "0.7")
        registry.select_model("openai:gpt-4")
        assert registry.get("temperature") == 0.7


class TestApiKeys:
    def test_anthropic_from_env(self, monkeypatch):
        monkeypatch.setenv("ANTHROPIC_API_KEY", "sk-test-123")
        assert resolve_api_key("anthropic") == "sk-test-123"

    def test_ollama_keyless(self, monkeypatch):
        monkeypatch.delenv("OLLAMA_API_KEY", raising=False)
        assert resolve_api_key("ollama") is None

    def test_missing_key_is_not_an_error_at_resolution(self, monkeypatch):
        monkeypatch.delenv("OPENAI_API_KEY", raising=False)
        assert resolve_api_key("openai") is None

    def test_unknown_provider(self):
        with pytest.raises(UnknownProviderError):
            resolve_api_key("foo")

    def test_env_var_names(self):
        assert api_key_env_var("anthropic") == "ANTHROPIC_API_KEY"
        assert api_key_env_var("xai") == "XAI_API_KEY"

    def test_secret_never_in_describe(self, registry, monkeypatch):
        secret = "sk-very-secret-value"
        monkeypatch.setenv("ANTHROPIC_API_KEY", secret)
        assert secret not in registry.describe()

    def test_keyless_set_covers_only_local_providers(self):
        assert KEYLESS_PROVIDERS <= set(PROVIDERS)

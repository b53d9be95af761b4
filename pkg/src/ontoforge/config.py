"""Pipeline configuration: one YAML file drives every subcommand.

Unknown keys are rejected so a typo cannot silently fall back to a default.
The provider credential is named by environment variable only; it is never
stored in the config or in run records.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import yaml

from .corpus import TopConcept
from .gateway import Hyperparams, LlmGateway, MockProvider, MockRule
from .markup import MarkerMap


class ConfigError(Exception):
    pass


@dataclass
class MockSettings:
    script: str | None = None          # YAML file with rules/default_reply
    rules: list[dict] = field(default_factory=list)
    default_reply: str = "None"
    fail_times: int = 0
    embed_dim: int = 16
    poll_transitions: int = 3


@dataclass
class ProviderSettings:
    kind: str = "mock"                 # "mock" or "http"
    base_url: str = ""
    credential_env: str = "ONTOFORGE_API_KEY"
    chat_model: str = "gpt-4.1-mini-2025-04-14"
    embed_model: str = "mock-embed"
    mock: MockSettings = field(default_factory=MockSettings)


@dataclass
class GatewaySettings:
    cache_dir: str | None = None
    audit_file: str | None = None
    max_attempts: int = 5
    backoff_base: float = 1.0
    max_concurrency: int = 4


@dataclass
class StrategySettings:
    k: int = 16
    temperature: float = 0.0
    max_drift: float = 0.25
    max_output_tokens: int = 2048
    prompt_profile: str = "cot"
    model_id: str | None = None
    terms_from: str = "gold"


@dataclass
class FinetuneSettings:
    # Defaults tuned for small (<200 sample) training sets.
    terms: dict = field(default_factory=lambda: {"epochs": 3, "batch_size": 1, "lr_multiplier": 2.0})
    relations: dict = field(default_factory=lambda: {"epochs": 3, "batch_size": 1, "lr_multiplier": 1.0})

    def hyperparams(self, task: str) -> Hyperparams:
        raw = self.terms if task == "terms" else self.relations
        return Hyperparams(**raw)


@dataclass
class DistillSettings:
    max_chars: int = 2000
    top_m: int = 8
    n_pairs: int = 5
    queries: dict = field(default_factory=dict)   # topic label -> query text


@dataclass
class PipelineConfig:
    provider: ProviderSettings = field(default_factory=ProviderSettings)
    gateway: GatewaySettings = field(default_factory=GatewaySettings)
    strategy: StrategySettings = field(default_factory=StrategySettings)
    finetune: FinetuneSettings = field(default_factory=FinetuneSettings)
    distill: DistillSettings = field(default_factory=DistillSettings)
    markers: dict | None = None        # {"open": "@@", "close": {label: marker}}
    fixed_clock: bool = False

    def marker_map(self) -> MarkerMap:
        if not self.markers:
            return MarkerMap()
        open_marker = self.markers.get("open", "@@")
        close = dict(MarkerMap().to_labels())
        close.update(self.markers.get("close", {}))
        return MarkerMap.from_labels(open_marker, close)

    def clock(self):
        if self.fixed_clock:
            return lambda: "1970-01-01T00:00:00Z"
        import time

        return lambda: time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())

    def topic_queries(self) -> dict[TopConcept, str]:
        from .distill import DEFAULT_TOPIC_QUERIES

        out = dict(DEFAULT_TOPIC_QUERIES)
        for label, query in self.distill.queries.items():
            out[TopConcept.from_label(label)] = query
        return out

    def to_dict(self) -> dict:
        return asdict(self)


def _build(cls, raw: dict, path: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping, got {type(raw).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(raw) - set(known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in raw.items():
        nested = _NESTED.get((cls, name))
        kwargs[name] = _build(nested, value, f"{path}.{name}") if nested else value
    return cls(**kwargs)


_NESTED = {
    (PipelineConfig, "provider"): ProviderSettings,
    (PipelineConfig, "gateway"): GatewaySettings,
    (PipelineConfig, "strategy"): StrategySettings,
    (PipelineConfig, "finetune"): FinetuneSettings,
    (PipelineConfig, "distill"): DistillSettings,
    (ProviderSettings, "mock"): MockSettings,
}


def load_config(path: str | Path | None) -> PipelineConfig:
    if path is None:
        return PipelineConfig()
    raw = yaml.safe_load(Path(path).read_text(encoding="utf-8")) or {}
    return _build(PipelineConfig, raw, "config")


def _mock_rules(settings: MockSettings, config_dir: Path) -> tuple[list[MockRule], dict]:
    rules_raw = list(settings.rules)
    extra: dict = {}
    if settings.script:
        script_path = Path(settings.script)
        if not script_path.is_absolute():
            script_path = config_dir / script_path
        script = yaml.safe_load(script_path.read_text(encoding="utf-8")) or {}
        rules_raw.extend(script.get("rules", []))
        extra = {k: v for k, v in script.items() if k != "rules"}
    rules = []
    for raw in rules_raw:
        rules.append(
            MockRule(
                reply=raw["reply"],
                suffix=raw.get("suffix"),
                contains=raw.get("contains"),
                regex=raw.get("regex"),
            )
        )
    return rules, extra


def build_gateway(config: PipelineConfig, config_dir: str | Path = ".") -> LlmGateway:
    provider_cfg = config.provider
    if provider_cfg.kind == "mock":
        rules, extra = _mock_rules(provider_cfg.mock, Path(config_dir))
        provider = MockProvider(
            rules=rules,
            default_reply=extra.get("default_reply", provider_cfg.mock.default_reply),
            fail_times=extra.get("fail_times", provider_cfg.mock.fail_times),
            embed_dim=extra.get("embed_dim", provider_cfg.mock.embed_dim),
            poll_transitions=extra.get("poll_transitions", provider_cfg.mock.poll_transitions),
        )
    elif provider_cfg.kind == "http":
        from .gateway import HttpProvider

        if not provider_cfg.base_url:
            raise ConfigError("provider.base_url is required for the http provider")
        provider = HttpProvider(provider_cfg.base_url, provider_cfg.credential_env)
    else:
        raise ConfigError(f"unknown provider kind {provider_cfg.kind!r}")
    return LlmGateway(
        provider,
        chat_model=provider_cfg.chat_model,
        embed_model=provider_cfg.embed_model,
        cache_dir=config.gateway.cache_dir,
        audit_path=config.gateway.audit_file,
        max_attempts=config.gateway.max_attempts,
        backoff_base=config.gateway.backoff_base,
        max_concurrency=config.gateway.max_concurrency,
        clock=config.clock(),
    )

"""Engine configuration: TOML file plus environment, and gateway assembly."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from . import gateway as gw

LLM_MODES = ("live", "replay", "stub")


@dataclass
class EngineConfig:
    llm_mode: str = "stub"
    transcripts_path: str | None = None
    stub_responses: dict = field(default_factory=dict)
    model_ids: dict = field(default_factory=dict)
    context_budget: int = gw.DEFAULT_CONTEXT_BUDGET
    retry_enabled: bool = False
    kernel_timeout_s: float = 30.0
    kernel_memory_cap_mb: int | None = None
    kernel_env_allowlist: tuple = ()
    idle_timeout_s: float = 1800.0
    llm_base_url: str | None = None
    llm_api_key: str | None = None
    llm_min_interval_s: float = 0.0

    def __post_init__(self):
        if self.llm_mode not in LLM_MODES:
            raise ValueError(f"llm_mode must be one of {LLM_MODES}, got {self.llm_mode!r}")


def load_config(path: str | Path) -> EngineConfig:
    """Read an engine.toml-style config file."""
    path = Path(path)
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    llm = data.get("llm", {})
    kernel = data.get("kernel", {})
    server = data.get("server", {})
    transcripts = llm.get("transcripts")
    if transcripts is not None:
        # Relative paths resolve against the config file, not the cwd.
        transcripts = str((path.parent / transcripts).resolve())
    return EngineConfig(
        llm_mode=llm.get("mode", "stub"),
        transcripts_path=transcripts,
        stub_responses=llm.get("stub_responses", {}),
        model_ids=llm.get("models", {}),
        context_budget=llm.get("context_budget", gw.DEFAULT_CONTEXT_BUDGET),
        retry_enabled=llm.get("retry", False),
        kernel_timeout_s=kernel.get("timeout_s", 30.0),
        kernel_memory_cap_mb=kernel.get("memory_cap_mb"),
        kernel_env_allowlist=tuple(kernel.get("env_allowlist", ())),
        idle_timeout_s=server.get("idle_timeout_s", 1800.0),
        llm_base_url=llm.get("base_url"),
        llm_api_key=llm.get("api_key"),
        llm_min_interval_s=llm.get("min_interval_s", 0.0),
    )


def agent_configs(config: EngineConfig) -> dict[str, gw.AgentConfig]:
    configs = gw.default_agent_configs()
    for agent_id, model_id in config.model_ids.items():
        if agent_id not in configs:
            raise ValueError(f"unknown agent id in model config: {agent_id!r}")
        configs[agent_id] = replace(configs[agent_id], model_id=model_id)
    return configs


def build_gateway(config: EngineConfig,
                  replay_store: gw.TranscriptStore | None = None,
                  record_to: gw.TranscriptStore | None = None,
                  live_transport=None) -> gw.LlmGateway:
    """Construct a gateway for the configured llm mode.

    Stub response lists are copied so every gateway pops its own queue.
    """
    if config.llm_mode == "replay":
        if replay_store is None:
            if not config.transcripts_path:
                raise ValueError("replay mode needs a transcripts path")
            replay_store = gw.TranscriptStore.import_file(config.transcripts_path)
        backend = gw.ReplayBackend(replay_store)
    elif config.llm_mode == "stub":
        backend = gw.StubBackend(
            {k: (list(v) if isinstance(v, list) else v)
             for k, v in config.stub_responses.items()})
    else:
        backend = gw.LiveBackend(base_url=config.llm_base_url,
                                 api_key=config.llm_api_key,
                                 transport=live_transport,
                                 min_interval_s=config.llm_min_interval_s)
    return gw.LlmGateway(backend, configs=agent_configs(config),
                         context_budget=config.context_budget,
                         record_to=record_to)

"""Run configuration: defaults, file loading, flag overrides and digests.

Every command resolves a full RunConfig before doing any work; the resolved
form is hashed and the digest is embedded in every artifact the run writes,
so outputs are self-describing and reruns are diffable.

Endpoint descriptors may come from the config file, flags, or environment
variables VARMATCH_SCORING_ENDPOINT / VARMATCH_GENERATIVE_ENDPOINT.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .errors import ConfigError

SCORING_ENDPOINT_VAR = "VARMATCH_SCORING_ENDPOINT"
GENERATIVE_ENDPOINT_VAR = "VARMATCH_GENERATIVE_ENDPOINT"

BACKENDS = ("baseline", "oracle", "remote", "generative")
SAMPLERS = ("informed", "random")


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    ratio: float = 0.7
    budget: int = 512
    mix_hard: float = 1 / 3
    mix_medium: float = 1 / 3
    mix_easy: float = 1 / 3
    sampler: str = "informed"
    negatives: int | None = None  # None: one negative per positive
    backend: str = "baseline"
    threshold: float = 0.5
    workers: int = 8
    scoring_endpoint: str | None = None
    generative_endpoint: str | None = None
    timeout: float = 30.0
    max_attempts: int = 3
    # generation parameters for the two prompt tasks
    match_max_tokens: int = 30
    match_temperature: float = 0.0
    match_top_k: int = 100
    attr_max_tokens: int = 500
    attr_temperature: float = 0.0
    attr_top_p: float = 0.9

    def validate(self) -> None:
        problems = []
        if not 0.0 < self.ratio < 1.0:
            problems.append(f"ratio: must lie in (0, 1), got {self.ratio}")
        if self.budget < 8:
            problems.append(f"budget: must be >= 8, got {self.budget}")
        mix = (self.mix_hard, self.mix_medium, self.mix_easy)
        if any(v < 0 for v in mix) or abs(sum(mix) - 1.0) > 1e-9:
            problems.append(f"mix: fractions must be >= 0 and sum to 1, got {mix}")
        if self.sampler not in SAMPLERS:
            problems.append(f"sampler: must be one of {SAMPLERS}, got {self.sampler!r}")
        if self.negatives is not None and self.negatives < 0:
            problems.append(f"negatives: must be >= 0, got {self.negatives}")
        if self.backend not in BACKENDS:
            problems.append(f"backend: must be one of {BACKENDS}, got {self.backend!r}")
        if not 0.0 <= self.threshold <= 1.0:
            problems.append(f"threshold: must lie in [0, 1], got {self.threshold}")
        if self.workers < 1:
            problems.append(f"workers: must be >= 1, got {self.workers}")
        if self.max_attempts < 1:
            problems.append(f"max_attempts: must be >= 1, got {self.max_attempts}")
        if problems:
            raise ConfigError(problems)

    def digest(self) -> str:
        canonical = json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]

    def artifact_meta(self) -> dict:
        """Self-description block embedded in every artifact this run writes."""
        from . import __version__

        return {
            "config_digest": self.digest(),
            "tool_version": __version__,
            "config": asdict(self),
        }


def load_config(
    path: str | Path | None = None, overrides: dict | None = None
) -> RunConfig:
    """Defaults <- config file <- env endpoints <- explicit flag overrides."""
    values: dict = {}
    if path is not None:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(raw, dict):
            raise ConfigError(["config file: must contain a JSON object"])
        known = {f.name for f in fields(RunConfig)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError([f"config file: unknown keys {unknown}"])
        values.update(raw)
    config = RunConfig(**values)
    env_updates = {}
    if config.scoring_endpoint is None and os.environ.get(SCORING_ENDPOINT_VAR):
        env_updates["scoring_endpoint"] = os.environ[SCORING_ENDPOINT_VAR]
    if config.generative_endpoint is None and os.environ.get(GENERATIVE_ENDPOINT_VAR):
        env_updates["generative_endpoint"] = os.environ[GENERATIVE_ENDPOINT_VAR]
    if env_updates:
        config = replace(config, **env_updates)
    if overrides:
        config = replace(config, **{k: v for k, v in overrides.items() if v is not None})
    config.validate()
    return config

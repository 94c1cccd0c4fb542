"""Run configuration: every tunable with its default.

A config round-trips losslessly through ``to_dict`` / ``from_dict`` and
the flat JSON file format used by the CLI.  Unknown keys are a hard
error so typos cannot silently fall back to defaults.
"""

import json
from dataclasses import asdict, dataclass, fields

from .errors import ConfigError


@dataclass
class RunConfig:
    mesh: float = 0.01
    knots_m: int = 6
    h: float = 0.1
    a_lambda: float = 6.0
    b_lambda: float = 4.0
    a_kappa: float = 1.5
    b_kappa: float = 1.5
    rho_hi: float = 0.99
    rho_lo: float = 0.05
    nugget: float = 1e-10
    base_family: str = "t"
    iters: int = 10000
    burnin: float = 0.1
    thin: int = 0              # 0 = derive from target_draws
    target_draws: int = 200
    seed: int = 0
    chains: int = 1
    level: float = 0.95
    init_sigma_scale: float = 1.0
    freeze_adapt_after_burnin: bool = False

    def __post_init__(self):
        if not 0.0 < self.mesh < 0.5:
            raise ConfigError(f"mesh must be in (0, 0.5), got {self.mesh}")
        if self.base_family not in ("t", "gaussian"):
            raise ConfigError(f"base_family must be 't' or 'gaussian', "
                              f"got {self.base_family!r}")
        if not 0.0 <= self.burnin < 1.0:
            raise ConfigError(f"burnin fraction must be in [0, 1), got {self.burnin}")
        if self.iters < 1:
            raise ConfigError("iters must be positive")
        if not 0.0 <= self.level <= 1.0:
            raise ConfigError(f"credible level must be in [0, 1], got {self.level}")
        if self.knots_m < 2:
            raise ConfigError("knots_m must be at least 2")

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, mapping):
        known = {f.name for f in fields(cls)}
        unknown = set(mapping) - known
        if unknown:
            raise ConfigError("unknown config keys: " + ", ".join(sorted(unknown)))
        return cls(**mapping)

    def replace(self, **kwargs):
        d = self.to_dict()
        d.update(kwargs)
        return RunConfig.from_dict(d)

    def dumps(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text):
        try:
            payload = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(payload, dict):
            raise ConfigError("config must be a flat JSON object")
        return cls.from_dict(payload)


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return RunConfig.loads(fh.read())

"""Experiment configuration: key = value files overridden by command-line flags."""

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields

from ..synthsps.registry import ACRONYMS

SINGLE_MODES = ("regression", "crossmodal")
MULTI_MODES = ("multi-late", "multi-viewpool", "multi-random", "multi-equidistant", "multi-trn", "nvs", "vbnvs")
MODES = SINGLE_MODES + MULTI_MODES
TARGETS = ("per-property", "all-joint") + ACRONYMS


class UsageError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    data: str = ""            # dataset directory; empty means generate ``preset`` in memory
    preset: str = "desk"
    data_seed: int = 0
    mode: str = "crossmodal"
    target: str = "per-property"
    epochs: int = 30
    lr: float = 1e-4
    batch_size: int = 16
    latent_dim: int = 0       # 0 -> 50 single-image, 100 multi-view
    M: int = 3
    lambda_emb: float = 1.0
    lambda_adv: float = 0.1
    lambda_cls: float = 0.1
    k: int = 6
    d_pca: int = 30
    policy_lr: float = 0.05
    stage2_iters: int = 500
    seeds: tuple = (0, 1, 2)
    label: str = ""
    out: str = "runs"
    explicit: frozenset = field(default=frozenset(), compare=False, repr=False)

    @property
    def multi_view(self):
        return self.mode in MULTI_MODES

    @property
    def latent(self):
        return self.latent_dim or (100 if self.multi_view else 50)

    def outputs(self):
        """Groups of property indices, one model per group."""
        if self.target == "all-joint":
            return [list(range(len(ACRONYMS)))]
        if self.target == "per-property":
            return [[i] for i in range(len(ACRONYMS))]
        return [[ACRONYMS.index(self.target)]]

    def validate(self):
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.target not in TARGETS:
            raise UsageError(f"unknown target {self.target!r}; use per-property, all-joint or an acronym")
        if not self.multi_view and "M" in self.explicit:
            raise UsageError(f"M only applies to multi-view modes, not {self.mode!r}")
        if self.epochs < 1 or self.batch_size < 1 or self.M < 1 or self.k < 1:
            raise UsageError("epochs, batch_size, M and k must be positive")
        if self.lr <= 0:
            raise UsageError("learning rate must be positive")
        if min(self.lambda_emb, self.lambda_adv, self.lambda_cls) < 0:
            raise UsageError("loss weights must be nonnegative")
        if not self.seeds:
            raise UsageError("at least one seed is required")
        return self

    def to_dict(self):
        d = asdict(self)
        d.pop("explicit")
        d["seeds"] = list(self.seeds)
        return d

    def hash(self):
        """Short digest of everything that affects results (not the output location)."""
        d = self.to_dict()
        d.pop("out")
        d.pop("label")
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()[:12]


_FIELDS = {f.name: f for f in fields(ExperimentConfig) if f.name != "explicit"}


def _coerce(name, raw):
    kind = type(getattr(ExperimentConfig(), name))
    try:
        if kind is tuple:
            if isinstance(raw, (list, tuple)):
                return tuple(int(v) for v in raw)
            return tuple(int(v) for v in str(raw).replace(",", " ").split())
        if kind is bool:
            return str(raw).lower() in ("1", "true", "yes", "on")
        return kind(raw)
    except ValueError:
        raise UsageError(f"bad value for {name}: {raw!r}") from None


def parse_config_text(text):
    """``key = value`` lines; ``#`` starts a comment; keys may use dashes."""
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {n}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _FIELDS:
            raise UsageError(f"config line {n}: unknown key {key!r}")
        out[key] = _coerce(key, value)
    return out


def build_config(file_text=None, overrides=None):
    """File values first, then flag overrides (``None`` values are ignored)."""
    values = parse_config_text(file_text) if file_text else {}
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = _coerce(k, v)
    cfg = ExperimentConfig(**values)
    cfg.explicit = frozenset(values)
    return cfg.validate()


def config_from_dict(d):
    return ExperimentConfig(**{k: _coerce(k, v) for k, v in d.items() if k in _FIELDS})

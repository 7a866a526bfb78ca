"""Experiment configuration: structured key = value text with defaults.

One file describes one experiment: dataset generation parameters, the
encoder kind and latent width, and training hyperparameters for each
stage. The fiducial encoder always uses width 128 (its latent layout is
fixed); other widths are 128 or 256.
"""

from dataclasses import dataclass, fields as dc_fields

from .errors import ConfigError

ENCODER_KINDS = ("fiducial", "vae", "backbone")


@dataclass
class ExperimentConfig:
    seed: int = 0
    camera: str = "side"
    sigma_px: float = 0.5
    dropout: float = 0.1
    facing_min: float = 0.26
    encoder: str = "fiducial"
    width: int = 128
    geometry: str = ""  # optional path to a geometry text file
    size_unsupervised: int = 1000
    size_finetune: int = 1000
    size_regression: int = 1000
    size_test: int = 1000
    traj_len: int = 200
    waypoint_interval: int = 25
    backbone_seed: int = 42
    vae_epochs: int = 300
    vae_lr: float = 1e-3
    vae_batch: int = 32
    vae_beta: float = 1e-3
    reductor_hidden: str = "512"
    reductor_epochs: int = 60
    reductor_lr: float = -1.0  # < 0 means per-kind default
    reductor_batch: int = -1
    reductor_wd: float = -1.0
    regressor_epochs: int = 300
    regressor_patience: int = 20
    regressor_val_fraction: float = 0.2
    regressor_lr: float = -1.0
    regressor_batch: int = -1
    regressor_wd: float = -1.0
    regressor_standardize: bool = False

    def __post_init__(self):
        if self.encoder not in ENCODER_KINDS:
            raise ConfigError(f"encoder must be one of {ENCODER_KINDS}, got {self.encoder!r}")
        if self.encoder == "fiducial":
            self.width = 128
        elif self.width not in (128, 256):
            raise ConfigError(f"width must be 128 or 256, got {self.width}")
        if self.camera not in ("side", "front"):
            raise ConfigError(f"camera must be 'side' or 'front', got {self.camera!r}")

    @property
    def model_name(self):
        return f"{self.encoder}-{self.width}"

    @property
    def sizes(self):
        return {"unsupervised": self.size_unsupervised, "finetune": self.size_finetune,
                "regression": self.size_regression, "test": self.size_test}

    def hidden_sizes(self):
        try:
            return tuple(int(h) for h in self.reductor_hidden.split(",") if h.strip())
        except ValueError:
            raise ConfigError(f"reductor_hidden must be comma-separated ints, "
                              f"got {self.reductor_hidden!r}") from None

    def _deep_variant(self):
        return self.encoder == "backbone" and len(self.hidden_sizes()) > 1

    def regressor_hyper(self):
        """Per-kind defaults: deep-reductor variants train slower and smaller."""
        deep = self._deep_variant()
        lr = self.regressor_lr if self.regressor_lr > 0 else (1e-4 if deep else 1e-3)
        batch = self.regressor_batch if self.regressor_batch > 0 else (8 if deep else 32)
        wd = self.regressor_wd if self.regressor_wd >= 0 else (0.01 if deep else 0.0)
        return lr, batch, wd

    def reductor_hyper(self):
        deep = self._deep_variant()
        lr = self.reductor_lr if self.reductor_lr > 0 else (1e-4 if deep else 1e-3)
        batch = self.reductor_batch if self.reductor_batch > 0 else (8 if deep else 32)
        wd = self.reductor_wd if self.reductor_wd >= 0 else (0.01 if deep else 0.0)
        return lr, batch, wd


_FIELD_TYPES = {f.name: (f.type if isinstance(f.type, str) else f.type.__name__)
                for f in dc_fields(ExperimentConfig)}


def parse_config(text):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _FIELD_TYPES:
            raise ConfigError(f"config line {lineno}: unknown key {key!r}")
        kind = _FIELD_TYPES[key]
        try:
            if kind == "int":
                values[key] = int(value)
            elif kind == "float":
                values[key] = float(value)
            elif kind == "bool":
                if value not in ("0", "1", "true", "false"):
                    raise ValueError(value)
                values[key] = value in ("1", "true")
            else:
                values[key] = value
        except ValueError:
            raise ConfigError(f"config line {lineno}: bad {kind} value {value!r} "
                              f"for {key}") from None
    return ExperimentConfig(**values)


def load_config(path):
    try:
        with open(path) as fh:
            return parse_config(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None

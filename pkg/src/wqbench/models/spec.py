"""Model and training configuration records.

Desk-scale defaults (hidden 64, ff 128, seq_len 60) keep test runtimes
in minutes; the published sizes (hidden 512/1024, seq_len 365) remain
constructible by passing them explicitly.
"""

from dataclasses import dataclass

from ..errors import ConfigurationError

RECURRENT = "recurrent"
OPERATOR = "operator"
ATTENTION = "attention"

FAMILIES = (RECURRENT, OPERATOR, ATTENTION)


@dataclass(frozen=True)
class ModelSpec:
    family: str
    n_dynamic_features: int
    n_static_features: int
    n_targets: int
    seq_len: int = 60
    decoder_window: int = 96
    hidden: int = 64
    layers: int = 2
    dropout: float = 0.0
    heads: int = 4
    ff_dim: int = 128

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError("unknown model family %r" % (self.family,))
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigurationError("dropout must lie in [0, 1)")
        if self.hidden < 1:
            raise ConfigurationError("hidden must be >= 1")
        if self.seq_len < 1:
            raise ConfigurationError("seq_len must be >= 1")
        if self.layers < 1:
            raise ConfigurationError("layers must be >= 1")
        if self.n_dynamic_features < 1 or self.n_targets < 1:
            raise ConfigurationError("feature and target counts must be >= 1")
        if self.n_static_features < 0:
            raise ConfigurationError("n_static_features must be >= 0")
        if self.family == ATTENTION:
            if self.hidden % self.heads != 0:
                raise ConfigurationError(
                    "hidden (%d) must be divisible by heads (%d)"
                    % (self.hidden, self.heads)
                )
            if self.decoder_window < 1:
                raise ConfigurationError("decoder_window must be >= 1")
            if self.ff_dim < 1:
                raise ConfigurationError("ff_dim must be >= 1")


@dataclass(frozen=True)
class StepSchedule:
    """lr(epoch) = lr0 * decay ** floor(epoch / every)."""

    decay: float = 0.5
    every: int = 100

    def rate(self, lr0, epoch, epochs):
        return lr0 * self.decay ** (epoch // self.every)


@dataclass(frozen=True)
class CosineSchedule:
    """Cosine decay from lr0 to min_lr, reaching min_lr at the last epoch."""

    min_lr: float = 1e-6

    def rate(self, lr0, epoch, epochs):
        import math

        if epochs <= 1:
            return self.min_lr
        frac = epoch / (epochs - 1)
        return self.min_lr + 0.5 * (lr0 - self.min_lr) * (
            1.0 + math.cos(math.pi * frac)
        )


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    optimizer: str = "adamw"
    lr: float = 1e-3
    weight_decay: float = 0.01
    schedule: object = StepSchedule()

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigurationError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ConfigurationError("batch_size must be >= 1")
        if self.lr <= 0.0:
            raise ConfigurationError("lr must be positive")
        if self.optimizer not in ("adam", "adamw"):
            raise ConfigurationError("optimizer must be adam or adamw")



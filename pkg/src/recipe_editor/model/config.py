"""Model hyperparameters."""

from __future__ import annotations

from dataclasses import asdict, dataclass


@dataclass
class ModelConfig:
    token_vocab_size: int
    ingredient_vocab_size: int
    hidden_dim: int = 64
    num_layers: int = 2
    num_heads: int = 2
    latent_dim: int = 64
    ffn_dim: int = 256
    max_sentence_tokens: int = 16
    max_sentences: int = 20
    max_ingredients: int = 20
    dropout: float = 0.2
    eos_loss_weight: float = 1.0
    share_sentence_encoder: bool = True
    max_decode_tokens: int = 200

    def __post_init__(self):
        if self.hidden_dim % self.num_heads != 0:
            raise ValueError("hidden_dim must be divisible by num_heads")
        if self.latent_dim <= 0:
            raise ValueError("latent_dim must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0,1)")
        if self.eos_loss_weight < 0:
            raise ValueError("eos_loss_weight must be nonnegative")
        for name in ("token_vocab_size", "ingredient_vocab_size", "num_layers",
                     "max_sentence_tokens", "max_sentences", "max_ingredients"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def n_decode_steps(self) -> int:
        # one slot per possible ingredient plus the cardinality-0 EOS slot
        return self.max_ingredients + 1

    @property
    def max_target_tokens(self) -> int:
        return self.max_sentences * (self.max_sentence_tokens + 1) + 2

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)

    @classmethod
    def desk(cls, token_vocab_size: int, ingredient_vocab_size: int,
             **overrides) -> "ModelConfig":
        """The small configuration the experiments run at on one CPU."""
        base = dict(hidden_dim=64, num_layers=2, num_heads=2, latent_dim=64,
                    ffn_dim=512, dropout=0.1)
        base.update(overrides)
        return cls(token_vocab_size=token_vocab_size,
                   ingredient_vocab_size=ingredient_vocab_size, **base)

    @classmethod
    def paper_scale(cls, token_vocab_size: int, ingredient_vocab_size: int,
                    **overrides) -> "ModelConfig":
        """512-wide, 4-layer, 4-head configuration."""
        base = dict(hidden_dim=512, num_layers=4, num_heads=4, latent_dim=512,
                    ffn_dim=2048, dropout=0.2)
        base.update(overrides)
        return cls(token_vocab_size=token_vocab_size,
                   ingredient_vocab_size=ingredient_vocab_size, **base)

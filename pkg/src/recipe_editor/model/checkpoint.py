"""Binary checkpoint serialization.

Layout (little-endian):
  magic ``RCPT`` | u32 version | u8 training stage | u32 config length |
  config JSON (model config + token list) | u32 tensor count |
  per tensor: u16 name length, name, u8 dtype tag, u8 ndim, u64*ndim shape,
  u64 byte length, raw data | 32-byte token-vocab digest |
  32-byte ingredient-vocab digest

Tensors are written in sorted-name order so save -> load -> save is
byte-identical.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import dataclass

import numpy as np
import torch

from ..corpus import IngredientVocab
from ..tokenizer import TokenVocab
from .config import ModelConfig

MAGIC = b"RCPT"
VERSION = 1
_DTYPES = {0: np.float64, 1: np.float32, 2: np.int64}
_DTYPE_TAGS = {np.dtype(np.float64): 0, np.dtype(np.float32): 1, np.dtype(np.int64): 2}


class CheckpointError(Exception):
    pass


class CorruptCheckpointError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class VocabMismatchError(CheckpointError):
    pass


@dataclass
class Checkpoint:
    config: ModelConfig
    tokens: list[str]
    stage: int
    tensors: dict[str, np.ndarray]
    token_digest: bytes
    ingredient_digest: bytes


def _tensor_table(tensors: dict[str, np.ndarray]) -> bytes:
    buf = io.BytesIO()
    buf.write(struct.pack("<I", len(tensors)))
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name])
        raw = arr.tobytes()
        nb = name.encode("utf-8")
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        buf.write(struct.pack("<BB", _DTYPE_TAGS[arr.dtype], arr.ndim))
        buf.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
        buf.write(struct.pack("<Q", len(raw)))
        buf.write(raw)
    return buf.getvalue()


def model_tensors(model: torch.nn.Module) -> dict[str, np.ndarray]:
    return {name: p.detach().numpy().copy() for name, p in model.state_dict().items()}


def model_digest(model: torch.nn.Module) -> str:
    """Hex digest of the parameter table; identifies a trained model."""
    return hashlib.sha256(_tensor_table(model_tensors(model))).hexdigest()


def save_checkpoint(model: torch.nn.Module, cfg: ModelConfig, token_vocab: TokenVocab,
                    ingredient_vocab: IngredientVocab, stage: int, path) -> None:
    cfg_json = json.dumps({"model": cfg.to_dict(), "tokens": token_vocab.tokens},
                          sort_keys=True, separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IB", VERSION, stage))
        f.write(struct.pack("<I", len(cfg_json)))
        f.write(cfg_json)
        f.write(_tensor_table(model_tensors(model)))
        f.write(token_vocab.digest())
        f.write(ingredient_vocab.digest())


def load_checkpoint(path, ingredient_vocab: IngredientVocab | None = None) -> Checkpoint:
    """Parse and validate a checkpoint; verifies the ingredient digest if given."""
    try:
        with open(path, "rb") as f:
            blob = f.read()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e
    view = io.BytesIO(blob)

    def take(n: int) -> bytes:
        b = view.read(n)
        if len(b) != n:
            raise CorruptCheckpointError(f"truncated checkpoint {path}")
        return b

    if take(4) != MAGIC:
        raise CorruptCheckpointError(f"{path} is not a checkpoint (bad magic)")
    version, stage = struct.unpack("<IB", take(5))
    if version != VERSION:
        raise CheckpointVersionError(f"checkpoint version {version}, expected {VERSION}")
    (cfg_len,) = struct.unpack("<I", take(4))
    try:
        meta = json.loads(take(cfg_len).decode("utf-8"))
        cfg = ModelConfig.from_dict(meta["model"])
        tokens = list(meta["tokens"])
    except (ValueError, KeyError, TypeError) as e:
        raise CorruptCheckpointError(f"bad config record in {path}: {e}") from e
    (n_tensors,) = struct.unpack("<I", take(4))
    tensors: dict[str, np.ndarray] = {}
    for _ in range(n_tensors):
        (name_len,) = struct.unpack("<H", take(2))
        name = take(name_len).decode("utf-8")
        tag, ndim = struct.unpack("<BB", take(2))
        if tag not in _DTYPES:
            raise CorruptCheckpointError(f"unknown dtype tag {tag} in {path}")
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        (nbytes,) = struct.unpack("<Q", take(8))
        arr = np.frombuffer(take(nbytes), dtype=_DTYPES[tag]).reshape(shape)
        tensors[name] = arr.copy()
    token_digest = take(32)
    ingredient_digest = take(32)
    if view.read(1):
        raise CorruptCheckpointError(f"trailing bytes in {path}")
    if TokenVocab(tokens).digest() != token_digest:
        raise VocabMismatchError(f"token vocabulary digest mismatch in {path}")
    if ingredient_vocab is not None and ingredient_vocab.digest() != ingredient_digest:
        raise VocabMismatchError(
            f"{path} was trained against a different ingredient vocabulary")
    return Checkpoint(cfg, tokens, stage, tensors, token_digest, ingredient_digest)


def restore_model(ckpt: Checkpoint) -> tuple[torch.nn.Module, TokenVocab]:
    """Rebuild the model and token vocabulary from a parsed checkpoint."""
    from .network import RecipeModel

    model = RecipeModel(ckpt.config)
    state = {name: torch.from_numpy(arr) for name, arr in ckpt.tensors.items()}
    model.load_state_dict(state)
    model.eval()
    return model, TokenVocab(ckpt.tokens)

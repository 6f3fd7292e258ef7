"""Two-stage denoising training.

Stage 1 fits the encoder and ingredient predictor on noised inputs against
the complete ingredient set. Stage 2 freezes the encoder and fits the
instruction decoder with teacher forcing, conditioned on ground-truth
ingredient sets. Both stages early-stop on validation loss and restore the
best weights. Runs are bit-reproducible for a fixed seed in single-threaded
mode.
"""

from __future__ import annotations

import hashlib
import json
import logging
import time
from dataclasses import asdict, dataclass, field

import numpy as np
import torch

from .corpus import NoisedRecipe, Recipe, apply_denoising_noise
from .model.checkpoint import _tensor_table, model_tensors
from .model.features import (conditioning_sets, decoder_batch, encoder_batch,
                             ingredient_targets)
from .model.losses import ingredient_loss_from_logits, instruction_loss
from .model.network import RecipeModel, pool_step_logits, top_set_from_probs
from .tokenizer import PAD, TokenVocab

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    stage: int
    batch_size: int = 32
    learning_rate: float = 1e-4
    lr_min: float | None = None   # set below learning_rate for cosine decay
    dropout: float = 0.2
    mask_ratio: float = 0.5
    max_epochs: int = 30
    patience_epochs: int = 5
    seed: int = 0
    grad_clip: float = 1.0
    threads: int = 1
    # stage-2 conditioning noise: distractor slots teach the decoder to trust z
    # over the raw slot list, which is what latent critiquing relies on
    slot_insert_prob: float = 0.0
    slot_drop_prob: float = 0.0

    def __post_init__(self):
        if self.stage not in (1, 2):
            raise ValueError("stage must be 1 or 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.lr_min is not None and not 0 < self.lr_min <= self.learning_rate:
            raise ValueError("lr_min must be in (0, learning_rate]")
        if not 0.0 <= self.mask_ratio <= 1.0:
            raise ValueError("mask_ratio must be in [0,1]")
        for p in (self.slot_insert_prob, self.slot_drop_prob):
            if not 0.0 <= p <= 1.0:
                raise ValueError("slot noise probabilities must be in [0,1]")

    def lr_at(self, epoch: int) -> float:
        if self.lr_min is None or self.max_epochs <= 1:
            return self.learning_rate
        frac = epoch / (self.max_epochs - 1)
        return self.lr_min + 0.5 * (self.learning_rate - self.lr_min) * (
            1.0 + np.cos(np.pi * frac))


@dataclass
class TrainReport:
    stage: int
    train_losses: list[float] = field(default_factory=list)
    val_losses: list[float] = field(default_factory=list)
    val_f1: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_loss: float = float("inf")
    epochs_run: int = 0
    wall_clock_s: float = 0.0
    checkpoint_path: str | None = None

    def to_dict(self) -> dict:
        return asdict(self)

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)


def _set_dropout(model: torch.nn.Module, p: float) -> None:
    for m in model.modules():
        if isinstance(m, torch.nn.Dropout):
            m.p = p


def _check_finite(loss: torch.Tensor, stage: int, epoch: int, step: int) -> None:
    if not bool(torch.isfinite(loss)):
        raise RuntimeError(
            f"stage {stage} diverged: non-finite loss at epoch {epoch}, batch {step}")


def _batches(n: int, batch_size: int, rng: np.random.Generator):
    order = rng.permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size].tolist()


def encoder_digest(model: RecipeModel) -> str:
    tensors = {k: v for k, v in model_tensors(model.encoder).items()}
    return hashlib.sha256(_tensor_table(tensors)).hexdigest()


def _noise(recipes: list[Recipe], ratio: float, rng: np.random.Generator) -> list[NoisedRecipe]:
    if ratio == 0.0:
        return [NoisedRecipe(r) for r in recipes]
    return [apply_denoising_noise(r, ratio, rng) for r in recipes]


def _mean_set_f1(preds, recipes: list[Recipe]) -> float:
    from .evaluation import set_f1

    total = sum(set_f1(pred, r.ingredient_ids) for pred, r in zip(preds, recipes))
    return total / max(len(recipes), 1)


def train_stage1(train: list[Recipe], val: list[Recipe], model: RecipeModel,
                 token_vocab: TokenVocab, config: TrainConfig) -> TrainReport:
    """Fit encoder + predictor on the recipe-completion task."""
    if config.stage != 1:
        raise ValueError("train_stage1 requires config.stage == 1")
    t0 = time.time()
    torch.set_num_threads(config.threads)
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    _set_dropout(model, config.dropout)
    cfg = model.cfg
    params = list(model.encoder.parameters()) + list(model.predictor.parameters())
    opt = torch.optim.Adam(params, lr=config.learning_rate)
    # validation noise is frozen so early stopping tracks a stable objective
    val_noised = _noise(val, config.mask_ratio, np.random.default_rng(config.seed + 101))
    val_y, val_eos = ingredient_targets(val, cfg)

    report = TrainReport(stage=1)
    best_state = None
    patience = 0
    for epoch in range(config.max_epochs):
        model.train()
        for group in opt.param_groups:
            group["lr"] = config.lr_at(epoch)
        noised = _noise(train, config.mask_ratio, rng)
        epoch_loss, n_samples = 0.0, 0
        for step, idx in enumerate(_batches(len(train), config.batch_size, rng)):
            batch = encoder_batch([noised[i] for i in idx], token_vocab, cfg)
            y, eos = ingredient_targets([train[i] for i in idx], cfg)
            loss = ingredient_loss_from_logits(
                model.predictor(model.encoder(batch)), y, eos,
                cfg.eos_loss_weight).mean()
            _check_finite(loss, 1, epoch, step)
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(params, config.grad_clip)
            opt.step()
            epoch_loss += loss.item() * len(idx)
            n_samples += len(idx)
        report.train_losses.append(epoch_loss / n_samples)

        model.eval()
        val_loss, f1 = _validate_stage1(model, token_vocab, val_noised, val, val_y, val_eos)
        report.val_losses.append(val_loss)
        report.val_f1.append(f1)
        log.info("stage1 epoch %d: train %.4f val %.4f f1 %.3f",
                 epoch, report.train_losses[-1], val_loss, f1)
        if val_loss < report.best_val_loss:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.state_dict().items()}
            patience = 0
        else:
            patience += 1
            if patience >= config.patience_epochs:
                break
    report.epochs_run = len(report.train_losses)
    if best_state is not None:
        model.load_state_dict(best_state)
    model.eval()
    report.wall_clock_s = time.time() - t0
    return report


@torch.no_grad()
def _validate_stage1(model, token_vocab, val_noised, val, val_y, val_eos,
                     chunk: int = 64) -> tuple[float, float]:
    cfg = model.cfg
    total, n = 0.0, 0
    pred_sets = []
    for start in range(0, len(val_noised), chunk):
        part = val_noised[start:start + chunk]
        z = model.encoder(encoder_batch(part, token_vocab, cfg))
        step_logits = model.predictor(z)
        loss = ingredient_loss_from_logits(
            step_logits, val_y[start:start + chunk], val_eos[start:start + chunk],
            cfg.eos_loss_weight)
        total += float(loss.sum())
        n += len(part)
        probs, eos_probs = pool_step_logits(step_logits)
        for i in range(len(part)):
            top, _ = top_set_from_probs(probs[i].numpy(), eos_probs[i].numpy(),
                                        cfg.max_ingredients)
            pred_sets.append(top)
    return total / max(n, 1), _mean_set_f1(pred_sets, val)


def _noisy_slots(recipes: list[Recipe], n_vocab: int, config: TrainConfig,
                 rng: np.random.Generator) -> list[list[int]]:
    sets = []
    for r in recipes:
        ids = sorted(r.ingredient_ids)
        if config.slot_drop_prob > 0 and len(ids) > 1:
            kept = [i for i in ids if rng.random() >= config.slot_drop_prob]
            ids = kept if kept else [ids[int(rng.integers(len(ids)))]]
        if config.slot_insert_prob > 0 and rng.random() < config.slot_insert_prob:
            pool = np.setdiff1d(np.arange(n_vocab), np.array(sorted(r.ingredient_ids)))
            extra = rng.choice(pool, size=min(int(rng.integers(1, 3)), pool.size),
                               replace=False)
            ids = sorted(set(ids) | set(int(e) for e in extra))
        sets.append(ids)
    return sets


def train_stage2(train: list[Recipe], val: list[Recipe], model: RecipeModel,
                 token_vocab: TokenVocab, config: TrainConfig) -> TrainReport:
    """Fit the instruction decoder with the encoder frozen."""
    if config.stage != 2:
        raise ValueError("train_stage2 requires config.stage == 2")
    t0 = time.time()
    torch.set_num_threads(config.threads)
    torch.manual_seed(config.seed)
    rng = np.random.default_rng(config.seed)
    _set_dropout(model, config.dropout)
    cfg = model.cfg
    frozen_before = encoder_digest(model)
    for p in model.encoder.parameters():
        p.requires_grad_(False)
    params = list(model.decoder.parameters())
    opt = torch.optim.Adam(params, lr=config.learning_rate)

    val_noised = _noise(val, config.mask_ratio, np.random.default_rng(config.seed + 101))
    report = TrainReport(stage=2)
    best_state = None
    patience = 0
    for epoch in range(config.max_epochs):
        model.decoder.train()
        model.encoder.eval()
        for group in opt.param_groups:
            group["lr"] = config.lr_at(epoch)
        noised = _noise(train, config.mask_ratio, rng)
        slot_sets = _noisy_slots(train, cfg.ingredient_vocab_size, config, rng)
        epoch_loss, n_tok = 0.0, 0
        for step, idx in enumerate(_batches(len(train), config.batch_size, rng)):
            with torch.no_grad():
                z = model.encoder(encoder_batch([noised[i] for i in idx], token_vocab, cfg))
            tin, tout = decoder_batch([train[i] for i in idx], token_vocab, cfg)
            ing_ids, ing_pad = conditioning_sets([slot_sets[i] for i in idx])
            loss = instruction_loss(model.decoder(z, ing_ids, ing_pad, tin), tout)
            _check_finite(loss, 2, epoch, step)
            opt.zero_grad()
            loss.backward()
            torch.nn.utils.clip_grad_norm_(params, config.grad_clip)
            opt.step()
            ntk = int((tout != PAD).sum())
            epoch_loss += loss.item() * ntk
            n_tok += ntk
        report.train_losses.append(epoch_loss / n_tok)

        model.eval()
        val_loss = _validate_stage2(model, token_vocab, val_noised, val)
        report.val_losses.append(val_loss)
        log.info("stage2 epoch %d: train %.4f val %.4f", epoch,
                 report.train_losses[-1], val_loss)
        if val_loss < report.best_val_loss:
            report.best_val_loss = val_loss
            report.best_epoch = epoch
            best_state = {k: v.detach().clone() for k, v in model.decoder.state_dict().items()}
            patience = 0
        else:
            patience += 1
            if patience >= config.patience_epochs:
                break
    report.epochs_run = len(report.train_losses)
    if best_state is not None:
        model.decoder.load_state_dict(best_state)
    for p in model.encoder.parameters():
        p.requires_grad_(True)
    model.eval()
    if encoder_digest(model) != frozen_before:
        raise RuntimeError("stage 2 mutated encoder parameters (freeze contract broken)")
    report.wall_clock_s = time.time() - t0
    return report


@torch.no_grad()
def _validate_stage2(model, token_vocab, val_noised, val, chunk: int = 64) -> float:
    cfg = model.cfg
    total, n_tok = 0.0, 0
    for start in range(0, len(val), chunk):
        part = val[start:start + chunk]
        z = model.encoder(encoder_batch(val_noised[start:start + chunk], token_vocab, cfg))
        tin, tout = decoder_batch(part, token_vocab, cfg)
        ing_ids, ing_pad = conditioning_sets([r.ingredient_ids for r in part])
        loss = instruction_loss(model.decoder(z, ing_ids, ing_pad, tin), tout)
        ntk = int((tout != PAD).sum())
        total += float(loss) * ntk
        n_tok += ntk
    return total / max(n_tok, 1)

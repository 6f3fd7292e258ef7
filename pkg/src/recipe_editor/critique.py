"""Latent critiquing: iterative gradient updates of z to satisfy add/remove feedback.

The loop follows the iterative scheme exactly: at each iteration the set-loss
gradient at the current latent vector is normalized to an alpha-sized step,
alpha decays geometrically, and progress is measured as the absolute
difference between desired and predicted probability at the critiqued
coordinate(s). Three stopping criteria are supported: patience-based early
stopping that returns the best latent found, a local threshold on that
absolute difference, and a global L1 threshold over the whole prediction.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from .corpus import IngredientVocab, NoisedRecipe, Recipe, words
from .model.losses import grad_ingredient_loss_wrt_z, ingredient_loss
from .model.network import IngredientPrediction, RecipeModel, pool_step_logits
from .tokenizer import TokenVocab

log = logging.getLogger(__name__)

ADD = "add"
REMOVE = "remove"

EARLY_STOPPING = "early_stopping"
LOCAL_THRESHOLD = "local_threshold"
GLOBAL_L1_THRESHOLD = "global_l1_threshold"
CRITERIA = (EARLY_STOPPING, LOCAL_THRESHOLD, GLOBAL_L1_THRESHOLD)


@dataclass(frozen=True)
class Critique:
    ingredient: int
    direction: str

    def __post_init__(self):
        if self.direction not in (ADD, REMOVE):
            raise ValueError(f"direction must be add or remove, got {self.direction!r}")
        if self.ingredient < 0:
            raise ValueError("ingredient id must be nonnegative")

    @property
    def desired(self) -> float:
        return 1.0 if self.direction == ADD else 0.0


@dataclass
class CritiqueConfig:
    alpha0: float = 1.0
    decay: float = 0.9
    patience: int = 5
    max_iters: int = 100
    criterion: str = EARLY_STOPPING
    threshold: float = 0.1

    def __post_init__(self):
        if self.alpha0 <= 0:
            raise ValueError("alpha0 must be positive")
        if not 0.0 < self.decay <= 1.0:
            raise ValueError("decay must be in (0,1]")
        if self.patience < 1 or self.max_iters < 1:
            raise ValueError("patience and max_iters must be positive")
        if self.criterion not in CRITERIA:
            raise ValueError(f"criterion must be one of {CRITERIA}")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must be in (0,1)")

    def to_dict(self) -> dict:
        return {"alpha0": self.alpha0, "decay": self.decay, "patience": self.patience,
                "max_iters": self.max_iters, "criterion": self.criterion,
                "threshold": self.threshold}


@dataclass
class TraceStep:
    t: int
    alpha: float               # alpha_t, i.e. after this iteration's decay
    loss: float
    diffs: dict[int, float]    #|desired - predicted| per critiqued ingredient
    best_val: float
    accepted: bool
    step_norm: float = 0.0     # ||z_t - z_{t-1}||, equals alpha_{t-1} when g != 0

    def to_record(self) -> dict:
        return {"t": self.t, "alpha": self.alpha, "loss": self.loss,
                "diffs": {str(k): v for k, v in self.diffs.items()},
                "best_val": self.best_val, "accepted": self.accepted,
                "step_norm": self.step_norm}


@dataclass
class CritiqueTrace:
    steps: list[TraceStep] = field(default_factory=list)
    termination: str = "max_iters"   # patience_exhausted | max_iters | threshold_met | zero_gradient

    @property
    def iterations(self) -> int:
        return len(self.steps)

    def to_records(self) -> list[dict]:
        return [s.to_record() for s in self.steps]


@dataclass
class EditedRecipe:
    base_id: str
    critiques: list[Critique]
    z_before: np.ndarray
    z_after: np.ndarray
    prediction_before: IngredientPrediction
    prediction_after: IngredientPrediction
    ingredient_ids: set[int]
    instructions: list[str]
    trace: CritiqueTrace | None


def check_no_conflicts(critiques: list[Critique]) -> None:
    directions: dict[int, str] = {}
    for c in critiques:
        if directions.get(c.ingredient, c.direction) != c.direction:
            raise ValueError(f"conflicting critiques for ingredient {c.ingredient}")
        directions[c.ingredient] = c.direction


def build_target(prediction: IngredientPrediction,
                 critiques: list[Critique]) -> np.ndarray:
    """Desired ingredient vector: thresholded prediction with critiqued overrides."""
    check_no_conflicts(critiques)
    target = (prediction.probabilities > 0.5).astype(np.float64)
    for c in critiques:
        if c.ingredient >= target.shape[0]:
            raise ValueError(f"ingredient {c.ingredient} outside vocabulary")
        target[c.ingredient] = c.desired
    return target


def critique_latent(model: RecipeModel, z: torch.Tensor, critiques: list[Critique],
                    config: CritiqueConfig) -> tuple[torch.Tensor, CritiqueTrace]:
    """Run the iterative critiquing gradient update from z.

    Early stopping tracks the best per-coordinate absolute difference and
    returns the best latent vector found; the threshold criteria stop at the
    first iteration under tau and return the current iterate. A zero gradient
    at the first iteration returns z unchanged.
    """
    if not critiques:
        raise ValueError("critique_latent needs at least one critique")
    was_training = model.training
    model.eval()
    cfg = model.cfg
    lam = cfg.eos_loss_weight
    pred0 = model.predict_ingredients(z)[0]
    target_np = build_target(pred0, critiques)
    target = torch.from_numpy(target_np)
    eos_index = min(int(target_np.sum()), cfg.n_decode_steps - 1)
    coords = sorted({c.ingredient for c in critiques})
    desired = {c.ingredient: c.desired for c in critiques}

    trace = CritiqueTrace()
    z_prev = z.detach().clone()
    z_best = z_prev.clone()
    alpha = config.alpha0
    best_val = float("inf")
    patience = 0
    t = 1
    early = config.criterion == EARLY_STOPPING
    while t < config.max_iters and (not early or patience < config.patience):
        g = grad_ingredient_loss_wrt_z(model.predictor, z_prev, target, eos_index, lam)
        gnorm = float(torch.linalg.vector_norm(g))
        if gnorm == 0.0:
            trace.termination = "zero_gradient"
            if t == 1:
                z_best = z_prev
            break
        z_t = z_prev - alpha * g / gnorm
        if not bool(torch.isfinite(z_t).all()):
            raise RuntimeError(f"critique_latent: non-finite latent at iteration {t}")
        with torch.no_grad():
            step_logits = model.predictor(z_t.unsqueeze(0))
            probs, eos_probs = pool_step_logits(step_logits)
            loss_t = float(ingredient_loss(
                probs, eos_probs, target.unsqueeze(0),
                torch.tensor([eos_index]), lam).sum())
        p = probs[0].numpy()
        diffs = {c: abs(desired[c] - float(p[c])) for c in coords}
        m_t = max(diffs.values())
        accepted = False
        if early:
            if m_t < best_val:
                best_val, z_best, patience, accepted = m_t, z_t.clone(), 0, True
            else:
                patience += 1
        else:
            if m_t < best_val:
                best_val, accepted = m_t, True
            z_best = z_t.clone()
        step_norm = float(torch.linalg.vector_norm(z_t - z_prev))
        alpha = config.decay * alpha
        trace.steps.append(TraceStep(t, alpha, loss_t, diffs, best_val, accepted,
                                     step_norm))
        if config.criterion == LOCAL_THRESHOLD and m_t < config.threshold:
            trace.termination = "threshold_met"
            break
        if config.criterion == GLOBAL_L1_THRESHOLD:
            l1 = float(np.abs(p - target_np).sum())
            if l1 < config.threshold:
                trace.termination = "threshold_met"
                break
        z_prev = z_t
        t += 1
    else:
        trace.termination = "patience_exhausted" if (early and patience >= config.patience) else "max_iters"
    if was_training:
        model.train()
    return z_best, trace


def removal_mask(recipe: Recipe, targets: set[int], vocab: IngredientVocab) -> NoisedRecipe:
    """Hide all targets' ingredient lines and every step mentioning any of them."""
    ing_pos = {i for i, line in enumerate(recipe.ingredient_lines)
               if any(m[0] in targets for m in vocab.match_tokens(words(line)))}
    ins_pos = {i for i, step in enumerate(recipe.instructions)
               if any(m[0] in targets for m in vocab.match_tokens(words(step)))}
    return NoisedRecipe(recipe, ing_pos, ins_pos)


def apply_critiques(model: RecipeModel, token_vocab: TokenVocab, z: torch.Tensor,
                    critiques: list[Critique], config: CritiqueConfig,
                    max_len: int | None = None):
    """Critique z, re-predict, and decode; shared by edit_recipe and the service."""
    pred_before = model.predict_ingredients(z)[0]
    z_star, trace = critique_latent(model, z, critiques, config)
    pred_after = model.predict_ingredients(z_star)[0]
    edited = set(pred_after.top_set)
    instructions = model.decode_instructions(z_star, [edited], token_vocab, max_len)[0]
    return z_star, trace, pred_before, pred_after, edited, instructions


def _encoder_input(recipe: Recipe, critiques: list[Critique],
                   vocab: IngredientVocab) -> Recipe | NoisedRecipe:
    removals = {c.ingredient for c in critiques if c.direction == REMOVE}
    missing = removals - recipe.ingredient_ids
    if missing:
        raise ValueError(f"cannot remove ingredients absent from recipe: {sorted(missing)}")
    return removal_mask(recipe, removals, vocab) if removals else recipe


def edit_recipe(model: RecipeModel, token_vocab: TokenVocab, vocab: IngredientVocab,
                recipe: Recipe, critiques: list[Critique], config: CritiqueConfig,
                max_len: int | None = None) -> EditedRecipe:
    """Full editing pipeline: mask (for removals) -> encode -> critique -> decode."""
    enc_in = _encoder_input(recipe, critiques, vocab)
    z = model.encode_recipes([enc_in], token_vocab)[0]
    z_star, trace, pred_before, pred_after, edited, instructions = apply_critiques(
        model, token_vocab, z, critiques, config, max_len)
    return EditedRecipe(recipe.id, list(critiques), z.numpy().copy(), z_star.numpy().copy(),
                        pred_before, pred_after, edited, instructions, trace)


def filtered_decode_baseline(model: RecipeModel, token_vocab: TokenVocab,
                             vocab: IngredientVocab, recipe: Recipe,
                             critiques: list[Critique],
                             max_len: int | None = None) -> EditedRecipe:
    """Control pipeline: same encode, no latent update, ingredient list forced."""
    check_no_conflicts(critiques)
    enc_in = _encoder_input(recipe, critiques, vocab)
    z = model.encode_recipes([enc_in], token_vocab)[0]
    pred = model.predict_ingredients(z)[0]
    edited = set(pred.top_set)
    for c in critiques:
        if c.direction == ADD:
            edited.add(c.ingredient)
        else:
            edited.discard(c.ingredient)
    instructions = model.decode_instructions(z, [edited], token_vocab, max_len)[0]
    return EditedRecipe(recipe.id, list(critiques), z.numpy().copy(), z.numpy().copy(),
                        pred, pred, edited, instructions, None)

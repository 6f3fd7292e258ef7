"""Recipe -> tensor featurization for the encoder, predictor, and decoder."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch

from ..corpus import NoisedRecipe, Recipe
from ..tokenizer import BOS, EOS, PAD, SEP, UNK, TokenVocab
from .config import ModelConfig
from .layers import DTYPE

log = logging.getLogger(__name__)


@dataclass
class EncoderBatch:
    """Flattened sentence tokens plus scatter indices back into per-recipe grids.

    Masked sentences are not tokenized at all; their grid slots are filled
    with the learned MASK sentence embedding by the encoder.
    """

    flat_tokens: torch.Tensor      # [N, L] token ids of every visible sentence
    title_index: torch.Tensor      # [B] row into flat_tokens
    ing_size: int
    ing_scatter: torch.Tensor      # [M, 3] (recipe row, slot, flat index)
    ing_masked: torch.Tensor       # [Mm, 2] (recipe row, slot)
    ing_valid: torch.Tensor        # [B, ing_size] bool
    ins_size: int
    ins_scatter: torch.Tensor
    ins_masked: torch.Tensor
    ins_valid: torch.Tensor

    def __len__(self) -> int:
        return self.title_index.shape[0]


def _as_noised(item: Recipe | NoisedRecipe) -> NoisedRecipe:
    return item if isinstance(item, NoisedRecipe) else NoisedRecipe(item)


def _sentence_ids(text: str, vocab: TokenVocab, max_tokens: int) -> list[int]:
    ids = vocab.encode(text)[:max_tokens]
    return ids if ids else [UNK]


def encoder_batch(items: list[Recipe | NoisedRecipe], vocab: TokenVocab,
                  cfg: ModelConfig) -> EncoderBatch:
    flat: list[list[int]] = []
    title_index: list[int] = []
    scatter = {"ing": [], "ins": []}
    masked = {"ing": [], "ins": []}
    valid = {"ing": [], "ins": []}
    truncated = 0
    for row, item in enumerate(items):
        noised = _as_noised(item)
        r = noised.base
        title_ids = vocab.encode(r.title)[: cfg.max_sentence_tokens]
        visible = (len(title_ids) > 0
                   or len(r.ingredient_lines) > len(noised.masked_ingredient_positions)
                   or len(r.instructions) > len(noised.masked_instruction_positions))
        if not visible:
            raise ValueError(f"recipe {r.id}: nothing visible to encode")
        title_index.append(len(flat))
        flat.append(title_ids if title_ids else [UNK])
        for kind, sentences, masked_pos in (
                ("ing", r.ingredient_lines, noised.masked_ingredient_positions),
                ("ins", r.instructions, noised.masked_instruction_positions)):
            if len(sentences) > cfg.max_sentences:
                truncated += 1
                sentences = sentences[: cfg.max_sentences]
            valid[kind].append(len(sentences))
            for slot, sentence in enumerate(sentences):
                if slot in masked_pos:
                    masked[kind].append((row, slot))
                else:
                    scatter[kind].append((row, slot, len(flat)))
                    flat.append(_sentence_ids(sentence, vocab, cfg.max_sentence_tokens))
    if truncated:
        log.warning("encoder_batch: truncated %d recipes to %d sentences", truncated, cfg.max_sentences)

    max_len = max(len(s) for s in flat)
    tokens = torch.full((len(flat), max_len), PAD, dtype=torch.long)
    for i, s in enumerate(flat):
        tokens[i, : len(s)] = torch.tensor(s, dtype=torch.long)

    def grid(kind: str):
        size = max(max(valid[kind]), 1)
        v = torch.zeros(len(items), size, dtype=torch.bool)
        for row, count in enumerate(valid[kind]):
            v[row, :count] = True
        sc = torch.tensor(scatter[kind], dtype=torch.long).reshape(-1, 3)
        mk = torch.tensor(masked[kind], dtype=torch.long).reshape(-1, 2)
        return size, sc, mk, v

    ing_size, ing_sc, ing_mk, ing_v = grid("ing")
    ins_size, ins_sc, ins_mk, ins_v = grid("ins")
    return EncoderBatch(tokens, torch.tensor(title_index, dtype=torch.long),
                        ing_size, ing_sc, ing_mk, ing_v,
                        ins_size, ins_sc, ins_mk, ins_v)


def ingredient_targets(recipes: list[Recipe], cfg: ModelConfig) -> tuple[torch.Tensor, torch.Tensor]:
    """Multi-hot targets over the vocabulary and the EOS slot index = set size."""
    y = torch.zeros(len(recipes), cfg.ingredient_vocab_size, dtype=DTYPE)
    eos = torch.zeros(len(recipes), dtype=torch.long)
    for i, r in enumerate(recipes):
        for ing_id in r.ingredient_ids:
            y[i, ing_id] = 1.0
        eos[i] = min(len(r.ingredient_ids), cfg.n_decode_steps - 1)
    return y, eos


def instruction_tokens(recipe: Recipe, vocab: TokenVocab, cfg: ModelConfig) -> list[int]:
    """BOS w.. SEP w.. SEP ... EOS, capped at the positional table size."""
    ids = [BOS]
    for i, step in enumerate(recipe.instructions[: cfg.max_sentences]):
        if i:
            ids.append(SEP)
        ids.extend(_sentence_ids(step, vocab, cfg.max_sentence_tokens))
    ids.append(EOS)
    return ids[: cfg.max_target_tokens]


def decoder_batch(recipes: list[Recipe], vocab: TokenVocab,
                  cfg: ModelConfig) -> tuple[torch.Tensor, torch.Tensor]:
    """Teacher-forcing input/output token grids, PAD-filled."""
    seqs = [instruction_tokens(r, vocab, cfg) for r in recipes]
    max_len = max(len(s) for s in seqs) - 1
    tin = torch.full((len(seqs), max_len), PAD, dtype=torch.long)
    tout = torch.full((len(seqs), max_len), PAD, dtype=torch.long)
    for i, s in enumerate(seqs):
        tin[i, : len(s) - 1] = torch.tensor(s[:-1], dtype=torch.long)
        tout[i, : len(s) - 1] = torch.tensor(s[1:], dtype=torch.long)
    return tin, tout


def conditioning_sets(sets: list[set[int] | list[int]]) -> tuple[torch.Tensor, torch.Tensor]:
    """Sorted ingredient-id slots [B,K] plus a True-where-padding mask."""
    k = max((len(s) for s in sets), default=0)
    ids = torch.zeros(len(sets), k, dtype=torch.long)
    pad = torch.ones(len(sets), k, dtype=torch.bool)
    for i, s in enumerate(sets):
        ordered = sorted(s)
        ids[i, : len(ordered)] = torch.tensor(ordered, dtype=torch.long)
        pad[i, : len(ordered)] = False
    return ids, pad

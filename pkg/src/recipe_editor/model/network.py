"""The three submodels: recipe encoder, ingredient predictor, instruction decoder.

Token embeddings are scaled by sqrt(hidden_dim) before positional embeddings
are added, keeping token identity dominant through the mean-pooling stages.

The encoder reads title / ingredient lines / instruction sentences
hierarchically (token-level transformer mean-pooled per sentence, then a
set-level transformer per component), concatenates the three component
vectors, and projects through tanh into the latent vector z. The predictor is
a fixed-step set decoder over z whose per-step ingredient logits are
max-pooled; the first decode step whose EOS probability clears 0.5 determines
the predicted set cardinality. The instruction decoder cross-attends over one
slot for z plus one embedding slot per conditioning ingredient and decodes
greedily.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn

from ..corpus import NoisedRecipe, Recipe
from ..tokenizer import EOS, PAD, SEP, TokenVocab
from .config import ModelConfig
from .features import EncoderBatch, conditioning_sets, encoder_batch
from .layers import DTYPE, DecoderLayer, EncoderLayer, init_parameters, masked_mean

log = logging.getLogger(__name__)


class SentenceEncoder(nn.Module):
    """Token-level transformer; returns one mean-pooled vector per sentence."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.hidden_dim
        self.token_emb = nn.Embedding(cfg.token_vocab_size, d, dtype=DTYPE)
        self.pos_emb = nn.Embedding(cfg.max_sentence_tokens, d, dtype=DTYPE)
        self.layers = nn.ModuleList(
            EncoderLayer(d, cfg.num_heads, cfg.ffn_dim, cfg.dropout)
            for _ in range(cfg.num_layers))
        self.norm = nn.LayerNorm(d, dtype=DTYPE)
        self.drop = nn.Dropout(cfg.dropout)

    def forward(self, tokens: torch.Tensor) -> torch.Tensor:
        pad = tokens == PAD
        pos = torch.arange(tokens.shape[1], device=tokens.device)
        scale = math.sqrt(self.token_emb.embedding_dim)
        x = self.drop(self.token_emb(tokens) * scale + self.pos_emb(pos)[None])
        for layer in self.layers:
            x = layer(x, pad_mask=pad)
        return masked_mean(self.norm(x), ~pad)


class SetEncoder(nn.Module):
    """Transformer over sentence vectors; positions optional (sets vs sequences)."""

    def __init__(self, cfg: ModelConfig, use_positions: bool):
        super().__init__()
        d = cfg.hidden_dim
        self.pos_emb = nn.Embedding(cfg.max_sentences, d, dtype=DTYPE) if use_positions else None
        self.layers = nn.ModuleList(
            EncoderLayer(d, cfg.num_heads, cfg.ffn_dim, cfg.dropout)
            for _ in range(cfg.num_layers))
        self.norm = nn.LayerNorm(d, dtype=DTYPE)

    def forward(self, x: torch.Tensor, valid: torch.Tensor) -> torch.Tensor:
        if self.pos_emb is not None:
            pos = torch.arange(x.shape[1], device=x.device)
            x = x + self.pos_emb(pos)[None]
        for layer in self.layers:
            x = layer(x, pad_mask=~valid)
        return masked_mean(self.norm(x), valid)


class RecipeEncoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        self.sent_enc = SentenceEncoder(cfg)
        if cfg.share_sentence_encoder:
            self.ing_sent_enc = self.ins_sent_enc = self.sent_enc
        else:
            self.ing_sent_enc = SentenceEncoder(cfg)
            self.ins_sent_enc = SentenceEncoder(cfg)
        self.ing_set_enc = SetEncoder(cfg, use_positions=False)
        self.ins_set_enc = SetEncoder(cfg, use_positions=True)
        self.mask_sentence = nn.Parameter(torch.zeros(cfg.hidden_dim, dtype=DTYPE))
        self.latent_head = nn.Linear(3 * cfg.hidden_dim, cfg.latent_dim, dtype=DTYPE)

    def _grid(self, sent_vecs, batch: EncoderBatch, kind: str):
        size = getattr(batch, f"{kind}_size")
        sc = getattr(batch, f"{kind}_scatter")
        mk = getattr(batch, f"{kind}_masked")
        grid = torch.zeros(len(batch), size, self.cfg.hidden_dim, dtype=DTYPE)
        if sc.numel():
            grid[sc[:, 0], sc[:, 1]] = sent_vecs[sc[:, 2]]
        if mk.numel():
            grid[mk[:, 0], mk[:, 1]] = self.mask_sentence
        return grid

    def forward(self, batch: EncoderBatch) -> torch.Tensor:
        if self.cfg.share_sentence_encoder:
            sent_vecs = self.sent_enc(batch.flat_tokens)
            title_vecs = ing_vecs = ins_vecs = sent_vecs
        else:
            title_vecs = self.sent_enc(batch.flat_tokens)
            ing_vecs = self.ing_sent_enc(batch.flat_tokens)
            ins_vecs = self.ins_sent_enc(batch.flat_tokens)
        title = title_vecs[batch.title_index]
        ing = self.ing_set_enc(self._grid(ing_vecs, batch, "ing"), batch.ing_valid)
        ins = self.ins_set_enc(self._grid(ins_vecs, batch, "ins"), batch.ins_valid)
        return torch.tanh(self.latent_head(torch.cat([title, ing, ins], dim=-1)))


class IngredientPredictor(nn.Module):
    """Fixed-step set decoder over z; emits per-step ingredient + EOS logits."""

    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.hidden_dim
        self.cfg = cfg
        self.step_emb = nn.Embedding(cfg.n_decode_steps, d, dtype=DTYPE)
        self.mem_proj = nn.Linear(cfg.latent_dim, d, dtype=DTYPE)
        self.layers = nn.ModuleList(
            DecoderLayer(d, cfg.num_heads, cfg.ffn_dim, cfg.dropout, causal=False)
            for _ in range(cfg.num_layers))
        self.norm = nn.LayerNorm(d, dtype=DTYPE)
        self.out = nn.Linear(d, cfg.ingredient_vocab_size + 1, dtype=DTYPE)

    def forward(self, z: torch.Tensor) -> torch.Tensor:
        """z [B, latent] -> per-step logits [B, n_steps, |I|+1] (last column is EOS)."""
        b = z.shape[0]
        memory = self.mem_proj(z).unsqueeze(1)
        x = self.step_emb.weight[None].expand(b, -1, -1)
        for layer in self.layers:
            x = layer(x, memory)
        return self.out(self.norm(x))


def pool_step_logits(step_logits: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
    """Element-wise max over decode steps, squashed to probabilities.

    Gradient flows to the first maximizing step of each ingredient (the
    argmax indices are taken before the gather, so ties route to the lowest
    step index). Returns (ingredient probs [B,|I|], per-step EOS probs [B,S]).
    """
    ing_logits = step_logits[..., :-1]
    idx = ing_logits.argmax(dim=1, keepdim=True)
    pooled = ing_logits.gather(1, idx).squeeze(1)
    return torch.sigmoid(pooled), torch.sigmoid(step_logits[..., -1])


@dataclass
class IngredientPrediction:
    """Pooled per-ingredient probabilities plus the EOS-derived top-k set."""

    probabilities: np.ndarray      # [|I|]
    eos_probabilities: np.ndarray  # [n_steps]
    per_step_logits: np.ndarray    # [n_steps, |I|+1]
    top_set: set[int]
    cardinality: int

    @property
    def eos_probability(self) -> float:
        return float(self.eos_probabilities[self.cardinality])


def top_set_from_probs(probs: np.ndarray, eos_probs: np.ndarray,
                       max_ingredients: int) -> tuple[set[int], int]:
    """Top-k ingredients where k is the first step with EOS probability > 0.5."""
    fired = np.flatnonzero(eos_probs > 0.5)
    k = int(fired[0]) if fired.size else max_ingredients
    k = min(k, max_ingredients)
    order = np.lexsort((np.arange(probs.shape[0]), -probs))
    return set(int(i) for i in order[:k]), k


class InstructionDecoder(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        d = cfg.hidden_dim
        self.cfg = cfg
        self.token_emb = nn.Embedding(cfg.token_vocab_size, d, dtype=DTYPE)
        self.pos_emb = nn.Embedding(cfg.max_target_tokens, d, dtype=DTYPE)
        self.z_proj = nn.Linear(cfg.latent_dim, d, dtype=DTYPE)
        self.ing_emb = nn.Embedding(cfg.ingredient_vocab_size, d, dtype=DTYPE)
        self.layers = nn.ModuleList(
            DecoderLayer(d, cfg.num_heads, cfg.ffn_dim, cfg.dropout, causal=True)
            for _ in range(cfg.num_layers))
        self.norm = nn.LayerNorm(d, dtype=DTYPE)
        self.out = nn.Linear(d, cfg.token_vocab_size, dtype=DTYPE)
        self.drop = nn.Dropout(cfg.dropout)

    def build_memory(self, z, ing_ids, ing_pad):
        """Memory = [projected z] + one embedding slot per conditioning ingredient."""
        memory = torch.cat([self.z_proj(z).unsqueeze(1), self.ing_emb(ing_ids)], dim=1)
        mem_pad = torch.cat(
            [torch.zeros(z.shape[0], 1, dtype=torch.bool, device=z.device), ing_pad], dim=1)
        return memory, mem_pad

    def forward(self, z, ing_ids, ing_pad, tokens_in):
        memory, mem_pad = self.build_memory(z, ing_ids, ing_pad)
        pos = torch.arange(tokens_in.shape[1], device=tokens_in.device)
        scale = math.sqrt(self.token_emb.embedding_dim)
        x = self.drop(self.token_emb(tokens_in) * scale + self.pos_emb(pos)[None])
        pad = tokens_in == PAD
        for layer in self.layers:
            x = layer(x, memory, self_pad_mask=pad, mem_pad_mask=mem_pad)
        return self.out(self.norm(x))

    @torch.no_grad()
    def greedy(self, z, ing_ids, ing_pad, max_len: int | None = None) -> list[list[int]]:
        """Batched greedy decoding from BOS until EOS (or the length cap)."""
        from ..tokenizer import BOS

        max_len = min(max_len or self.cfg.max_decode_tokens, self.cfg.max_target_tokens - 1)
        b = z.shape[0]
        tokens = torch.full((b, 1), BOS, dtype=torch.long, device=z.device)
        done = torch.zeros(b, dtype=torch.bool)
        for _ in range(max_len):
            logits = self.forward(z, ing_ids, ing_pad, tokens)[:, -1]
            nxt = logits.argmax(dim=-1)
            nxt[done] = PAD
            done |= nxt == EOS
            tokens = torch.cat([tokens, nxt.unsqueeze(1)], dim=1)
            if bool(done.all()):
                break
        out = []
        for row in tokens[:, 1:].tolist():
            ids = []
            for t in row:
                if t in (EOS, PAD):
                    break
                ids.append(t)
            out.append(ids)
        return out


class RecipeModel(nn.Module):
    """Bundle of encoder/predictor/decoder with recipe-level convenience ops."""

    def __init__(self, cfg: ModelConfig, seed: int = 0):
        super().__init__()
        self.cfg = cfg
        self.encoder = RecipeEncoder(cfg)
        self.predictor = IngredientPredictor(cfg)
        self.decoder = InstructionDecoder(cfg)
        init_parameters(self, seed)

    @torch.no_grad()
    def encode_recipes(self, items: list[Recipe | NoisedRecipe],
                       vocab: TokenVocab) -> torch.Tensor:
        """Latent vectors for a batch of (possibly noised) recipes; eval mode."""
        was_training = self.training
        self.eval()
        z = self.encoder(encoder_batch(items, vocab, self.cfg))
        if was_training:
            self.train()
        return z

    @torch.no_grad()
    def predict_ingredients(self, z: torch.Tensor) -> list[IngredientPrediction]:
        was_training = self.training
        self.eval()
        single = z.dim() == 1
        step_logits = self.predictor(z.unsqueeze(0) if single else z)
        probs, eos_probs = pool_step_logits(step_logits)
        preds = []
        for i in range(step_logits.shape[0]):
            p = probs[i].numpy()
            e = eos_probs[i].numpy()
            top, k = top_set_from_probs(p, e, self.cfg.max_ingredients)
            preds.append(IngredientPrediction(p, e, step_logits[i].numpy(), top, k))
        if was_training:
            self.train()
        return preds

    @torch.no_grad()
    def decode_instructions(self, z: torch.Tensor, sets: list[set[int]],
                            vocab: TokenVocab, max_len: int | None = None) -> list[list[str]]:
        """Greedy instruction sentences for each (z row, ingredient set) pair."""
        was_training = self.training
        self.eval()
        z2 = z if z.dim() == 2 else z.unsqueeze(0)
        if z2.shape[0] != len(sets):
            raise ValueError(f"{z2.shape[0]} latent rows but {len(sets)} ingredient sets")
        bad = [i for s in sets for i in s if not 0 <= i < self.cfg.ingredient_vocab_size]
        if bad:
            raise ValueError(f"ingredient ids outside vocabulary: {sorted(set(bad))}")
        ing_ids, ing_pad = conditioning_sets(sets)
        token_rows = self.decoder.greedy(z2, ing_ids, ing_pad, max_len)
        out = []
        for row in token_rows:
            sentences, cur = [], []
            for t in row:
                if t == SEP:
                    if cur:
                        sentences.append(vocab.decode(cur))
                    cur = []
                else:
                    cur.append(t)
            if cur:
                sentences.append(vocab.decode(cur))
            if not sentences:
                log.info("greedy decode produced an empty instruction list")
            out.append(sentences)
        if was_training:
            self.train()
        return out

"""Transformer building blocks (pre-norm, explicit masks, float64).

All modules run in float64: the critiquing loop differentiates through the
ingredient predictor and verifies gradients against central finite
differences, which needs the headroom.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn

DTYPE = torch.float64

NEG_INF = torch.finfo(DTYPE).min


class MultiHeadAttention(nn.Module):
    def __init__(self, dim: int, heads: int, dropout: float):
        super().__init__()
        self.heads = heads
        self.head_dim = dim // heads
        self.q_proj = nn.Linear(dim, dim, dtype=DTYPE)
        self.k_proj = nn.Linear(dim, dim, dtype=DTYPE)
        self.v_proj = nn.Linear(dim, dim, dtype=DTYPE)
        self.out_proj = nn.Linear(dim, dim, dtype=DTYPE)
        self.drop = nn.Dropout(dropout)

    def forward(self, q_in, kv_in, pad_mask=None, causal=False):
        """q_in [B,Lq,D], kv_in [B,Lk,D]; pad_mask [B,Lk] True where key is padding."""
        b, lq, d = q_in.shape
        lk = kv_in.shape[1]
        q = self.q_proj(q_in).view(b, lq, self.heads, self.head_dim).transpose(1, 2)
        k = self.k_proj(kv_in).view(b, lk, self.heads, self.head_dim).transpose(1, 2)
        v = self.v_proj(kv_in).view(b, lk, self.heads, self.head_dim).transpose(1, 2)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        if causal:
            tri = torch.triu(torch.ones(lq, lk, dtype=torch.bool, device=scores.device), 1)
            scores = scores.masked_fill(tri, NEG_INF)
        if pad_mask is not None:
            scores = scores.masked_fill(pad_mask[:, None, None, :], NEG_INF)
        attn = torch.softmax(scores, dim=-1)
        attn = self.drop(attn)
        out = (attn @ v).transpose(1, 2).reshape(b, lq, d)
        return self.out_proj(out)


class FeedForward(nn.Module):
    def __init__(self, dim: int, ffn_dim: int, dropout: float):
        super().__init__()
        self.net = nn.Sequential(
            nn.Linear(dim, ffn_dim, dtype=DTYPE), nn.GELU(),
            nn.Dropout(dropout), nn.Linear(ffn_dim, dim, dtype=DTYPE))

    def forward(self, x):
        return self.net(x)


class EncoderLayer(nn.Module):
    def __init__(self, dim: int, heads: int, ffn_dim: int, dropout: float):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim, dtype=DTYPE)
        self.attn = MultiHeadAttention(dim, heads, dropout)
        self.norm2 = nn.LayerNorm(dim, dtype=DTYPE)
        self.ffn = FeedForward(dim, ffn_dim, dropout)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, pad_mask=None):
        h = self.norm1(x)
        x = x + self.drop(self.attn(h, h, pad_mask=pad_mask))
        x = x + self.drop(self.ffn(self.norm2(x)))
        return x


class DecoderLayer(nn.Module):
    def __init__(self, dim: int, heads: int, ffn_dim: int, dropout: float,
                 causal: bool = True):
        super().__init__()
        self.causal = causal
        self.norm1 = nn.LayerNorm(dim, dtype=DTYPE)
        self.self_attn = MultiHeadAttention(dim, heads, dropout)
        self.norm2 = nn.LayerNorm(dim, dtype=DTYPE)
        self.cross_attn = MultiHeadAttention(dim, heads, dropout)
        self.norm3 = nn.LayerNorm(dim, dtype=DTYPE)
        self.ffn = FeedForward(dim, ffn_dim, dropout)
        self.drop = nn.Dropout(dropout)

    def forward(self, x, memory, self_pad_mask=None, mem_pad_mask=None):
        h = self.norm1(x)
        x = x + self.drop(self.self_attn(h, h, pad_mask=self_pad_mask, causal=self.causal))
        x = x + self.drop(self.cross_attn(self.norm2(x), memory, pad_mask=mem_pad_mask))
        x = x + self.drop(self.ffn(self.norm3(x)))
        return x


def masked_mean(x, valid):
    """Mean of x [B,L,D] over positions where valid [B,L] is True (>=1 per row)."""
    w = valid.to(x.dtype).unsqueeze(-1)
    return (x * w).sum(dim=1) / w.sum(dim=1).clamp(min=1.0)


def init_parameters(module: nn.Module, seed: int) -> None:
    """Deterministic re-initialization independent of global RNG state.

    Matrices get Xavier-uniform, norm weights 1, biases 0, everything else
    N(0, 0.02). Parameters are visited in sorted name order.
    """
    gen = torch.Generator().manual_seed(seed)
    with torch.no_grad():
        for name, p in sorted(module.named_parameters(), key=lambda kv: kv[0]):
            if p.dim() >= 2:
                fan_out, fan_in = p.shape[0], p.shape[-1]
                bound = math.sqrt(6.0 / (fan_in + fan_out))
                p.copy_((torch.rand(p.shape, generator=gen, dtype=DTYPE) * 2 - 1) * bound)
            elif "norm" in name and name.endswith("weight"):
                p.fill_(1.0)
            elif name.endswith("bias"):
                p.zero_()
            else:
                p.copy_(torch.randn(p.shape, generator=gen, dtype=DTYPE) * 0.02)

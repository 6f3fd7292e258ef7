"""Word-level tokenizer with fixed special tokens.

Lowercasing, punctuation-separating tokenizer; out-of-vocabulary words map to
UNK. Specials occupy fixed slots: PAD=0, MASK=1, BOS=2, EOS=3, UNK=4, and the
step separator SEP=5 used to join instruction sentences for the decoder.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter

from .corpus import Recipe

PAD, MASK, BOS, EOS, UNK, SEP = range(6)
SPECIALS = ["<pad>", "<mask>", "<bos>", "<eos>", "<unk>", "<sep>"]

_TOKEN_RE = re.compile(r"[a-z0-9]+|[^\sa-z0-9]")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


class TokenVocab:
    def __init__(self, tokens: list[str]):
        if tokens[: len(SPECIALS)] != SPECIALS:
            raise ValueError("token vocabulary must start with the special tokens")
        self.tokens = list(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, text: str) -> list[int]:
        return [self.index.get(t, UNK) for t in tokenize(text)]

    def decode(self, ids: list[int]) -> str:
        return " ".join(self.tokens[i] for i in ids if i >= len(SPECIALS))

    def digest(self) -> bytes:
        return hashlib.sha256("\n".join(self.tokens).encode("utf-8")).digest()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for t in self.tokens:
                f.write(t + "\n")

    @classmethod
    def load(cls, path) -> "TokenVocab":
        with open(path, encoding="utf-8") as f:
            return cls([line.rstrip("\n") for line in f if line.rstrip("\n")])


def build_token_vocab(recipes: list[Recipe], min_freq: int = 3,
                      max_size: int = 2000) -> TokenVocab:
    """Frequency-ordered vocabulary from recipe text, ties broken lexicographically."""
    counts: Counter[str] = Counter()
    for r in recipes:
        counts.update(tokenize(r.title))
        for line in r.ingredient_lines:
            counts.update(tokenize(line))
        for step in r.instructions:
            counts.update(tokenize(step))
    kept = [t for t, c in counts.items() if c >= min_freq and t not in SPECIALS]
    kept.sort(key=lambda t: (-counts[t], t))
    return TokenVocab(SPECIALS + kept[: max_size - len(SPECIALS)])

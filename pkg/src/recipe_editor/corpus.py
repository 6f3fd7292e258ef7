"""Recipe data model: ingestion, ingredient vocabulary, noising, and eval sampling.

Recipes are plain records (title, raw ingredient lines, instruction sentences).
Ingredient identity is resolved against an :class:`IngredientVocab` by greedy
longest-alias matching over word tokens; the same matcher backs both the
denoising masks and the coherence metric so the two stay consistent.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger(__name__)

MAX_INGREDIENTS = 20
MAX_INSTRUCTIONS = 20

_WORD_RE = re.compile(r"[a-z0-9]+")


def words(text: str) -> list[str]:
    """Lowercased alphanumeric word tokens; punctuation is dropped."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class Ingredient:
    id: int
    canonical_name: str
    aliases: tuple[str, ...]

    def __post_init__(self):
        if not self.canonical_name:
            raise ValueError("ingredient canonical_name must be nonempty")
        if self.canonical_name not in self.aliases:
            object.__setattr__(self, "aliases", (self.canonical_name,) + self.aliases)


class IngredientVocab:
    """Dense id space 0..n-1 over ingredients, plus a reserved EOS slot at index n."""

    def __init__(self, ingredients: list[Ingredient]):
        self.ingredients = list(ingredients)
        self.by_name: dict[str, Ingredient] = {}
        seen_alias: dict[str, int] = {}
        for i, ing in enumerate(self.ingredients):
            if ing.id != i:
                raise ValueError(f"ingredient ids must be dense 0..n-1, got {ing.id} at {i}")
            if ing.canonical_name in self.by_name:
                raise ValueError(f"duplicate canonical name {ing.canonical_name!r}")
            self.by_name[ing.canonical_name] = ing
            for alias in ing.aliases:
                key = " ".join(words(alias))
                if not key:
                    raise ValueError(f"alias {alias!r} has no word tokens")
                if key in seen_alias and seen_alias[key] != ing.id:
                    raise ValueError(f"alias {alias!r} maps to two ingredients")
                seen_alias[key] = ing.id
        # alias token tuple -> id, longest aliases first per leading token
        self._by_first: dict[str, list[tuple[tuple[str, ...], int]]] = {}
        for key, ing_id in seen_alias.items():
            toks = tuple(key.split())
            self._by_first.setdefault(toks[0], []).append((toks, ing_id))
        for entries in self._by_first.values():
            entries.sort(key=lambda e: (-len(e[0]), e[0]))

    def __len__(self) -> int:
        return len(self.ingredients)

    @property
    def eos_index(self) -> int:
        return len(self.ingredients)

    def __getitem__(self, ing_id: int) -> Ingredient:
        return self.ingredients[ing_id]

    def id_of(self, name: str) -> int | None:
        ing = self.by_name.get(name.strip().lower())
        return ing.id if ing is not None else None

    def resolve(self, name_or_id: str | int) -> int | None:
        """Resolve an ingredient reference by id, canonical name, or alias."""
        if isinstance(name_or_id, int):
            return name_or_id if 0 <= name_or_id < len(self) else None
        text = name_or_id.strip().lower()
        if text.isdigit():
            i = int(text)
            return i if i < len(self) else None
        got = self.id_of(text)
        if got is not None:
            return got
        found = {m[0] for m in self.match_tokens(words(text))}
        return found.pop() if len(found) == 1 else None

    def match_tokens(self, tokens: list[str]) -> list[tuple[int, int, int]]:
        """Greedy left-to-right longest-alias matches over word tokens.

        Returns (ingredient_id, start, end) spans; a matched span is consumed,
        so shorter aliases nested inside a longer match do not fire.
        """
        out: list[tuple[int, int, int]] = []
        i = 0
        n = len(tokens)
        while i < n:
            entries = self._by_first.get(tokens[i])
            hit = None
            if entries:
                for toks, ing_id in entries:
                    if tuple(tokens[i : i + len(toks)]) == toks:
                        hit = (ing_id, i, i + len(toks))
                        break
            if hit is not None:
                out.append(hit)
                i = hit[2]
            else:
                i += 1
        return out

    def lines(self) -> list[str]:
        """Vocabulary file lines: ``canonical<TAB>alias1|alias2|...``."""
        return [f"{ing.canonical_name}\t{'|'.join(ing.aliases)}" for ing in self.ingredients]

    def digest(self) -> bytes:
        import hashlib

        return hashlib.sha256("\n".join(self.lines()).encode("utf-8")).digest()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for line in self.lines():
                f.write(line + "\n")

    @classmethod
    def load(cls, path) -> "IngredientVocab":
        ingredients = []
        with open(path, encoding="utf-8") as f:
            for i, raw in enumerate(f):
                raw = raw.rstrip("\n")
                if not raw:
                    continue
                name, _, alias_part = raw.partition("\t")
                aliases = tuple(a for a in alias_part.split("|") if a) if alias_part else ()
                ingredients.append(Ingredient(len(ingredients), name.strip().lower(), aliases))
        return cls(ingredients)


@dataclass
class Recipe:
    id: str
    title: str
    ingredient_lines: list[str]
    ingredient_ids: set[int]
    instructions: list[str]

    def copy(self) -> "Recipe":
        return Recipe(self.id, self.title, list(self.ingredient_lines),
                      set(self.ingredient_ids), list(self.instructions))


@dataclass
class NoisedRecipe:
    """A recipe with some ingredient lines / instruction sentences hidden from the encoder."""

    base: Recipe
    masked_ingredient_positions: set[int] = field(default_factory=set)
    masked_instruction_positions: set[int] = field(default_factory=set)

    def __post_init__(self):
        n_ing, n_ins = len(self.base.ingredient_lines), len(self.base.instructions)
        if any(p < 0 or p >= n_ing for p in self.masked_ingredient_positions):
            raise ValueError("masked ingredient position out of range")
        if any(p < 0 or p >= n_ins for p in self.masked_instruction_positions):
            raise ValueError("masked instruction position out of range")


@dataclass
class CritiqueEvalSet:
    target_ingredient: int
    positive_recipes: list[Recipe]
    negative_recipes: list[Recipe]


def resolve_ingredient_ids(lines: list[str], vocab: IngredientVocab) -> set[int]:
    """Union of alias matches across raw ingredient lines."""
    ids: set[int] = set()
    for line in lines:
        for ing_id, _, _ in vocab.match_tokens(words(line)):
            ids.add(ing_id)
    return ids


def ingredient_mentions(instructions: list[str], vocab: IngredientVocab) -> set[int]:
    """Ingredient ids whose alias occurs as a whole-token run in any sentence.

    Longest alias wins on overlap ("green onion" does not also count "onion").
    """
    ids: set[int] = set()
    for sentence in instructions:
        for ing_id, _, _ in vocab.match_tokens(words(sentence)):
            ids.add(ing_id)
    return ids


def load_jsonl(path, vocab: IngredientVocab) -> list[Recipe]:
    """Load recipes from line-delimited JSON, applying the 20/20 size filter.

    Records with more than 20 ingredient lines or 20 instructions are dropped,
    as are records where no ingredient line resolves against the vocabulary.
    Malformed lines are skipped with a warning count.
    """
    recipes: list[Recipe] = []
    dropped = 0
    malformed = 0
    autonum = 0
    with open(path, encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
                title = str(rec["title"])
                lines = [str(x) for x in rec["ingredients"]]
                steps = [str(x) for x in rec["instructions"]]
            except (json.JSONDecodeError, KeyError, TypeError):
                malformed += 1
                continue
            if not lines or not steps or len(lines) > MAX_INGREDIENTS or len(steps) > MAX_INSTRUCTIONS:
                dropped += 1
                continue
            ids = resolve_ingredient_ids(lines, vocab)
            if not ids:
                dropped += 1
                continue
            rid = str(rec.get("id") or "")
            if not rid:
                autonum += 1
                rid = f"r{autonum:06d}"
            recipes.append(Recipe(rid, title, lines, ids, steps))
    if dropped or malformed:
        log.warning("load_jsonl(%s): kept %d, dropped %d (size/resolution), %d malformed lines",
                    path, len(recipes), dropped, malformed)
    else:
        log.info("load_jsonl(%s): kept %d recipes", path, len(recipes))
    return recipes


def save_jsonl(recipes: list[Recipe], path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        for r in recipes:
            f.write(json.dumps({"id": r.id, "title": r.title, "ingredients": r.ingredient_lines,
                                "instructions": r.instructions}) + "\n")


def split_corpus(recipes: list[Recipe], fractions: tuple[float, float, float],
                 seed: int) -> tuple[list[Recipe], list[Recipe], list[Recipe]]:
    """Deterministic disjoint train/val/test split by shuffled assignment."""
    if any(f < 0 or f > 1 for f in fractions):
        raise ValueError(f"fractions must be in [0,1], got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    n = len(recipes)
    order = np.random.default_rng(seed).permutation(n)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    n_val = min(n_val, n - n_train)
    train = [recipes[i] for i in order[:n_train]]
    val = [recipes[i] for i in order[n_train:n_train + n_val]]
    test = [recipes[i] for i in order[n_train + n_val:]]
    return train, val, test


def build_ingredient_vocab(recipes: list[Recipe], vocab: IngredientVocab,
                           max_size: int) -> IngredientVocab:
    """Prune a vocabulary to the ``max_size`` most frequent ingredients.

    Frequency is document frequency over ``recipes``; ties break
    lexicographically by canonical name. Ids are re-densified; reports the
    fraction of ingredient occurrences the pruned vocabulary still covers.
    """
    if max_size < 1:
        raise ValueError("max_size must be >= 1")
    freq = document_frequencies(recipes, vocab)
    ranked = sorted(range(len(vocab)), key=lambda i: (-freq[i], vocab[i].canonical_name))
    keep = [i for i in ranked if freq[i] > 0][:max_size]
    total = sum(freq)
    covered = sum(freq[i] for i in keep)
    log.info("build_ingredient_vocab: kept %d/%d ingredients, coverage %.3f",
             len(keep), len(vocab), covered / total if total else 1.0)
    pruned = [Ingredient(new_id, vocab[old].canonical_name, vocab[old].aliases)
              for new_id, old in enumerate(keep)]
    return IngredientVocab(pruned)


def document_frequencies(recipes: list[Recipe], vocab: IngredientVocab) -> list[int]:
    freq = [0] * len(vocab)
    for r in recipes:
        for i in r.ingredient_ids:
            freq[i] += 1
    return freq


def _round_half_up(x: float) -> int:
    return int(np.floor(x + 0.5))


def apply_denoising_noise(recipe: Recipe, mask_ratio: float,
                          rng: np.random.Generator) -> NoisedRecipe:
    """Mask ``round(mask_ratio * n)`` positions per list (half-up rounding).

    The title is never masked. If rounding would hide every ingredient line
    and every instruction, one instruction is kept visible.
    """
    if not 0.0 <= mask_ratio <= 1.0:
        raise ValueError(f"mask_ratio must be in [0,1], got {mask_ratio}")
    n_ing = len(recipe.ingredient_lines)
    n_ins = len(recipe.instructions)
    k_ing = _round_half_up(mask_ratio * n_ing)
    k_ins = _round_half_up(mask_ratio * n_ins)
    if k_ing >= n_ing and k_ins >= n_ins and n_ins > 0:
        k_ins = n_ins - 1
    ing_pos = set(rng.choice(n_ing, size=min(k_ing, n_ing), replace=False).tolist()) if n_ing else set()
    ins_pos = set(rng.choice(n_ins, size=min(k_ins, n_ins), replace=False).tolist()) if n_ins else set()
    return NoisedRecipe(recipe, ing_pos, ins_pos)


def mask_for_removal_critique(recipe: Recipe, target: int,
                              vocab: IngredientVocab) -> NoisedRecipe:
    """Hide the target's ingredient line(s) and every step that mentions it."""
    if target not in recipe.ingredient_ids:
        raise ValueError(f"ingredient {target} not present in recipe {recipe.id}")
    ing_pos = {i for i, line in enumerate(recipe.ingredient_lines)
               if any(m[0] == target for m in vocab.match_tokens(words(line)))}
    ins_pos = {i for i, step in enumerate(recipe.instructions)
               if any(m[0] == target for m in vocab.match_tokens(words(step)))}
    return NoisedRecipe(recipe, ing_pos, ins_pos)


def select_critique_targets(train_recipes: list[Recipe], vocab: IngredientVocab,
                            k: int, min_support: int = 50) -> list[int]:
    """k/2 most and k/2 least frequent ingredients by train document frequency.

    Only ingredients appearing in at least ``min_support`` recipes are
    eligible, so evaluation sets can be sampled on both sides. Ties break
    lexicographically.
    """
    if k % 2 != 0:
        raise ValueError("k must be even")
    if k > len(vocab):
        raise ValueError("k exceeds vocabulary size")
    freq = document_frequencies(train_recipes, vocab)
    eligible = [i for i in range(len(vocab)) if freq[i] >= min_support]
    if len(eligible) < k:
        raise ValueError(f"only {len(eligible)} ingredients have support >= {min_support}, need {k}")
    most = sorted(eligible, key=lambda i: (-freq[i], vocab[i].canonical_name))[: k // 2]
    least = sorted(eligible, key=lambda i: (freq[i], vocab[i].canonical_name))[: k // 2]
    return most + [i for i in least if i not in most]


def sample_eval_set(recipes: list[Recipe], target: int, n_each: int,
                    seed: int) -> CritiqueEvalSet:
    """Sample ``n_each`` recipes containing the target and ``n_each`` without it."""
    pos = [r for r in recipes if target in r.ingredient_ids]
    neg = [r for r in recipes if target not in r.ingredient_ids]
    if len(pos) < n_each:
        raise ValueError(f"only {len(pos)} recipes contain ingredient {target}, need {n_each}")
    if len(neg) < n_each:
        raise ValueError(f"only {len(neg)} recipes lack ingredient {target}, need {n_each}")
    rng = np.random.default_rng(seed)
    pick_pos = [pos[i] for i in rng.choice(len(pos), size=n_each, replace=False)] if n_each else []
    pick_neg = [neg[i] for i in rng.choice(len(neg), size=n_each, replace=False)] if n_each else []
    return CritiqueEvalSet(target, pick_pos, pick_neg)

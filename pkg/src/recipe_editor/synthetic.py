"""Synthetic recipe corpus from a small generative grammar.

The grammar couples every ingredient to step templates that mention it, so a
generated recipe's instructions mention exactly its ingredient set. That gives
the evaluation harness a corpus where coherence of the ground truth is 1.0 by
construction. Format documented in ``data/default_grammar.txt``.
"""

from __future__ import annotations

import importlib.resources
import re
from dataclasses import dataclass, field

import numpy as np

from .corpus import (MAX_INGREDIENTS, MAX_INSTRUCTIONS, Ingredient,
                     IngredientVocab, Recipe, ingredient_mentions)


class GrammarError(ValueError):
    """Raised when a grammar config is malformed or internally inconsistent."""


@dataclass
class GrammarIngredient:
    name: str
    aliases: tuple[str, ...]
    group: str
    steps: list[str] = field(default_factory=list)
    weight: float | None = None


@dataclass
class GrammarTemplate:
    name: str
    weight: float = 1.0
    title: str = ""
    core: list[str] = field(default_factory=list)
    picks: list[tuple[str, int, int]] = field(default_factory=list)
    openers: list[str] = field(default_factory=list)
    closers: list[str] = field(default_factory=list)


_PICK_RE = re.compile(r"^(\w+)\s+(\d+)-(\d+)$")


class GrammarConfig:
    def __init__(self, ingredients: list[GrammarIngredient],
                 templates: list[GrammarTemplate], line_templates: list[str],
                 mix: float = 0.5, zipf: float = 1.0):
        self.ingredients = ingredients
        self.templates = templates
        self.line_templates = line_templates
        self.mix = mix
        self.zipf = zipf
        self.groups: dict[str, list[int]] = {}
        for i, ing in enumerate(self.ingredients):
            self.groups.setdefault(ing.group, []).append(i)
        self._weights = np.array(
            [ing.weight if ing.weight is not None else (rank + 1) ** -self.zipf
             for rank, ing in enumerate(self.ingredients)], dtype=np.float64)
        self.validate()

    def vocab(self) -> IngredientVocab:
        return IngredientVocab([Ingredient(i, ing.name, ing.aliases)
                                for i, ing in enumerate(self.ingredients)])

    def validate(self) -> None:
        if len(self.templates) < 2:
            raise GrammarError("grammar needs at least 2 dish templates")
        if not self.line_templates:
            raise GrammarError("grammar needs at least one line: template")
        if not 0.0 <= self.mix <= 1.0:
            raise GrammarError(f"mix must be in [0,1], got {self.mix}")
        vocab = self.vocab()
        names = {ing.name for ing in self.ingredients}
        for ing in self.ingredients:
            if not ing.steps:
                raise GrammarError(f"ingredient {ing.name!r} has no step templates")
            ing_id = vocab.id_of(ing.name)
            for tpl in ing.steps + self.line_templates:
                if "{ING}" not in tpl:
                    raise GrammarError(f"template {tpl!r} does not mention {{ING}}")
                for alias in (ing.name,) + tuple(ing.aliases):
                    got = ingredient_mentions([tpl.replace("{ING}", alias)], vocab)
                    if got != {ing_id}:
                        raise GrammarError(
                            f"template {tpl!r} with alias {alias!r} mentions "
                            f"{sorted(got)} instead of only {ing.name!r}")
        for t in self.templates:
            if t.weight <= 0:
                raise GrammarError(f"template {t.name!r} has non-positive weight")
            if not t.title:
                raise GrammarError(f"template {t.name!r} has no title pattern")
            for name in t.core:
                if name not in names:
                    raise GrammarError(f"template {t.name!r} references unknown ingredient {name!r}")
            for group, lo, hi in t.picks:
                if group not in self.groups:
                    raise GrammarError(f"template {t.name!r} references unknown group {group!r}")
                if not 0 <= lo <= hi:
                    raise GrammarError(f"template {t.name!r} has bad pick range {lo}-{hi}")
            for sentence in t.openers + t.closers:
                got = ingredient_mentions([sentence], vocab)
                if got:
                    raise GrammarError(
                        f"template {t.name!r} generic step {sentence!r} mentions an ingredient")
            if set(re.findall(r"\{(\w+)\}", t.title)) - {"A", "B"}:
                raise GrammarError(f"template {t.name!r} title may only use {{A}} and {{B}}")

    def group_probs(self, group: str, exclude: set[int]) -> tuple[list[int], np.ndarray]:
        members = [i for i in self.groups[group] if i not in exclude]
        if not members:
            return [], np.zeros(0)
        w = self._weights[members]
        p = (1.0 - self.mix) * (w / w.sum()) + self.mix / len(members)
        return members, p / p.sum()


def parse_grammar(text: str) -> GrammarConfig:
    ingredients: list[GrammarIngredient] = []
    templates: list[GrammarTemplate] = []
    line_templates: list[str] = []
    mix, zipf = 0.5, 1.0
    group: str | None = None
    current_tpl: GrammarTemplate | None = None

    def weight_split(s: str) -> tuple[str, float | None]:
        if "@" in s:
            head, _, w = s.rpartition("@")
            try:
                return head.strip(), float(w)
            except ValueError as e:
                raise GrammarError(f"bad weight in {s!r}") from e
        return s.strip(), None

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            if line.startswith("mix:"):
                mix = float(line[4:])
            elif line.startswith("zipf:"):
                zipf = float(line[5:])
            elif line.startswith("line:"):
                line_templates.append(line[5:].strip())
            elif line.startswith("group "):
                group = line[6:].strip()
                current_tpl = None
            elif line.startswith("template "):
                head, w = weight_split(line[9:])
                current_tpl = GrammarTemplate(name=head, weight=w if w is not None else 1.0)
                templates.append(current_tpl)
                group = None
            elif current_tpl is not None and ":" in line:
                key, _, value = line.partition(":")
                key, value = key.strip(), value.strip()
                if key == "title":
                    current_tpl.title = value
                elif key == "core":
                    current_tpl.core = [n.strip() for n in value.split(",") if n.strip()]
                elif key == "pick":
                    m = _PICK_RE.match(value)
                    if not m:
                        raise GrammarError(f"bad pick spec {value!r}")
                    current_tpl.picks.append((m.group(1), int(m.group(2)), int(m.group(3))))
                elif key == "opener":
                    current_tpl.openers.append(value)
                elif key == "closer":
                    current_tpl.closers.append(value)
                else:
                    raise GrammarError(f"unknown template key {key!r}")
            elif line.startswith("- "):
                if not ingredients or group is None:
                    raise GrammarError("step template before any ingredient")
                ingredients[-1].steps.append(line[2:].strip())
            elif group is not None:
                head, w = weight_split(line)
                parts = [p.strip() for p in head.split("|")]
                name, aliases = parts[0], tuple(parts[1:])
                ingredients.append(GrammarIngredient(name=name, aliases=aliases,
                                                     group=group, weight=w))
            else:
                raise GrammarError(f"unexpected line {line!r}")
        except GrammarError as e:
            raise GrammarError(f"line {lineno}: {e}") from None
    return GrammarConfig(ingredients, templates, line_templates, mix=mix, zipf=zipf)


def load_grammar(path) -> GrammarConfig:
    with open(path, encoding="utf-8") as f:
        return parse_grammar(f.read())


def default_grammar(zipf_exponent: float | None = None,
                    uniform_mix: float | None = None) -> GrammarConfig:
    """The packaged 50-ingredient grammar, optionally re-skewed."""
    text = importlib.resources.files("recipe_editor.data").joinpath(
        "default_grammar.txt").read_text(encoding="utf-8")
    g = parse_grammar(text)
    if zipf_exponent is not None or uniform_mix is not None:
        g = GrammarConfig(g.ingredients, g.templates, g.line_templates,
                          mix=g.mix if uniform_mix is None else uniform_mix,
                          zipf=g.zipf if zipf_exponent is None else zipf_exponent)
    return g


def generate_synthetic_corpus(grammar: GrammarConfig, n: int, seed: int) -> list[Recipe]:
    """Generate ``n`` recipes. Deterministic given seed; coherent by construction."""
    rng = np.random.default_rng(seed)
    vocab = grammar.vocab()
    id_of = {ing.name: i for i, ing in enumerate(grammar.ingredients)}
    tpl_w = np.array([t.weight for t in grammar.templates], dtype=np.float64)
    tpl_p = tpl_w / tpl_w.sum()
    recipes: list[Recipe] = []
    for k in range(n):
        tpl = grammar.templates[rng.choice(len(grammar.templates), p=tpl_p)]
        chosen = [id_of[name] for name in tpl.core]
        taken = set(chosen)
        extras: list[int] = []
        for group, lo, hi in tpl.picks:
            want = int(rng.integers(lo, hi + 1))
            members, p = grammar.group_probs(group, taken)
            want = min(want, len(members))
            if want:
                picked = rng.choice(len(members), size=want, replace=False, p=p)
                for j in picked:
                    extras.append(members[j])
                    taken.add(members[j])
        extras.sort()
        budget = min(MAX_INGREDIENTS, MAX_INSTRUCTIONS - len(tpl.openers[:1]) - len(tpl.closers[:1]))
        ordered = (chosen + extras)[:budget]

        def pick_alias(ing_id: int) -> str:
            aliases = vocab[ing_id].aliases
            return aliases[rng.integers(len(aliases))]

        title_pool = [i for i in ordered if i in set(extras)] or ordered
        a = vocab[title_pool[rng.integers(len(title_pool))]].canonical_name
        b_pool = [i for i in title_pool if vocab[i].canonical_name != a] or title_pool
        b = vocab[b_pool[rng.integers(len(b_pool))]].canonical_name
        title = tpl.title.replace("{A}", a).replace("{B}", b)

        lines = [grammar.line_templates[rng.integers(len(grammar.line_templates))]
                 .replace("{ING}", pick_alias(i)) for i in ordered]
        steps: list[str] = []
        if tpl.openers:
            steps.append(tpl.openers[rng.integers(len(tpl.openers))])
        for i in ordered:
            tpls = grammar.ingredients[i].steps
            steps.append(tpls[rng.integers(len(tpls))].replace("{ING}", pick_alias(i)))
        if tpl.closers:
            steps.append(tpl.closers[rng.integers(len(tpl.closers))])
        recipes.append(Recipe(f"syn{k:05d}", title, lines, set(ordered), steps))
    return recipes


def coherence_violations(recipes: list[Recipe], vocab: IngredientVocab) -> list[str]:
    """Ids of recipes whose instruction mentions differ from their ingredient set."""
    return [r.id for r in recipes
            if ingredient_mentions(r.instructions, vocab) != r.ingredient_ids]


__all__ = ["GrammarError", "GrammarConfig", "GrammarIngredient", "GrammarTemplate",
           "parse_grammar", "load_grammar", "default_grammar",
           "generate_synthetic_corpus", "coherence_violations"]

import statistics

import pytest

from recipe_editor.corpus import (MAX_INGREDIENTS, MAX_INSTRUCTIONS,
                                  document_frequencies, ingredient_mentions)
from recipe_editor.synthetic import (GrammarError, coherence_violations,
                                     default_grammar, generate_synthetic_corpus,
                                     parse_grammar)

MINI_GRAMMAR = """
mix: 0.5
zipf: 1.0
line: 1 cup {ING}

group veg
tomato | tomatoes
- halve the {ING}
kale
- tear the {ING} into pieces

group base
rice
- steam the {ING}

template bowl @ 2
title: {A} bowl
core: rice
pick: veg 1-2
opener: get everything ready
closer: serve at once

template salad
title: {A} salad
core: kale
pick: veg 0-1
closer: toss and serve
"""


def test_parse_mini_grammar():
    g = parse_grammar(MINI_GRAMMAR)
    assert len(g.ingredients) == 3
    assert len(g.templates) == 2
    assert g.templates[0].weight == 2
    assert g.templates[0].picks == [("veg", 1, 2)]


def test_generation_coherent_and_bounded():
    g = parse_grammar(MINI_GRAMMAR)
    recipes = generate_synthetic_corpus(g, 200, seed=3)
    assert len(recipes) == 200
    assert coherence_violations(recipes, g.vocab()) == []
    for r in recipes:
        assert 1 <= len(r.ingredient_ids) <= MAX_INGREDIENTS
        assert 1 <= len(r.instructions) <= MAX_INSTRUCTIONS


def test_generation_deterministic():
    g = parse_grammar(MINI_GRAMMAR)
    a = generate_synthetic_corpus(g, 50, seed=9)
    b = generate_synthetic_corpus(g, 50, seed=9)
    assert [(r.title, r.ingredient_lines, r.instructions) for r in a] == \
        [(r.title, r.ingredient_lines, r.instructions) for r in b]


def test_zero_recipes():
    g = parse_grammar(MINI_GRAMMAR)
    assert generate_synthetic_corpus(g, 0, seed=1) == []


def test_unknown_core_ingredient_rejected():
    bad = MINI_GRAMMAR.replace("core: rice", "core: plutonium")
    with pytest.raises(GrammarError, match="unknown ingredient"):
        parse_grammar(bad)


def test_unknown_pick_group_rejected():
    bad = MINI_GRAMMAR.replace("pick: veg 1-2", "pick: metals 1-2")
    with pytest.raises(GrammarError, match="unknown group"):
        parse_grammar(bad)


def test_step_without_placeholder_rejected():
    bad = MINI_GRAMMAR.replace("- steam the {ING}", "- steam it")
    with pytest.raises(GrammarError, match="ING"):
        parse_grammar(bad)


def test_contaminated_generic_step_rejected():
    bad = MINI_GRAMMAR.replace("opener: get everything ready",
                               "opener: rinse the kale first")
    with pytest.raises(GrammarError, match="mentions an ingredient"):
        parse_grammar(bad)


def test_step_mentioning_other_ingredient_rejected():
    bad = MINI_GRAMMAR.replace("- steam the {ING}", "- steam the {ING} with kale")
    with pytest.raises(GrammarError, match="mentions"):
        parse_grammar(bad)


def test_default_grammar_coherence_at_scale(grammar, vocab):
    recipes = generate_synthetic_corpus(grammar, 2000, seed=7)
    assert coherence_violations(recipes, vocab) == []
    for r in recipes:
        assert ingredient_mentions(r.instructions, vocab) == r.ingredient_ids


def test_default_grammar_zipf_skew(vocab):
    g = default_grammar(zipf_exponent=1.0)
    recipes = generate_synthetic_corpus(g, 2000, seed=7)
    freq = document_frequencies(recipes, g.vocab())
    assert max(freq) >= 5 * statistics.median(freq)


def test_default_grammar_supports_eval_sampling(grammar, vocab):
    # every ingredient must be frequent enough for 20-per-side eval sampling
    recipes = generate_synthetic_corpus(grammar, 2000, seed=7)
    freq = document_frequencies(recipes, vocab)
    assert min(freq) >= 50

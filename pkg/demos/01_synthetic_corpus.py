"""Generate a synthetic recipe corpus and look at what makes it useful.

The grammar couples every ingredient to instruction steps that mention it, so
each generated recipe's instructions mention exactly its ingredient set. That
property is what lets the editing experiments score coherence against a known
ground truth.

Run: python demos/01_synthetic_corpus.py
"""

import statistics

from recipe_editor.corpus import document_frequencies, ingredient_mentions, split_corpus
from recipe_editor.synthetic import default_grammar, generate_synthetic_corpus

grammar = default_grammar()
vocab = grammar.vocab()
recipes = generate_synthetic_corpus(grammar, n=2000, seed=7)

print(f"generated {len(recipes)} recipes over {len(vocab)} ingredients\n")

r = recipes[0]
print(f"== {r.title} ==")
for line in r.ingredient_lines:
    print(f"  - {line}")
for i, step in enumerate(r.instructions, 1):
    print(f"  {i}) {step}")

mentioned = ingredient_mentions(r.instructions, vocab)
print("\ningredient ids:", sorted(r.ingredient_ids))
print("mentioned in text:", sorted(mentioned))
assert mentioned == r.ingredient_ids, "coherence holds by construction"

freq = document_frequencies(recipes, vocab)
ranked = sorted(zip(freq, [ing.canonical_name for ing in vocab.ingredients]),
                reverse=True)
print("\nmost common:", ranked[:5])
print("least common:", ranked[-5:])
print("top/median skew:", round(max(freq) / statistics.median(freq), 1))

train, val, test = split_corpus(recipes, (0.7, 0.15, 0.15), seed=13)
print(f"\nsplits: {len(train)} train / {len(val)} val / {len(test)} test")

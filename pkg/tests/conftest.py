import numpy as np
import pytest
import torch

from recipe_editor.corpus import Recipe, split_corpus
from recipe_editor.model import ModelConfig, RecipeModel
from recipe_editor.synthetic import default_grammar, generate_synthetic_corpus
from recipe_editor.tokenizer import build_token_vocab
from recipe_editor.training import TrainConfig, train_stage1, train_stage2

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def grammar():
    return default_grammar()


@pytest.fixture(scope="session")
def vocab(grammar):
    return grammar.vocab()


@pytest.fixture(scope="session")
def small_corpus(grammar):
    return generate_synthetic_corpus(grammar, 300, seed=11)


@pytest.fixture(scope="session")
def small_splits(small_corpus):
    return split_corpus(small_corpus, (0.7, 0.15, 0.15), seed=0)


@pytest.fixture(scope="session")
def token_vocab(small_splits):
    return build_token_vocab(small_splits[0], min_freq=1)


@pytest.fixture(scope="session")
def tiny_config(token_vocab, vocab):
    return ModelConfig(token_vocab_size=len(token_vocab),
                       ingredient_vocab_size=len(vocab),
                       hidden_dim=32, num_layers=2, num_heads=2, latent_dim=32,
                       ffn_dim=64, dropout=0.1)


@pytest.fixture()
def tiny_model(tiny_config):
    model = RecipeModel(tiny_config, seed=3)
    model.eval()
    return model


@pytest.fixture(scope="session")
def trained_model(small_splits, token_vocab, tiny_config):
    """A briefly trained model: enough signal for directional critique tests."""
    train, val, _ = small_splits
    model = RecipeModel(tiny_config, seed=1)
    train_stage1(train, val, model, token_vocab,
                 TrainConfig(stage=1, learning_rate=2e-3, max_epochs=6, seed=5))
    train_stage2(train, val, model, token_vocab,
                 TrainConfig(stage=2, learning_rate=2e-3, max_epochs=4, seed=6,
                             mask_ratio=0.0, slot_insert_prob=0.3, slot_drop_prob=0.15))
    model.eval()
    return model


def make_recipe(rid="r1", n_ing=4, n_ins=5, ing_ids=None) -> Recipe:
    return Recipe(rid, f"test recipe {rid}",
                  [f"1 cup thing{i}" for i in range(n_ing)],
                  set(ing_ids if ing_ids is not None else range(n_ing)),
                  [f"do step number {i} carefully" for i in range(n_ins)])


@pytest.fixture()
def rng():
    return np.random.default_rng(0)

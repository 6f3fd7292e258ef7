"""Train the two-stage model at desk scale (about 45 minutes on one CPU core).

Stage 1 fits the encoder + ingredient predictor on noised recipes against the
full ingredient set. Stage 2 freezes the encoder and fits the instruction
decoder with teacher forcing. Artifacts land in ./desk_model/.

Run: python demos/02_train_desk_model.py
"""

import logging
import pathlib

from recipe_editor.corpus import split_corpus
from recipe_editor.model import ModelConfig, RecipeModel, save_checkpoint
from recipe_editor.synthetic import default_grammar, generate_synthetic_corpus
from recipe_editor.tokenizer import build_token_vocab
from recipe_editor.training import TrainConfig, train_stage1, train_stage2

logging.basicConfig(level=logging.INFO, format="%(message)s")
out = pathlib.Path("desk_model")
out.mkdir(exist_ok=True)

grammar = default_grammar()
vocab = grammar.vocab()
recipes = generate_synthetic_corpus(grammar, n=2000, seed=7)
train, val, test = split_corpus(recipes, (0.7, 0.15, 0.15), seed=13)
token_vocab = build_token_vocab(train, min_freq=3, max_size=2000)

cfg = ModelConfig.desk(token_vocab_size=len(token_vocab), ingredient_vocab_size=len(vocab))
model = RecipeModel(cfg, seed=0)

rep1 = train_stage1(train, val, model, token_vocab, TrainConfig(
    stage=1, learning_rate=1e-3, lr_min=1e-4, max_epochs=120, patience_epochs=30,
    seed=101, dropout=0.1, batch_size=16))
print(f"stage 1: best val {rep1.best_val_loss:.3f} at epoch {rep1.best_epoch}, "
      f"val F1 {max(rep1.val_f1):.3f}")
save_checkpoint(model, cfg, token_vocab, vocab, stage=1, path=out / "stage1.ckpt")

rep2 = train_stage2(train, val, model, token_vocab, TrainConfig(
    stage=2, learning_rate=1e-3, lr_min=2e-4, max_epochs=50, patience_epochs=10,
    seed=202, dropout=0.1, batch_size=16, mask_ratio=0.0,
    slot_insert_prob=0.3, slot_drop_prob=0.3))
print(f"stage 2: best val {rep2.best_val_loss:.3f} at epoch {rep2.best_epoch}")
save_checkpoint(model, cfg, token_vocab, vocab, stage=2, path=out / "stage2.ckpt")
vocab.save(out / "ingredients.vocab")
print(f"checkpoints in {out}/")

import json

import pytest

from recipe_editor.cli import dispatch


def test_unknown_flag_exits_1(capsys):
    assert dispatch(["gen-corpus", "--frobnicate"]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_command_exits_1(capsys):
    assert dispatch(["transmogrify"]) == 1


def test_missing_checkpoint_exits_1_and_names_path(tmp_path, capsys):
    recipe = tmp_path / "r.json"
    recipe.write_text("{}")
    code = dispatch(["critique", "--checkpoint", str(tmp_path / "missing.ckpt"),
                     "--vocab", str(tmp_path / "missing.vocab"),
                     "--recipe", str(recipe), "--add", "kale"])
    assert code == 1
    assert "missing.ckpt" in capsys.readouterr().err


def test_gen_corpus_deterministic(tmp_path, capsys):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert dispatch(["gen-corpus", "--n", "40", "--seed", "3", "--out", str(a)]) == 0
    assert dispatch(["gen-corpus", "--n", "40", "--seed", "3", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_corpus_writes_vocab(tmp_path):
    out = tmp_path / "c.jsonl"
    vocab_out = tmp_path / "ing.vocab"
    assert dispatch(["gen-corpus", "--n", "10", "--seed", "1", "--out", str(out),
                     "--vocab-out", str(vocab_out)]) == 0
    lines = vocab_out.read_text().strip().splitlines()
    assert len(lines) == 50
    assert all("\t" in line for line in lines)


def test_build_vocab_names_as_lines(tmp_path, capsys):
    corpus = tmp_path / "c.jsonl"
    rows = [{"title": "t", "ingredients": ["salt", "kale"], "instructions": ["use salt", "use kale"]},
            {"title": "t2", "ingredients": ["salt"], "instructions": ["use salt"]}]
    corpus.write_text("\n".join(json.dumps(r) for r in rows))
    out = tmp_path / "v.vocab"
    assert dispatch(["build-vocab", "--corpus", str(corpus), "--max-size", "10",
                     "--out", str(out)]) == 0
    text = out.read_text()
    assert "salt" in text and "kale" in text


def test_corrupt_checkpoint_exits_1(tmp_path, capsys):
    ckpt = tmp_path / "bad.ckpt"
    ckpt.write_bytes(b"garbage data here")
    vocab = tmp_path / "v.vocab"
    vocab.write_text("salt\tsalt\n")
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(json.dumps({"title": "t", "ingredients": ["salt"],
                                  "instructions": ["use salt"]}) + "\n")
    code = dispatch(["reconstruct", "--checkpoint", str(ckpt), "--vocab", str(vocab),
                     "--corpus", str(corpus)])
    assert code == 1


def test_rq2_bad_criteria_exits_1(tmp_path, trained_model, token_vocab, vocab, capsys):
    from recipe_editor.model import save_checkpoint

    ckpt = tmp_path / "m.ckpt"
    save_checkpoint(trained_model, trained_model.cfg, token_vocab, vocab, 2, ckpt)
    vpath = tmp_path / "v.vocab"
    vocab.save(vpath)
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(json.dumps({"title": "t", "ingredients": ["1 cup salt"],
                                  "instructions": ["season with salt"]}) + "\n")
    code = dispatch(["rq2", "--checkpoint", str(ckpt), "--vocab", str(vpath),
                     "--corpus", str(corpus), "--criteria", "psychic"])
    assert code == 1
    assert "psychic" in capsys.readouterr().err


def test_stage2_requires_init(tmp_path):
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(json.dumps({"title": "t", "ingredients": ["1 cup salt"],
                                  "instructions": ["season with salt"]}) + "\n")
    vocab = tmp_path / "v.vocab"
    vocab.write_text("salt\tsalt\n")
    code = dispatch(["train", "--stage", "2", "--corpus", str(corpus),
                     "--vocab", str(vocab), "--out", str(tmp_path / "o.ckpt")])
    assert code == 1


def test_critique_happy_path_exit_0(tmp_path, trained_model, token_vocab, vocab, capsys):
    from recipe_editor.model import save_checkpoint

    ckpt = tmp_path / "m.ckpt"
    save_checkpoint(trained_model, trained_model.cfg, token_vocab, vocab, 2, ckpt)
    vpath = tmp_path / "v.vocab"
    vocab.save(vpath)
    recipe = {"id": "r", "title": "kale salad",
              "ingredients": ["2 cups kale", "sea salt"],
              "instructions": ["tear the kale", "season with salt", "serve"]}
    rpath = tmp_path / "r.json"
    rpath.write_text(json.dumps(recipe))
    out = tmp_path / "edited.json"
    code = dispatch(["critique", "--checkpoint", str(ckpt), "--vocab", str(vpath),
                     "--recipe", str(rpath), "--add", "lemon", "--out", str(out)])
    assert code == 0
    printed = capsys.readouterr().out
    assert "edited ingredients" in printed
    assert "critique iterations" in printed
    payload = json.loads(out.read_text())
    assert payload["critiques"] == [{"ingredient": vocab.id_of("lemon"),
                                     "direction": "add"}]
    assert payload["trace"]


def test_critique_baseline_flag(tmp_path, trained_model, token_vocab, vocab, capsys):
    from recipe_editor.model import save_checkpoint

    ckpt = tmp_path / "m.ckpt"
    save_checkpoint(trained_model, trained_model.cfg, token_vocab, vocab, 2, ckpt)
    vpath = tmp_path / "v.vocab"
    vocab.save(vpath)
    recipe = {"id": "r", "title": "kale salad",
              "ingredients": ["2 cups kale", "sea salt"],
              "instructions": ["tear the kale", "season with salt"]}
    rpath = tmp_path / "r.json"
    rpath.write_text(json.dumps(recipe))
    code = dispatch(["critique", "--checkpoint", str(ckpt), "--vocab", str(vpath),
                     "--recipe", str(rpath), "--add", "lemon", "--baseline"])
    assert code == 0
    assert "lemon" in capsys.readouterr().out


def test_stage1_checkpoint_rejected_for_rq1(tmp_path, trained_model, token_vocab, vocab):
    from recipe_editor.model import save_checkpoint

    ckpt = tmp_path / "s1.ckpt"
    save_checkpoint(trained_model, trained_model.cfg, token_vocab, vocab, 1, ckpt)
    vpath = tmp_path / "v.vocab"
    vocab.save(vpath)
    corpus = tmp_path / "c.jsonl"
    corpus.write_text(json.dumps({"title": "t", "ingredients": ["1 cup salt"],
                                  "instructions": ["season with salt"]}) + "\n")
    code = dispatch(["rq1", "--checkpoint", str(ckpt), "--vocab", str(vpath),
                     "--corpus", str(corpus)])
    assert code == 1


def test_train_cli_matches_module_call(tmp_path):
    """The train subcommand is a thin wrapper: identical checkpoint bytes."""
    import hashlib

    from recipe_editor.corpus import IngredientVocab, load_jsonl, split_corpus
    from recipe_editor.model import ModelConfig, RecipeModel, save_checkpoint
    from recipe_editor.synthetic import default_grammar, generate_synthetic_corpus
    from recipe_editor.corpus import save_jsonl
    from recipe_editor.tokenizer import build_token_vocab
    from recipe_editor.training import TrainConfig, train_stage1

    grammar = default_grammar()
    vocab = grammar.vocab()
    recipes = generate_synthetic_corpus(grammar, 80, seed=2)
    corpus = tmp_path / "c.jsonl"
    save_jsonl(recipes, corpus)
    vpath = tmp_path / "v.vocab"
    vocab.save(vpath)

    cli_ckpt = tmp_path / "cli.ckpt"
    code = dispatch(["train", "--stage", "1", "--corpus", str(corpus),
                     "--vocab", str(vpath), "--out", str(cli_ckpt),
                     "--epochs", "2", "--lr", "1e-3", "--seed", "5",
                     "--hidden-dim", "32", "--layers", "1", "--heads", "2",
                     "--latent-dim", "32", "--ffn-dim", "64"])
    assert code == 0

    loaded = load_jsonl(corpus, vocab)
    train, val, _ = split_corpus(loaded, (0.7, 0.15, 0.15), seed=13)
    token_vocab = build_token_vocab(train, min_freq=3, max_size=2000)
    cfg = ModelConfig(token_vocab_size=len(token_vocab), ingredient_vocab_size=len(vocab),
                      hidden_dim=32, num_layers=1, num_heads=2, latent_dim=32,
                      ffn_dim=64, dropout=0.2)
    model = RecipeModel(cfg, seed=5)
    train_stage1(train, val, model, token_vocab,
                 TrainConfig(stage=1, learning_rate=1e-3, max_epochs=2, seed=5))
    mod_ckpt = tmp_path / "module.ckpt"
    save_checkpoint(model, cfg, token_vocab, vocab, 1, mod_ckpt)

    assert hashlib.sha256(cli_ckpt.read_bytes()).hexdigest() == \
        hashlib.sha256(mod_ckpt.read_bytes()).hexdigest()


def test_gen_corpus_cli_matches_module_call(tmp_path):
    from recipe_editor.corpus import save_jsonl
    from recipe_editor.synthetic import default_grammar, generate_synthetic_corpus

    out = tmp_path / "cli.jsonl"
    assert dispatch(["gen-corpus", "--n", "25", "--seed", "9", "--out", str(out)]) == 0
    direct = tmp_path / "module.jsonl"
    save_jsonl(generate_synthetic_corpus(default_grammar(), 25, 9), direct)
    assert out.read_bytes() == direct.read_bytes()


def test_rq1_cli_matches_module_call(tmp_path, trained_model, token_vocab, vocab):
    from recipe_editor.corpus import (load_jsonl, sample_eval_set,
                                      save_jsonl, select_critique_targets,
                                      split_corpus)
    from recipe_editor.critique import CritiqueConfig
    from recipe_editor.evaluation import parse_report, run_rq1
    from recipe_editor.model import model_digest, save_checkpoint
    from recipe_editor.synthetic import default_grammar, generate_synthetic_corpus

    grammar = default_grammar()
    recipes = generate_synthetic_corpus(grammar, 300, seed=11)
    corpus = tmp_path / "c.jsonl"
    save_jsonl(recipes, corpus)
    vpath = tmp_path / "v.vocab"
    vocab.save(vpath)
    ckpt = tmp_path / "m.ckpt"
    save_checkpoint(trained_model, trained_model.cfg, token_vocab, vocab, 2, ckpt)

    out = tmp_path / "cli_rq1"
    code = dispatch(["rq1", "--checkpoint", str(ckpt), "--vocab", str(vpath),
                     "--corpus", str(corpus), "--targets", "2", "--n-each", "3",
                     "--min-support", "5", "--seed", "77", "--out", str(out)])
    assert code == 0

    loaded = load_jsonl(corpus, vocab)
    train, val, test = split_corpus(loaded, (0.7, 0.15, 0.15), seed=13)
    targets = select_critique_targets(train, vocab, 2, 5)
    eval_sets = [sample_eval_set(val + test, t, 3, seed=77 + t) for t in targets]
    direct = run_rq1(trained_model, token_vocab, vocab, eval_sets, CritiqueConfig(),
                     77, model_digest(trained_model))
    assert parse_report(f"{out}.jsonl").digest() == direct.digest()

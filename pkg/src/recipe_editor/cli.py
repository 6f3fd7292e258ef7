"""Command-line entry point.

Subcommands: gen-corpus, build-vocab, train, reconstruct, critique, rq1, rq2,
serve. Exit codes: 0 success, 1 invalid input (bad flags, missing files,
failed validation), 2 runtime failure. Every run logs the seed and the config
and checkpoint digests it used.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path

log = logging.getLogger("recipe_editor")


class InputError(Exception):
    """Invalid input detected before real work starts -> exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InputError(message)


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{what} not found: {path}")
    return p


def _digest_of(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str)
                          .encode("utf-8")).hexdigest()[:16]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="recipe-editor",
                     description="Recipe editing with latent critiquing")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-corpus", help="generate a synthetic corpus")
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--grammar", help="grammar file (default: packaged grammar)")
    p.add_argument("--zipf", type=float, default=None, help="override zipf exponent")
    p.add_argument("--out", required=True, help="output recipes JSONL")
    p.add_argument("--vocab-out", help="also write the ingredient vocabulary here")

    p = sub.add_parser("build-vocab", help="build/prune an ingredient vocabulary")
    p.add_argument("--corpus", required=True)
    p.add_argument("--master-vocab", help="existing vocabulary to prune; without it, "
                                          "whole ingredient lines become canonical names")
    p.add_argument("--max-size", type=int, default=1488)
    p.add_argument("--out", required=True)

    p = sub.add_parser("train", help="train stage 1 or stage 2")
    p.add_argument("--stage", type=int, choices=(1, 2), required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--init", help="stage-1 checkpoint to continue from (stage 2)")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--report", help="write the training report JSON here")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=13)
    p.add_argument("--epochs", type=int, default=30)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--dropout", type=float, default=0.2)
    p.add_argument("--mask-ratio", type=float, default=None,
                   help="default: 0.5 for stage 1, 0.0 for stage 2")
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--slot-insert-prob", type=float, default=0.3)
    p.add_argument("--slot-drop-prob", type=float, default=0.3)
    p.add_argument("--hidden-dim", type=int, default=64)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=2)
    p.add_argument("--latent-dim", type=int, default=64)
    p.add_argument("--ffn-dim", type=int, default=512)
    p.add_argument("--lr-min", type=float, default=None,
                   help="cosine-decay floor; omit for a constant rate")
    p.add_argument("--token-vocab-size", type=int, default=2000)

    p = sub.add_parser("reconstruct", help="reconstruction experiment on the test split")
    _eval_flags(p)
    p.add_argument("--mask-ratio", type=float, default=0.5)

    p = sub.add_parser("critique", help="edit one recipe")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--recipe", required=True, help="recipe JSON file")
    p.add_argument("--add", action="append", default=[], metavar="INGREDIENT")
    p.add_argument("--remove", action="append", default=[], metavar="INGREDIENT")
    p.add_argument("--criterion", default="early_stopping",
                   choices=("early_stopping", "local_threshold", "global_l1_threshold"))
    p.add_argument("--baseline", action="store_true",
                   help="use the filtered-decode control instead of critiquing")
    p.add_argument("--out", help="write the edited recipe JSON here")
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("rq1", help="editing experiment: critiquing vs filtered decode")
    _eval_flags(p)
    p.add_argument("--targets", type=int, default=10)
    p.add_argument("--n-each", type=int, default=20)
    p.add_argument("--min-support", type=int, default=50)

    p = sub.add_parser("rq2", help="stopping-criteria ablation")
    _eval_flags(p)
    p.add_argument("--targets", type=int, default=10)
    p.add_argument("--n-each", type=int, default=20)
    p.add_argument("--min-support", type=int, default=50)
    p.add_argument("--criteria", default="all",
                   help="comma list or 'all' (early_stopping,local_threshold,global_l1_threshold)")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--persist-dir")
    p.add_argument("--ui-dir", help="serve a built UI bundle at /ui")
    p.add_argument("--demo", action="store_true",
                   help="preload the bundled demo recipe")
    return parser


def _eval_flags(p):
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--corpus", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--split-seed", type=int, default=13)
    p.add_argument("--out", help="report path stem; writes .jsonl and .txt")
    p.add_argument("--success-mode", default="both", choices=("both", "list", "text"))
    p.add_argument("--alpha0", type=float, default=1.0)
    p.add_argument("--decay", type=float, default=0.9)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--tau", type=float, default=0.1)


def _load_model(args):
    from .corpus import IngredientVocab
    from .model.checkpoint import load_checkpoint, model_digest, restore_model

    ckpt_path = _require_file(args.checkpoint, "checkpoint")
    vocab = IngredientVocab.load(_require_file(args.vocab, "vocabulary"))
    ckpt = load_checkpoint(ckpt_path, vocab)
    model, token_vocab = restore_model(ckpt)
    digest = model_digest(model)
    log.info("checkpoint %s stage=%d digest=%s", args.checkpoint, ckpt.stage, digest[:16])
    return model, token_vocab, vocab, ckpt, digest


def _load_splits(args, vocab):
    from .corpus import load_jsonl, split_corpus

    recipes = load_jsonl(_require_file(args.corpus, "corpus"), vocab)
    if not recipes:
        raise InputError(f"no usable recipes in {args.corpus}")
    return split_corpus(recipes, (0.7, 0.15, 0.15), seed=args.split_seed)


def cmd_gen_corpus(args) -> int:
    from .corpus import save_jsonl
    from .synthetic import (default_grammar, generate_synthetic_corpus,
                            load_grammar)

    grammar = (load_grammar(_require_file(args.grammar, "grammar"))
               if args.grammar else default_grammar(zipf_exponent=args.zipf))
    recipes = generate_synthetic_corpus(grammar, args.n, args.seed)
    save_jsonl(recipes, args.out)
    if args.vocab_out:
        grammar.vocab().save(args.vocab_out)
    log.info("wrote %d recipes to %s (seed %d)", len(recipes), args.out, args.seed)
    print(f"{len(recipes)} recipes -> {args.out}")
    return 0


def cmd_build_vocab(args) -> int:
    from .corpus import (Ingredient, IngredientVocab, build_ingredient_vocab,
                         load_jsonl)

    corpus_path = _require_file(args.corpus, "corpus")
    if args.master_vocab:
        master = IngredientVocab.load(_require_file(args.master_vocab, "master vocabulary"))
    else:
        # names-as-lines mode: every distinct ingredient line is a candidate
        names: dict[str, int] = {}
        with open(corpus_path, encoding="utf-8") as f:
            for line in f:
                if not line.strip():
                    continue
                rec = json.loads(line)
                for raw in rec.get("ingredients", []):
                    name = " ".join(str(raw).lower().split())
                    if name:
                        names.setdefault(name, len(names))
        master = IngredientVocab([Ingredient(i, n, ()) for n, i in names.items()])
    recipes = load_jsonl(corpus_path, master)
    pruned = build_ingredient_vocab(recipes, master, args.max_size)
    pruned.save(args.out)
    print(f"{len(pruned)} ingredients -> {args.out}")
    return 0


def cmd_train(args) -> int:
    from .corpus import IngredientVocab
    from .model.checkpoint import (load_checkpoint, model_digest,
                                   restore_model, save_checkpoint)
    from .model.config import ModelConfig
    from .model.network import RecipeModel
    from .tokenizer import build_token_vocab
    from .training import TrainConfig, train_stage1, train_stage2

    vocab = IngredientVocab.load(_require_file(args.vocab, "vocabulary"))
    train, val, _test = _load_splits(args, vocab)
    mask_ratio = args.mask_ratio if args.mask_ratio is not None else (0.5 if args.stage == 1 else 0.0)
    tc = TrainConfig(stage=args.stage, batch_size=args.batch_size, learning_rate=args.lr,
                     lr_min=args.lr_min,
                     dropout=args.dropout, mask_ratio=mask_ratio, max_epochs=args.epochs,
                     patience_epochs=args.patience, seed=args.seed, threads=args.threads,
                     slot_insert_prob=args.slot_insert_prob if args.stage == 2 else 0.0,
                     slot_drop_prob=args.slot_drop_prob if args.stage == 2 else 0.0)
    log.info("train config digest=%s seed=%d", _digest_of(tc.__dict__), args.seed)

    if args.stage == 1:
        token_vocab = build_token_vocab(train, min_freq=3, max_size=args.token_vocab_size)
        cfg = ModelConfig(token_vocab_size=len(token_vocab),
                          ingredient_vocab_size=len(vocab),
                          hidden_dim=args.hidden_dim, num_layers=args.layers,
                          num_heads=args.heads, latent_dim=args.latent_dim,
                          ffn_dim=args.ffn_dim, dropout=args.dropout)
        model = RecipeModel(cfg, seed=args.seed)
        report = train_stage1(train, val, model, token_vocab, tc)
    else:
        if not args.init:
            raise InputError("stage 2 requires --init with a stage-1 checkpoint")
        ckpt = load_checkpoint(_require_file(args.init, "stage-1 checkpoint"), vocab)
        if ckpt.stage < 1:
            raise InputError(f"{args.init} is not a trained stage-1 checkpoint")
        model, token_vocab = restore_model(ckpt)
        cfg = model.cfg
        report = train_stage2(train, val, model, token_vocab, tc)

    save_checkpoint(model, cfg, token_vocab, vocab, args.stage, args.out)
    report.checkpoint_path = str(args.out)
    if args.report:
        report.save(args.report)
    log.info("checkpoint digest=%s", model_digest(model)[:16])
    print(f"stage {args.stage}: best val {report.best_val_loss:.4f} "
          f"(epoch {report.best_epoch}) -> {args.out}")
    return 0


def _write_report(report, out_stem: str | None, experiment: str) -> None:
    from .evaluation import emit_report

    if not out_stem:
        return
    emit_report(report, f"{out_stem}.jsonl", "machine")
    emit_report(report, f"{out_stem}.txt", "table")
    log.info("%s report -> %s.jsonl / %s.txt", experiment, out_stem, out_stem)


def _print_macro(report) -> None:
    for row in report.macro_rows() or report.rows:
        print(f"{row.criterion:<22} {row.direction:<10} success {row.success_rate:5.1f}%  "
              f"IoU {row.iou:5.1f}  F1 {row.f1:5.1f}  cohF1 {row.coh_f1:5.1f}  "
              f"iters {row.mean_iters:.1f}")


def cmd_reconstruct(args) -> int:
    from .evaluation import run_reconstruction

    model, token_vocab, vocab, _ckpt, digest = _load_model(args)
    _train, _val, test = _load_splits(args, vocab)
    report = run_reconstruction(model, token_vocab, vocab, test, args.mask_ratio,
                                args.seed, digest)
    _write_report(report, args.out, "reconstruction")
    _print_macro(report)
    return 0


def _eval_sets(args, vocab, splits):
    from .corpus import sample_eval_set, select_critique_targets

    train, val, test = splits
    pool = val + test
    targets = select_critique_targets(train, vocab, args.targets, args.min_support)
    return [sample_eval_set(pool, t, args.n_each, seed=args.seed + t) for t in targets]


def cmd_rq1(args) -> int:
    from .critique import CritiqueConfig
    from .evaluation import run_rq1

    model, token_vocab, vocab, ckpt, digest = _load_model(args)
    if ckpt.stage < 2:
        raise InputError("rq1 needs a stage-2 checkpoint (decoder not trained)")
    splits = _load_splits(args, vocab)
    eval_sets = _eval_sets(args, vocab, splits)
    crit_config = CritiqueConfig(alpha0=args.alpha0, decay=args.decay,
                                 patience=args.patience, max_iters=args.max_iters,
                                 threshold=args.tau)
    report = run_rq1(model, token_vocab, vocab, eval_sets, crit_config,
                     args.seed, digest, args.success_mode)
    _write_report(report, args.out, "rq1")
    _print_macro(report)
    return 0


def cmd_rq2(args) -> int:
    from .critique import CRITERIA, CritiqueConfig
    from .evaluation import run_rq2

    model, token_vocab, vocab, ckpt, digest = _load_model(args)
    if ckpt.stage < 2:
        raise InputError("rq2 needs a stage-2 checkpoint (decoder not trained)")
    criteria = list(CRITERIA) if args.criteria == "all" else [
        c.strip() for c in args.criteria.split(",") if c.strip()]
    unknown = [c for c in criteria if c not in CRITERIA]
    if unknown:
        raise InputError(f"unknown criteria: {unknown}; choose from {list(CRITERIA)}")
    splits = _load_splits(args, vocab)
    eval_sets = _eval_sets(args, vocab, splits)
    crit_config = CritiqueConfig(alpha0=args.alpha0, decay=args.decay,
                                 patience=args.patience, max_iters=args.max_iters,
                                 threshold=args.tau)
    report = run_rq2(model, token_vocab, vocab, eval_sets, crit_config,
                     criteria, args.seed, digest, args.success_mode)
    _write_report(report, args.out, "rq2")
    _print_macro(report)
    return 0


def cmd_critique(args) -> int:
    from .corpus import MAX_INGREDIENTS, MAX_INSTRUCTIONS, Recipe, resolve_ingredient_ids
    from .critique import (Critique, CritiqueConfig, edit_recipe,
                           filtered_decode_baseline)

    model, token_vocab, vocab, ckpt, _digest = _load_model(args)
    if ckpt.stage < 2:
        raise InputError("critique needs a stage-2 checkpoint (decoder not trained)")
    with open(_require_file(args.recipe, "recipe"), encoding="utf-8") as f:
        rec = json.load(f)
    lines = [str(x) for x in rec["ingredients"]]
    steps = [str(x) for x in rec["instructions"]]
    if not 1 <= len(lines) <= MAX_INGREDIENTS or not 1 <= len(steps) <= MAX_INSTRUCTIONS:
        raise InputError("recipe violates the 20-ingredient / 20-step bounds")
    ids = resolve_ingredient_ids(lines, vocab)
    if not ids:
        raise InputError("no ingredient line resolves against the vocabulary")
    recipe = Recipe(str(rec.get("id", "cli-recipe")), str(rec["title"]), lines, ids, steps)

    critiques = []
    for name in args.add:
        ing = vocab.resolve(name)
        if ing is None:
            raise InputError(f"cannot resolve ingredient {name!r}")
        critiques.append(Critique(ing, "add"))
    for name in args.remove:
        ing = vocab.resolve(name)
        if ing is None:
            raise InputError(f"cannot resolve ingredient {name!r}")
        critiques.append(Critique(ing, "remove"))
    if not critiques:
        raise InputError("give at least one --add or --remove")

    config = CritiqueConfig(criterion=args.criterion)
    if args.baseline:
        edited = filtered_decode_baseline(model, token_vocab, vocab, recipe, critiques)
    else:
        edited = edit_recipe(model, token_vocab, vocab, recipe, critiques, config)

    names = [vocab[i].canonical_name for i in sorted(edited.ingredient_ids)]
    print(f"edited ingredients: {', '.join(names)}")
    for i, step in enumerate(edited.instructions, 1):
        print(f"{i}) {step}")
    if edited.trace is not None:
        print(f"critique iterations: {edited.trace.iterations} "
              f"({edited.trace.termination})")
    if args.out:
        payload = {"base_id": edited.base_id,
                   "critiques": [{"ingredient": c.ingredient, "direction": c.direction}
                                 for c in edited.critiques],
                   "ingredient_ids": sorted(edited.ingredient_ids),
                   "ingredient_names": names,
                   "instructions": edited.instructions,
                   "trace": edited.trace.to_records() if edited.trace else []}
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(payload, f, indent=2)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .model.checkpoint import model_digest
    from .service import AppState, ModelBundle, create_app

    model, token_vocab, vocab, _ckpt, digest = _load_model(args)
    bundle = ModelBundle(model, token_vocab, vocab, digest)
    state = AppState(vocab, bundle, persist_dir=args.persist_dir)
    if args.demo:
        import importlib.resources

        from .service import RecipeBody

        demo = json.loads(importlib.resources.files("recipe_editor.data")
                          .joinpath("demo_recipe.json").read_text(encoding="utf-8"))
        if demo["id"] not in state.recipes:
            state.add_recipe(RecipeBody(**demo))
        log.info("demo recipe loaded: %s", demo["id"])
    app = create_app(state, ui_dir=args.ui_dir)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


_COMMANDS = {
    "gen-corpus": cmd_gen_corpus,
    "build-vocab": cmd_build_vocab,
    "train": cmd_train,
    "reconstruct": cmd_reconstruct,
    "critique": cmd_critique,
    "rq1": cmd_rq1,
    "rq2": cmd_rq2,
    "serve": cmd_serve,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    logging.basicConfig(
        level=logging.DEBUG if args.verbose > 1 else
        logging.INFO if args.verbose == 1 else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if hasattr(args, "seed"):
        log.info("seed=%d args digest=%s", args.seed,
                 _digest_of({k: v for k, v in vars(args).items() if k != "verbose"}))
    from .model.checkpoint import CheckpointError
    from .synthetic import GrammarError

    try:
        return _COMMANDS[args.command](args)
    except (InputError, CheckpointError, GrammarError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - CLI boundary
        if args.verbose:
            import traceback

            traceback.print_exc()
        print(f"runtime failure: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

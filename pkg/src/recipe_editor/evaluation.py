"""Editing metrics and experiment harnesses.

Metrics follow the editing protocol: success rate (the critiqued ingredient is
properly included/excluded in both the edited list and the generated text),
ingredient fidelity (IoU / F1 between edited and base sets, with the critiqued
ingredient excluded from the comparison), and coherence (precision / recall /
F1 of ingredients mentioned in the generated steps against the predicted
list). Harnesses cover editing (both pipelines), the stopping-criteria
ablation, and reconstruction from noised inputs.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from .corpus import (CritiqueEvalSet, IngredientVocab, Recipe,
                     apply_denoising_noise, ingredient_mentions)
from .critique import (ADD, REMOVE, Critique, CritiqueConfig, EditedRecipe,
                       edit_recipe, filtered_decode_baseline)
from .model.network import RecipeModel
from .tokenizer import TokenVocab

log = logging.getLogger(__name__)


def iou(a: set, b: set) -> float:
    """Intersection over union; both empty counts as 1."""
    if not a and not b:
        return 1.0
    return len(a & b) / len(a | b)


def set_f1(a: set, b: set) -> float:
    """Harmonic mean of |A∩B|/|A| and |A∩B|/|B|; both empty counts as 1."""
    if not a and not b:
        return 1.0
    if not a or not b:
        return 0.0
    inter = len(a & b)
    return 2.0 * inter / (len(a) + len(b))


def coherence_prf(predicted: set[int], instructions: list[str],
                  vocab: IngredientVocab) -> tuple[float, float, float]:
    """P/R/F1 of ingredients mentioned in the text against the predicted set.

    F1 uses the Dice form 2|M∩P| / (|M|+|P|), the single-division equivalent
    of the harmonic mean of precision and recall.
    """
    mentioned = ingredient_mentions(instructions, vocab)
    if not mentioned and not predicted:
        return 1.0, 1.0, 1.0
    inter = len(mentioned & predicted)
    p = inter / len(mentioned) if mentioned else 0.0
    r = inter / len(predicted) if predicted else 0.0
    f1 = 2 * inter / (len(mentioned) + len(predicted))
    return p, r, f1


def success(edited: EditedRecipe, critique: Critique, vocab: IngredientVocab,
            mode: str = "both") -> bool:
    """Did the edit properly include (add) / exclude (remove) the target?

    ``mode`` selects what must agree: the edited ingredient list, the
    generated instruction text, or (default) both.
    """
    if mode not in ("both", "list", "text"):
        raise ValueError(f"unknown success mode {mode!r}")
    in_list = critique.ingredient in edited.ingredient_ids
    in_text = critique.ingredient in ingredient_mentions(edited.instructions, vocab)
    if critique.direction == ADD:
        ok_list, ok_text = in_list, in_text
    else:
        ok_list, ok_text = not in_list, not in_text
    if mode == "list":
        return ok_list
    if mode == "text":
        return ok_text
    return ok_list and ok_text


@dataclass
class MetricsRow:
    experiment: str
    criterion: str          # pipeline or stopping-criterion label
    direction: str          # add | remove
    target_id: int          # -1 for the macro-average row
    n: int
    success_rate: float     # percentages in [0,100]
    iou: float
    f1: float
    coh_p: float
    coh_r: float
    coh_f1: float
    mean_iters: float
    seed: int
    model_digest: str

    def to_record(self) -> dict:
        return asdict(self)


@dataclass
class MetricsReport:
    experiment: str
    rows: list[MetricsRow] = field(default_factory=list)
    seed: int = 0
    config_digest: str = ""

    def macro_rows(self) -> list[MetricsRow]:
        return [r for r in self.rows if r.target_id == -1]

    def macro(self, criterion: str, direction: str) -> MetricsRow:
        for r in self.macro_rows():
            if r.criterion == criterion and r.direction == direction:
                return r
        raise KeyError(f"no macro row for {criterion}/{direction}")

    def digest(self) -> str:
        blob = json.dumps([r.to_record() for r in self.rows], sort_keys=True)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def _aggregate(experiment: str, criterion: str, direction: str, target: int,
               cases: list[dict], seed: int, model_digest: str) -> MetricsRow:
    n = len(cases)

    def mean(key):
        return 100.0 * sum(c[key] for c in cases) / n if n else 0.0

    iters = [c["iters"] for c in cases if c["iters"] is not None]
    return MetricsRow(experiment, criterion, direction, target, n,
                      mean("success"), mean("iou"), mean("f1"),
                      mean("coh_p"), mean("coh_r"), mean("coh_f1"),
                      sum(iters) / len(iters) if iters else 0.0,
                      seed, model_digest)


def _case_metrics(edited: EditedRecipe, base: Recipe, critique: Critique,
                  vocab: IngredientVocab, success_mode: str) -> dict:
    # the forced coordinate is excluded from fidelity so a successful edit
    # is not penalized for the change it was asked to make
    t = {critique.ingredient}
    edited_set = edited.ingredient_ids - t
    base_set = base.ingredient_ids - t
    p, r, f1 = coherence_prf(edited.ingredient_ids, edited.instructions, vocab)
    return {"success": float(success(edited, critique, vocab, success_mode)),
            "iou": iou(edited_set, base_set), "f1": set_f1(edited_set, base_set),
            "coh_p": p, "coh_r": r, "coh_f1": f1,
            "iters": edited.trace.iterations if edited.trace is not None else None}


def _macro_of(experiment, criterion, direction, per_target_rows, seed, digest) -> MetricsRow:
    n = sum(r.n for r in per_target_rows)
    k = max(len(per_target_rows), 1)

    def mean(attr):
        return sum(getattr(r, attr) for r in per_target_rows) / k

    return MetricsRow(experiment, criterion, direction, -1, n,
                      mean("success_rate"), mean("iou"), mean("f1"),
                      mean("coh_p"), mean("coh_r"), mean("coh_f1"),
                      mean("mean_iters"), seed, digest)


def _run_editing(experiment: str, model: RecipeModel, token_vocab: TokenVocab,
                 vocab: IngredientVocab, eval_sets: list[CritiqueEvalSet],
                 pipelines: list[tuple[str, CritiqueConfig | None]],
                 seed: int, model_digest: str, success_mode: str,
                 max_len: int | None) -> MetricsReport:
    report = MetricsReport(experiment=experiment, seed=seed)
    for label, crit_config in pipelines:
        for direction in (ADD, REMOVE):
            per_target = []
            for es in eval_sets:
                critique = Critique(es.target_ingredient, direction)
                recipes = es.negative_recipes if direction == ADD else es.positive_recipes
                cases = []
                for recipe in recipes:
                    if crit_config is None:
                        edited = filtered_decode_baseline(
                            model, token_vocab, vocab, recipe, [critique], max_len)
                    else:
                        edited = edit_recipe(model, token_vocab, vocab, recipe,
                                             [critique], crit_config, max_len)
                    cases.append(_case_metrics(edited, recipe, critique, vocab, success_mode))
                per_target.append(_aggregate(experiment, label, direction,
                                             es.target_ingredient, cases, seed, model_digest))
            report.rows.extend(per_target)
            report.rows.append(_macro_of(experiment, label, direction,
                                         per_target, seed, model_digest))
            log.info("%s %s/%s: success %.1f%%", experiment, label, direction,
                     report.rows[-1].success_rate)
    return report


def run_rq1(model: RecipeModel, token_vocab: TokenVocab, vocab: IngredientVocab,
            eval_sets: list[CritiqueEvalSet], crit_config: CritiqueConfig,
            seed: int, model_digest: str = "", success_mode: str = "both",
            max_len: int | None = None) -> MetricsReport:
    """Editing comparison: latent critiquing vs the filtered-decode control."""
    pipelines = [("critique", crit_config), ("filtered", None)]
    return _run_editing("rq1", model, token_vocab, vocab, eval_sets, pipelines,
                        seed, model_digest, success_mode, max_len)


def run_rq2(model: RecipeModel, token_vocab: TokenVocab, vocab: IngredientVocab,
            eval_sets: list[CritiqueEvalSet], base_config: CritiqueConfig,
            criteria: list[str], seed: int, model_digest: str = "",
            success_mode: str = "both", max_len: int | None = None) -> MetricsReport:
    """Stopping-criteria ablation over the same editing protocol."""
    pipelines = []
    for criterion in criteria:
        cfg = CritiqueConfig(alpha0=base_config.alpha0, decay=base_config.decay,
                             patience=base_config.patience, max_iters=base_config.max_iters,
                             criterion=criterion, threshold=base_config.threshold)
        pipelines.append((criterion, cfg))
    return _run_editing("rq2", model, token_vocab, vocab, eval_sets, pipelines,
                        seed, model_digest, success_mode, max_len)


def majority_sets(train: list[Recipe], test: list[Recipe],
                  n_vocab: int) -> list[set[int]]:
    """Baseline prediction: the k most frequent train ingredients, k = |truth|."""
    freq = np.zeros(n_vocab, dtype=np.int64)
    for r in train:
        for i in r.ingredient_ids:
            freq[i] += 1
    ranked = np.lexsort((np.arange(n_vocab), -freq))
    return [set(int(i) for i in ranked[: len(r.ingredient_ids)]) for r in test]


def run_reconstruction(model: RecipeModel, token_vocab: TokenVocab,
                       vocab: IngredientVocab, test: list[Recipe],
                       mask_ratio: float, seed: int, model_digest: str = "",
                       max_len: int | None = None, chunk: int = 32) -> MetricsReport:
    """Reconstruct noised test recipes; fidelity vs truth, coherence vs prediction."""
    rng = np.random.default_rng(seed)
    noised = [apply_denoising_noise(r, mask_ratio, rng) for r in test]
    cases = []
    for start in range(0, len(test), chunk):
        part = noised[start:start + chunk]
        z = model.encode_recipes(part, token_vocab)
        preds = model.predict_ingredients(z)
        sets = [p.top_set for p in preds]
        decoded = model.decode_instructions(z, sets, token_vocab, max_len)
        for recipe, top, steps in zip(test[start:start + chunk], sets, decoded):
            p, r, f1 = coherence_prf(top, steps, vocab)
            cases.append({"success": 0.0, "iou": iou(top, recipe.ingredient_ids),
                          "f1": set_f1(top, recipe.ingredient_ids),
                          "coh_p": p, "coh_r": r, "coh_f1": f1, "iters": None})
    report = MetricsReport(experiment="reconstruction", seed=seed)
    row = _aggregate("reconstruction", "model", "reconstruct", -1, cases, seed, model_digest)
    report.rows.append(row)
    log.info("reconstruction: IoU %.1f F1 %.1f coherence F1 %.1f",
             row.iou, row.f1, row.coh_f1)
    return report


TABLE_COLUMNS = ["Succ.", "IoU", "F1", "Prec.", "Rec.", "F1"]


def emit_report(report: MetricsReport, path, fmt: str = "machine") -> None:
    """Write a report: ``machine`` = JSON lines, ``table`` = aligned text."""
    if fmt == "machine":
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps({"experiment": report.experiment, "seed": report.seed,
                                "config_digest": report.config_digest}) + "\n")
            for row in report.rows:
                f.write(json.dumps(row.to_record(), sort_keys=True) + "\n")
    elif fmt == "table":
        with open(path, "w", encoding="utf-8") as f:
            header = f"{'Model':<24}{'Dir':<8}" + "".join(f"{c:>8}" for c in TABLE_COLUMNS)
            f.write(header + "\n")
            for row in report.macro_rows() or report.rows:
                cells = [row.success_rate, row.iou, row.f1, row.coh_p, row.coh_r, row.coh_f1]
                f.write(f"{row.criterion:<24}{row.direction:<8}"
                        + "".join(f"{c:>8.1f}" for c in cells) + "\n")
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def parse_report(path) -> MetricsReport:
    """Round-trip parser for the machine format."""
    with open(path, encoding="utf-8") as f:
        lines = [json.loads(line) for line in f if line.strip()]
    head, rows = lines[0], lines[1:]
    report = MetricsReport(experiment=head["experiment"], seed=head["seed"],
                           config_digest=head.get("config_digest", ""))
    report.rows = [MetricsRow(**row) for row in rows]
    return report

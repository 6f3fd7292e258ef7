// A scripted service conversation for the demo tomato-confit recipe: the
// session as created, after an add-kale critique, and the critique response
// itself. Field shapes mirror the service's JSON exactly.

import type { CritiqueResponse, SessionView } from "../src/types";

export const VOCAB = {
  ingredients: [
    { id: 0, name: "salt", aliases: ["salt", "sea salt"] },
    { id: 1, name: "oil", aliases: ["oil", "olive oil"] },
    { id: 2, name: "pepper", aliases: ["pepper", "black pepper"] },
    { id: 6, name: "tomato", aliases: ["tomato", "tomatoes", "cherry tomatoes"] },
    { id: 12, name: "kale", aliases: ["kale"] },
    { id: 31, name: "rosemary", aliases: ["rosemary"] },
    { id: 49, name: "clove", aliases: ["clove", "cloves"] },
  ],
};

const BASE_RECIPE = {
  id: "demo-tomato-confit",
  title: "cherry tomato confit",
  ingredients: [
    "2 cups cherry tomatoes",
    "4 cloves",
    "some fresh rosemary",
    "1 cup olive oil",
    "sea salt",
    "black pepper",
  ],
  ingredient_ids: [0, 1, 2, 6, 31, 49],
  ingredient_names: ["salt", "oil", "pepper", "tomato", "rosemary", "clove"],
  instructions: [
    "heat the oven to 300 degrees",
    "spread the tomatoes on a deep tray",
    "tuck the cloves between the tomatoes",
    "drizzle the oil over the tomatoes",
    "strip the rosemary needles and chop fine",
    "season with salt and a few twists of pepper",
    "bake until the tomatoes wrinkle and smell sweet",
    "cool the tomatoes before storing",
  ],
};

const BASE_STATE = {
  ingredient_ids: [0, 1, 2, 6, 31, 49],
  ingredients: ["salt", "oil", "pepper", "tomato", "rosemary", "clove"],
  instructions: BASE_RECIPE.instructions,
  z_digest: "base-digest-000",
};

export const SESSION_FRESH: SessionView = {
  session_id: "s-demo",
  recipe_id: "demo-tomato-confit",
  critique_config: { alpha0: 1.0, decay: 0.9, patience: 5, max_iters: 100 },
  base_recipe: BASE_RECIPE,
  base: BASE_STATE,
  current: BASE_STATE,
  history: [],
};

const TRACE = [
  { t: 1, alpha: 0.9, loss: 9.31, diffs: { "12": 0.62 }, best_val: 0.62, accepted: true, step_norm: 1.0 },
  { t: 2, alpha: 0.81, loss: 6.12, diffs: { "12": 0.34 }, best_val: 0.34, accepted: true, step_norm: 0.9 },
  { t: 3, alpha: 0.729, loss: 4.02, diffs: { "12": 0.11 }, best_val: 0.11, accepted: true, step_norm: 0.81 },
  { t: 4, alpha: 0.6561, loss: 3.77, diffs: { "12": 0.13 }, best_val: 0.11, accepted: false, step_norm: 0.729 },
];

const EDITED_STATE = {
  ingredient_ids: [0, 1, 2, 6, 12, 31, 49],
  ingredients: ["salt", "oil", "pepper", "tomato", "kale", "rosemary", "clove"],
  instructions: [
    "heat the oven to 300 degrees",
    "spread the tomatoes on a deep tray",
    "tuck the cloves between the tomatoes",
    "drizzle the oil over the tomatoes",
    "strip the rosemary needles and chop fine",
    "season with salt and a few twists of pepper",
    "bake until the tomatoes wrinkle and smell sweet",
    "toss the kale with the warm tomatoes",
    "cool before storing",
  ],
  z_digest: "edited-digest-111",
};

export const SESSION_AFTER_ADD_KALE: SessionView = {
  ...SESSION_FRESH,
  current: EDITED_STATE,
  history: [
    {
      critique: { ingredient: 12, direction: "add" },
      no_op: false,
      from_base: false,
      z_digest: "edited-digest-111",
      trace: TRACE,
    },
  ],
};

export const CRITIQUE_RESPONSE: CritiqueResponse = {
  session_id: "s-demo",
  critique: { ingredient: 12, name: "kale", direction: "add" },
  no_op: false,
  edited: EDITED_STATE,
  success: { list: true, text: true, ok: true },
  fidelity: { iou: 1.0, f1: 1.0 },
  coherence: { precision: 1.0, recall: 1.0, f1: 1.0 },
  trace: TRACE,
  model_digest: "model-digest",
};

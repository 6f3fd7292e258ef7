// Shapes of the service's JSON responses. The client renders these verbatim;
// it never computes latent vectors, losses, or metrics itself.

export interface IngredientInfo {
  id: number;
  name: string;
  aliases: string[];
}

export interface RecipeView {
  id: string;
  title: string;
  ingredients: string[];
  ingredient_ids: number[];
  ingredient_names: string[];
  instructions: string[];
}

export interface StateView {
  ingredient_ids: number[];
  ingredients: string[];
  instructions: string[];
  z_digest: string;
}

export interface TraceRecord {
  t: number;
  alpha: number;
  loss: number;
  diffs: Record<string, number>;
  best_val: number;
  accepted: boolean;
  step_norm: number;
}

export interface HistoryEntry {
  critique: { ingredient: number; direction: "add" | "remove" };
  no_op: boolean;
  from_base: boolean;
  z_digest: string;
  trace: TraceRecord[];
}

export interface SessionView {
  session_id: string;
  recipe_id: string;
  critique_config: Record<string, unknown>;
  base_recipe: RecipeView;
  base: StateView;
  current: StateView;
  history: HistoryEntry[];
}

export interface CritiqueResponse {
  session_id: string;
  critique: { ingredient: number; name: string; direction: "add" | "remove" };
  no_op: boolean;
  edited: StateView;
  success: { list: boolean; text: boolean; ok: boolean };
  fidelity: { iou: number; f1: number };
  coherence: { precision: number; recall: number; f1: number };
  trace: TraceRecord[];
  model_digest: string;
}

export interface ApiError {
  code: string;
  message: string;
}

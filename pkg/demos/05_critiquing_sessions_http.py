"""Drive the HTTP service end to end with scripted calls (no browser needed).

Starts the app in-process, posts the demo recipe, opens a session, applies an
add-kale critique, inspects the optimization trace, and undoes it.

Run: python demos/05_critiquing_sessions_http.py
(or serve for real:  recipe-editor serve --checkpoint desk_model/stage2.ckpt \
     --vocab desk_model/ingredients.vocab --demo --ui-dir frontend/dist)
"""

import importlib.resources
import json
import pathlib

from fastapi.testclient import TestClient

from recipe_editor.corpus import IngredientVocab
from recipe_editor.model import load_checkpoint, model_digest, restore_model
from recipe_editor.service import AppState, ModelBundle, create_app

out = pathlib.Path("desk_model")
vocab = IngredientVocab.load(out / "ingredients.vocab")
model, token_vocab = restore_model(load_checkpoint(out / "stage2.ckpt", vocab))
state = AppState(vocab, ModelBundle(model, token_vocab, vocab, model_digest(model)))
client = TestClient(create_app(state))

print("health:", client.get("/health").json())

demo = json.loads(importlib.resources.files("recipe_editor.data")
                  .joinpath("demo_recipe.json").read_text(encoding="utf-8"))
recipe_id = client.post("/recipes", json=demo).json()["recipe_id"]
session = client.post("/sessions", json={"recipe_id": recipe_id}).json()
sid = session["session_id"]
print("session", sid, "base prediction:",
      session["base_prediction"]["ingredient_names"])

res = client.post(f"/sessions/{sid}/critiques",
                  json={"ingredient": "kale", "direction": "add"}).json()
print("\nafter add-kale:")
print("  ingredients:", res["edited"]["ingredients"])
print("  success:", res["success"], "| coherence F1:",
      round(res["coherence"]["f1"], 3))
print("  trace length:", len(res["trace"]), "| first iteration:",
      {k: res["trace"][0][k] for k in ("t", "alpha", "best_val")})

undone = client.post(f"/sessions/{sid}/undo").json()
print("\nundo -> z digest matches base:",
      undone["current"]["z_digest"] == session["z_digest"])

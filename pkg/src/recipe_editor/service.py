"""HTTP service: model inference plus stateful interactive critiquing sessions.

Each session owns a latent vector that successive critiques refine (the next
critique starts from the current z, so feedback is iterative); ``?from=base``
restarts each critique from the base recipe's encoding instead. History
entries store full state snapshots, so undo restores the prior state exactly
and replaying a session's critiques against its base recipe reproduces the
current z bit for bit.
"""

from __future__ import annotations

import hashlib
import json
import logging
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from fastapi import FastAPI, Query, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse
from pydantic import BaseModel

from .corpus import (MAX_INGREDIENTS, MAX_INSTRUCTIONS, IngredientVocab,
                     Recipe, ingredient_mentions, resolve_ingredient_ids)
from .critique import (ADD, REMOVE, Critique, CritiqueConfig, apply_critiques,
                       removal_mask)
from .evaluation import coherence_prf, iou, set_f1
from .model.network import RecipeModel
from .tokenizer import TokenVocab

log = logging.getLogger(__name__)


class ServiceError(Exception):
    def __init__(self, status: int, code: str, message: str):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message


@dataclass
class SessionState:
    z: np.ndarray
    ingredient_ids: list[int]
    instructions: list[str]

    def digest(self) -> str:
        return hashlib.sha256(self.z.astype(np.float64).tobytes()).hexdigest()

    def to_json(self, vocab: IngredientVocab) -> dict:
        return {"ingredient_ids": self.ingredient_ids,
                "ingredients": [vocab[i].canonical_name for i in self.ingredient_ids],
                "instructions": self.instructions,
                "z_digest": self.digest()}


@dataclass
class HistoryEntry:
    critique: dict
    no_op: bool
    from_base: bool
    state: SessionState
    trace_records: list[dict]
    response: dict


@dataclass
class Session:
    session_id: str
    recipe_id: str
    config: CritiqueConfig
    base_state: SessionState
    history: list[HistoryEntry] = field(default_factory=list)
    created_at: float = field(default_factory=time.time)
    updated_at: float = field(default_factory=time.time)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @property
    def current(self) -> SessionState:
        return self.history[-1].state if self.history else self.base_state


@dataclass
class ModelBundle:
    model: RecipeModel
    token_vocab: TokenVocab
    ingredient_vocab: IngredientVocab
    digest: str


class RecipeBody(BaseModel):
    id: str | None = None
    title: str
    ingredients: list[str]
    instructions: list[str]


class SessionBody(BaseModel):
    recipe_id: str
    critique_config: dict | None = None


class CritiqueBody(BaseModel):
    ingredient: str | int
    direction: str


class AppState:
    def __init__(self, vocab: IngredientVocab, bundle: ModelBundle | None = None,
                 persist_dir: str | None = None,
                 default_config: CritiqueConfig | None = None):
        self.vocab = vocab
        self.bundle = bundle
        self.recipes: dict[str, Recipe] = {}
        self.sessions: dict[str, Session] = {}
        self.registry_lock = threading.Lock()
        self.default_config = default_config or CritiqueConfig()
        self.persist_dir = Path(persist_dir) if persist_dir else None
        if self.persist_dir:
            self.persist_dir.mkdir(parents=True, exist_ok=True)
            self._reload_persisted()

    def _persist(self, kind: str, payload: dict) -> None:
        if not self.persist_dir:
            return
        name = "recipes.jsonl" if kind == "recipe" else "events.jsonl"
        with open(self.persist_dir / name, "a", encoding="utf-8") as f:
            f.write(json.dumps({"kind": kind, **payload}) + "\n")

    def _reload_persisted(self) -> None:
        path = self.persist_dir / "recipes.jsonl"
        if not path.exists():
            return
        with open(path, encoding="utf-8") as f:
            for line in f:
                rec = json.loads(line)
                r = Recipe(rec["id"], rec["title"], rec["ingredients"],
                           set(rec["ingredient_ids"]), rec["instructions"])
                self.recipes[r.id] = r
        log.info("reloaded %d persisted recipes", len(self.recipes))

    def require_model(self) -> ModelBundle:
        if self.bundle is None:
            raise ServiceError(503, "model_not_loaded", "model is not loaded yet")
        return self.bundle

    def add_recipe(self, body: RecipeBody) -> Recipe:
        if not body.ingredients or len(body.ingredients) > MAX_INGREDIENTS:
            raise ServiceError(400, "bad_recipe",
                               f"ingredients must have 1..{MAX_INGREDIENTS} entries")
        if not body.instructions or len(body.instructions) > MAX_INSTRUCTIONS:
            raise ServiceError(400, "bad_recipe",
                               f"instructions must have 1..{MAX_INSTRUCTIONS} entries")
        if not body.title.strip():
            raise ServiceError(400, "bad_recipe", "title must be nonempty")
        ids = resolve_ingredient_ids(body.ingredients, self.vocab)
        if not ids:
            raise ServiceError(422, "unresolvable_ingredients",
                               "no ingredient line matches the vocabulary")
        rid = body.id or f"r-{uuid.uuid4().hex[:12]}"
        with self.registry_lock:
            if rid in self.recipes:
                raise ServiceError(409, "duplicate_recipe", f"recipe {rid!r} already exists")
            recipe = Recipe(rid, body.title, list(body.ingredients), ids,
                            list(body.instructions))
            self.recipes[rid] = recipe
        self._persist("recipe", {"id": rid, "title": recipe.title,
                                 "ingredients": recipe.ingredient_lines,
                                 "ingredient_ids": sorted(ids),
                                 "instructions": recipe.instructions})
        return recipe

    def get_recipe(self, rid: str) -> Recipe:
        recipe = self.recipes.get(rid)
        if recipe is None:
            raise ServiceError(404, "unknown_recipe", f"recipe {rid!r} not found")
        return recipe

    def get_session(self, sid: str) -> Session:
        session = self.sessions.get(sid)
        if session is None:
            raise ServiceError(404, "unknown_session", f"session {sid!r} not found")
        return session


def _session_json(session: Session, state: AppState) -> dict:
    vocab = state.vocab
    recipe = state.recipes[session.recipe_id]
    return {
        "session_id": session.session_id,
        "recipe_id": session.recipe_id,
        "critique_config": session.config.to_dict(),
        "base_recipe": {"id": recipe.id, "title": recipe.title,
                        "ingredients": recipe.ingredient_lines,
                        "ingredient_ids": sorted(recipe.ingredient_ids),
                        "ingredient_names": [vocab[i].canonical_name
                                             for i in sorted(recipe.ingredient_ids)],
                        "instructions": recipe.instructions},
        "base": session.base_state.to_json(vocab),
        "current": session.current.to_json(vocab),
        "history": [{"critique": h.critique, "no_op": h.no_op, "from_base": h.from_base,
                     "z_digest": h.state.digest(), "trace": h.trace_records}
                    for h in session.history],
        "created_at": session.created_at,
        "updated_at": session.updated_at,
    }


def _edited_response(state: AppState, session: Session, critique: Critique,
                     new_state: SessionState, trace_records: list[dict],
                     no_op: bool) -> dict:
    vocab = state.vocab
    bundle = state.require_model()
    edited_ids = set(new_state.ingredient_ids)
    text_mentions = ingredient_mentions(new_state.instructions, vocab)
    mentioned = sorted(edited_ids & text_mentions)
    base_ids = state.recipes[session.recipe_id].ingredient_ids
    in_list = critique.ingredient in edited_ids
    in_text = critique.ingredient in text_mentions
    ok = (in_list and in_text) if critique.direction == ADD else (not in_list and not in_text)
    p, r, f1 = coherence_prf(edited_ids, new_state.instructions, vocab)
    t = {critique.ingredient}
    return {
        "session_id": session.session_id,
        "critique": {"ingredient": critique.ingredient,
                     "name": vocab[critique.ingredient].canonical_name,
                     "direction": critique.direction},
        "no_op": no_op,
        "edited": new_state.to_json(vocab),
        "success": {"list": in_list if critique.direction == ADD else not in_list,
                    "text": in_text if critique.direction == ADD else not in_text,
                    "ok": ok},
        "fidelity": {"iou": iou(edited_ids - t, base_ids - t),
                     "f1": set_f1(edited_ids - t, base_ids - t)},
        "coherence": {"precision": p, "recall": r, "f1": f1},
        "trace": trace_records,
        "mentioned_ids": mentioned,
        "model_digest": bundle.digest,
    }


def create_app(state: AppState, ui_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="recipe-editor", version="0.1.0")

    @app.exception_handler(ServiceError)
    async def service_error(_req: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"code": exc.code, "message": exc.message})

    @app.exception_handler(RequestValidationError)
    async def validation_error(_req: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400,
                            content={"code": "bad_request", "message": str(exc.errors()[:3])})

    @app.exception_handler(ValueError)
    async def value_error(_req: Request, exc: ValueError):
        return JSONResponse(status_code=422, content={"code": "invalid", "message": str(exc)})

    @app.get("/health")
    def health():
        return {"status": "ok" if state.bundle is not None else "loading",
                "model_digest": state.bundle.digest if state.bundle else None}

    @app.get("/vocab/ingredients")
    def vocab_ingredients():
        return {"ingredients": [
            {"id": ing.id, "name": ing.canonical_name, "aliases": list(ing.aliases)}
            for ing in state.vocab.ingredients]}

    @app.post("/recipes", status_code=201)
    def post_recipe(body: RecipeBody):
        recipe = state.add_recipe(body)
        return {"recipe_id": recipe.id,
                "ingredient_ids": sorted(recipe.ingredient_ids),
                "ingredient_names": [state.vocab[i].canonical_name
                                     for i in sorted(recipe.ingredient_ids)]}

    @app.get("/recipes/{rid}")
    def get_recipe(rid: str):
        r = state.get_recipe(rid)
        return {"id": r.id, "title": r.title, "ingredients": r.ingredient_lines,
                "ingredient_ids": sorted(r.ingredient_ids),
                "ingredient_names": [state.vocab[i].canonical_name
                                     for i in sorted(r.ingredient_ids)],
                "instructions": r.instructions}

    @app.get("/recipes")
    def list_recipes():
        return {"recipes": [{"id": r.id, "title": r.title}
                            for r in state.recipes.values()]}

    @app.post("/sessions", status_code=201)
    def post_session(body: SessionBody):
        bundle = state.require_model()
        recipe = state.get_recipe(body.recipe_id)
        try:
            config = CritiqueConfig(**body.critique_config) if body.critique_config else state.default_config
        except (TypeError, ValueError) as e:
            raise ServiceError(400, "bad_config", f"bad critique_config: {e}") from e
        z = bundle.model.encode_recipes([recipe], bundle.token_vocab)[0]
        pred = bundle.model.predict_ingredients(z)[0]
        base_state = SessionState(z.numpy().copy(), sorted(pred.top_set),
                                  list(recipe.instructions))
        session = Session(f"s-{uuid.uuid4().hex[:12]}", recipe.id, config, base_state)
        with state.registry_lock:
            state.sessions[session.session_id] = session
        state._persist("event", {"event": "session_created",
                                 "session_id": session.session_id, "recipe_id": recipe.id})
        return {"session_id": session.session_id,
                "base_prediction": {"ingredient_ids": base_state.ingredient_ids,
                                    "ingredient_names": [state.vocab[i].canonical_name
                                                         for i in base_state.ingredient_ids]},
                "z_digest": base_state.digest(),
                "critique_config": config.to_dict()}

    @app.post("/sessions/{sid}/critiques")
    def post_critique(sid: str, body: CritiqueBody,
                      from_: str | None = Query(default=None, alias="from")):
        bundle = state.require_model()
        session = state.get_session(sid)
        if body.direction not in (ADD, REMOVE):
            raise ServiceError(400, "bad_direction", "direction must be add or remove")
        ing_id = state.vocab.resolve(body.ingredient)
        if ing_id is None:
            raise ServiceError(422, "unresolvable_ingredient",
                               f"cannot resolve ingredient {body.ingredient!r}")
        critique = Critique(ing_id, body.direction)
        with session.lock:
            recipe = state.recipes[session.recipe_id]
            for h in session.history:
                if (h.critique["ingredient"] == ing_id
                        and h.critique["direction"] != body.direction and not h.no_op):
                    raise ServiceError(409, "conflicting_critique",
                                       f"{vocab_name(state, ing_id)} was previously "
                                       f"{h.critique['direction']}ed in this session")
            current = session.current
            present = ing_id in current.ingredient_ids
            if body.direction == REMOVE and not present and ing_id not in recipe.ingredient_ids:
                raise ServiceError(422, "not_present",
                                   f"{vocab_name(state, ing_id)} is not in the current recipe")
            repeated = any(h.critique == {"ingredient": ing_id, "direction": body.direction}
                           for h in session.history)
            satisfied = present if body.direction == ADD else not present
            if repeated and satisfied:
                entry = HistoryEntry(critique={"ingredient": ing_id, "direction": body.direction},
                                     no_op=True, from_base=False, state=current,
                                     trace_records=[],
                                     response=_edited_response(state, session, critique,
                                                               current, [], True))
                session.history.append(entry)
                session.updated_at = time.time()
                return entry.response
            from_base = from_ == "base"
            z_start = _critique_start(state, bundle, session, critique, from_base)
            z_star, trace, _pb, _pa, edited, instructions = apply_critiques(
                bundle.model, bundle.token_vocab, z_start, [critique], session.config)
            new_state = SessionState(z_star.numpy().copy(), sorted(edited), instructions)
            response = _edited_response(state, session, critique, new_state,
                                        trace.to_records(), False)
            response["termination"] = trace.termination
            session.history.append(HistoryEntry(
                critique={"ingredient": ing_id, "direction": body.direction},
                no_op=False, from_base=from_base, state=new_state,
                trace_records=trace.to_records(), response=response))
            session.updated_at = time.time()
        state._persist("event", {"event": "critique", "session_id": sid,
                                 "ingredient": ing_id, "direction": body.direction})
        return response

    @app.post("/sessions/{sid}/undo")
    def post_undo(sid: str):
        session = state.get_session(sid)
        with session.lock:
            if not session.history:
                raise ServiceError(409, "nothing_to_undo", "session has no critiques to undo")
            session.history.pop()
            session.updated_at = time.time()
            state._persist("event", {"event": "undo", "session_id": sid})
            return {"session_id": sid,
                    "current": session.current.to_json(state.vocab),
                    "history_length": len(session.history)}

    @app.get("/sessions/{sid}")
    def get_session(sid: str):
        return _session_json(state.get_session(sid), state)

    if ui_dir:
        ui_path = Path(ui_dir)

        @app.get("/ui")
        def ui_index():
            return FileResponse(ui_path / "index.html")

        @app.get("/ui/{name:path}")
        def ui_asset(name: str):
            target = (ui_path / name).resolve()
            if not str(target).startswith(str(ui_path.resolve())) or not target.is_file():
                raise ServiceError(404, "not_found", f"no asset {name!r}")
            return FileResponse(target)

    return app


def vocab_name(state: AppState, ing_id: int) -> str:
    return state.vocab[ing_id].canonical_name


def _critique_start(state: AppState, bundle: ModelBundle, session: Session,
                    critique: Critique, from_base: bool) -> torch.Tensor:
    """Starting latent vector for a critique.

    Chained (default): the session's current z. A removal whose target comes
    from the base recipe text re-encodes the masked base when the session has
    no prior edits (the paper-style protocol); once edits exist, only the
    latent mechanism is used so they are not discarded. ``from_base`` restarts
    from the base recipe every time.
    """
    recipe = state.recipes[session.recipe_id]
    effective_history = [h for h in session.history if not h.no_op]
    if critique.direction == REMOVE and critique.ingredient in recipe.ingredient_ids \
            and (from_base or not effective_history):
        masked = removal_mask(recipe, {critique.ingredient}, state.vocab)
        return bundle.model.encode_recipes([masked], bundle.token_vocab)[0]
    if from_base or not effective_history:
        return torch.from_numpy(session.base_state.z.copy())
    return torch.from_numpy(session.current.z.copy())

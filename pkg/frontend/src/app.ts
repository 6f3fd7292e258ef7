// DOM wiring: mounts the session view, drives the API client, and enforces
// one in-flight request per session (the composer is disabled while pending).
// The rendered state always comes from the last server response.

import { ApiClient, ServiceError } from "./api";
import { renderBanner, renderSession } from "./render";
import type { IngredientInfo, SessionView } from "./types";

export class App {
  private session: SessionView | null = null;
  private ingredients: IngredientInfo[] = [];
  private names = new Map<number, string>();
  private pending = false;

  constructor(
    private root: HTMLElement,
    private api: ApiClient,
  ) {}

  async start(): Promise<void> {
    this.root.innerHTML = `
      <header>
        <h1>recipe critiquing</h1>
        <div id="banner-slot"></div>
        <div class="controls">
          <select id="recipe-select"></select>
          <button id="open-session">open session</button>
          <input id="recipe-file" type="file" accept="application/json"/>
        </div>
        <div class="composer">
          <input id="ingredient-input" list="ingredient-options"
                 placeholder="ingredient..." autocomplete="off"/>
          <datalist id="ingredient-options"></datalist>
          <label><input type="radio" name="direction" value="add" checked/> add</label>
          <label><input type="radio" name="direction" value="remove"/> remove</label>
          <button id="apply">critique</button>
          <button id="undo">undo</button>
          <span id="composer-error" class="inline-error"></span>
        </div>
      </header>
      <main id="session-root"><p class="empty">open a session to start editing</p></main>`;
    this.bind();
    await this.refreshVocab();
    await this.refreshRecipes();
  }

  private bind(): void {
    this.el("open-session").addEventListener("click", () => {
      void this.guard(() => this.openSession());
    });
    this.el("apply").addEventListener("click", () => {
      void this.guard(() => this.applyCritique());
    });
    this.el("undo").addEventListener("click", () => {
      void this.guard(() => this.undo());
    });
    this.el("recipe-file").addEventListener("change", () => {
      void this.guard(() => this.loadRecipeFile());
    });
    this.el("banner-slot").addEventListener("click", (ev) => {
      if ((ev.target as HTMLElement).dataset.action === "dismiss") {
        this.el("banner-slot").innerHTML = "";
      }
    });
  }

  private el(id: string): HTMLElement {
    const node = this.root.querySelector(`#${id}`);
    if (!node) throw new Error(`missing element #${id}`);
    return node as HTMLElement;
  }

  private input(id: string): HTMLInputElement {
    return this.el(id) as HTMLInputElement;
  }

  /** Serializes UI actions: one request in flight, composer disabled meanwhile. */
  private async guard(action: () => Promise<void>): Promise<void> {
    if (this.pending) return;
    this.pending = true;
    this.setBusy(true);
    this.el("composer-error").textContent = "";
    try {
      await action();
    } catch (err) {
      this.showError(err);
    } finally {
      this.pending = false;
      this.setBusy(false);
    }
  }

  private setBusy(busy: boolean): void {
    for (const id of ["apply", "undo", "open-session"]) {
      (this.el(id) as HTMLButtonElement).disabled = busy;
    }
  }

  private showError(err: unknown): void {
    if (err instanceof ServiceError && err.status === 422) {
      this.el("composer-error").textContent = err.message;
      return;
    }
    const code = err instanceof ServiceError ? err.code : "network_error";
    const message = err instanceof Error ? err.message : String(err);
    this.el("banner-slot").innerHTML = renderBanner(code, message);
  }

  private async refreshVocab(): Promise<void> {
    const body = await this.api.ingredients();
    this.ingredients = body.ingredients;
    this.names = new Map(body.ingredients.map((i) => [i.id, i.name]));
    this.el("ingredient-options").innerHTML = this.ingredients
      .map((i) => `<option value="${i.name}"></option>`)
      .join("");
  }

  private async refreshRecipes(): Promise<void> {
    const body = await this.api.listRecipes();
    this.el("recipe-select").innerHTML = body.recipes
      .map((r) => `<option value="${r.id}">${r.title}</option>`)
      .join("");
  }

  private async openSession(): Promise<void> {
    const recipeId = (this.el("recipe-select") as HTMLSelectElement).value;
    if (!recipeId) throw new Error("no recipe selected");
    const created = await this.api.startSession(recipeId);
    await this.refreshSession(created.session_id);
  }

  private async refreshSession(sessionId: string): Promise<void> {
    this.session = await this.api.getSession(sessionId);
    this.renderCurrent();
  }

  private renderCurrent(): void {
    if (!this.session) return;
    this.el("session-root").innerHTML = renderSession(
      this.session,
      (id) => this.names.get(id) ?? String(id),
    );
  }

  private async applyCritique(): Promise<void> {
    if (!this.session) throw new Error("open a session first");
    const name = this.input("ingredient-input").value.trim();
    if (!name) throw new Error("type an ingredient name");
    const direction = (this.root.querySelector(
      'input[name="direction"]:checked',
    ) as HTMLInputElement).value as "add" | "remove";
    await this.api.applyCritique(this.session.session_id, name, direction);
    await this.refreshSession(this.session.session_id);
  }

  private async undo(): Promise<void> {
    if (!this.session) throw new Error("open a session first");
    await this.api.undo(this.session.session_id);
    await this.refreshSession(this.session.session_id);
  }

  private async loadRecipeFile(): Promise<void> {
    const file = this.input("recipe-file").files?.[0];
    if (!file) return;
    const recipe = JSON.parse(await file.text());
    const created = await this.api.postRecipe(recipe);
    await this.refreshRecipes();
    (this.el("recipe-select") as HTMLSelectElement).value = created.recipe_id;
  }
}

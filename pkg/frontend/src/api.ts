// Thin typed client over the service JSON API. One base-URL setting; every
// method issues exactly one request and returns the parsed body.

import type {
  ApiError,
  CritiqueResponse,
  IngredientInfo,
  SessionView,
  StateView,
} from "./types";

export class ServiceError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

async function parse<T>(res: Response): Promise<T> {
  const body = await res.json().catch(() => ({}) as Record<string, never>);
  if (!res.ok) {
    const err = body as ApiError;
    throw new ServiceError(res.status, err.code ?? "error", err.message ?? res.statusText);
  }
  return body as T;
}

export class ApiClient {
  constructor(
    public baseUrl: string = "",
    private fetcher: typeof fetch = fetch.bind(globalThis),
  ) {}

  private async request<T>(method: string, path: string, body?: unknown): Promise<T> {
    const res = await this.fetcher(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    return parse<T>(res);
  }

  health(): Promise<{ status: string; model_digest: string | null }> {
    return this.request("GET", "/health");
  }

  ingredients(): Promise<{ ingredients: IngredientInfo[] }> {
    return this.request("GET", "/vocab/ingredients");
  }

  listRecipes(): Promise<{ recipes: { id: string; title: string }[] }> {
    return this.request("GET", "/recipes");
  }

  postRecipe(recipe: {
    id?: string;
    title: string;
    ingredients: string[];
    instructions: string[];
  }): Promise<{ recipe_id: string }> {
    return this.request("POST", "/recipes", recipe);
  }

  startSession(recipeId: string): Promise<{ session_id: string; z_digest: string }> {
    return this.request("POST", "/sessions", { recipe_id: recipeId });
  }

  getSession(sessionId: string): Promise<SessionView> {
    return this.request("GET", `/sessions/${sessionId}`);
  }

  applyCritique(
    sessionId: string,
    ingredient: string,
    direction: "add" | "remove",
  ): Promise<CritiqueResponse> {
    return this.request("POST", `/sessions/${sessionId}/critiques`, {
      ingredient,
      direction,
    });
  }

  undo(sessionId: string): Promise<{ current: StateView; history_length: number }> {
    return this.request("POST", `/sessions/${sessionId}/undo`);
  }
}

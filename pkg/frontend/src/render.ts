// Pure view functions: server state in, HTML string out. All rendering goes
// through here so snapshot tests cover exactly what the browser shows; the
// client adds no model math of its own.

import { diffHtml, diffLines, escapeHtml } from "./diff";
import type { SessionView, TraceRecord } from "./types";

export function renderRecipePanel(title: string, ingredients: string[],
                                  instructions: string[]): string {
  const ing = ingredients.map((x) => `<li>${escapeHtml(x)}</li>`).join("");
  const steps = instructions.map((x) => `<li>${escapeHtml(x)}</li>`).join("");
  return [
    `<h3>${escapeHtml(title)}</h3>`,
    `<ul class="ingredients">${ing}</ul>`,
    `<ol class="steps">${steps}</ol>`,
  ].join("\n");
}

export function renderEditedPanel(session: SessionView): string {
  const baseNames = session.base_recipe.ingredient_names.join(", ");
  const currentNames = session.current.ingredients.join(", ");
  const ingredientDiff = diffHtml(baseNames, currentNames);
  const stepRows = diffLines(session.base_recipe.instructions, session.current.instructions)
    .map((html) => `<li>${html}</li>`)
    .join("");
  return [
    `<h3>edited recipe</h3>`,
    `<p class="ingredient-diff">${ingredientDiff}</p>`,
    `<ol class="steps">${stepRows}</ol>`,
  ].join("\n");
}

export type NameOf = (id: number) => string;

export function renderHistory(session: SessionView, nameOf: NameOf): string {
  if (session.history.length === 0) {
    return `<p class="empty">no critiques yet</p>`;
  }
  const items = session.history
    .map((h, i) => {
      const name = escapeHtml(nameOf(h.critique.ingredient));
      const cls = h.critique.direction === "add" ? "add" : "remove";
      const flag = h.no_op ? ` <span class="noop">(no-op)</span>` : "";
      return `<li class="${cls}">#${i + 1} ${h.critique.direction} ${name}${flag}</li>`;
    })
    .join("");
  return `<ol class="history">${items}</ol>`;
}

/** Sparkline of per-iteration |desired - predicted| plus the alpha schedule. */
export function renderTraceChart(trace: TraceRecord[], width = 260, height = 60): string {
  if (trace.length === 0) {
    return `<svg class="trace" width="${width}" height="${height}"></svg>`;
  }
  const diffVals = trace.map((r) => Math.max(...Object.values(r.diffs)));
  const alphaVals = trace.map((r) => r.alpha);
  const step = trace.length > 1 ? width / (trace.length - 1) : 0;
  const y = (v: number, lo: number, hi: number) =>
    hi === lo ? height / 2 : height - ((v - lo) / (hi - lo)) * (height - 4) - 2;
  const path = (vals: number[]) => {
    const lo = Math.min(...vals);
    const hi = Math.max(...vals);
    return vals
      .map((v, i) => `${i === 0 ? "M" : "L"}${(i * step).toFixed(1)},${y(v, lo, hi).toFixed(1)}`)
      .join(" ");
  };
  return [
    `<svg class="trace" width="${width}" height="${height}" viewBox="0 0 ${width} ${height}">`,
    `<path class="diff-line" d="${path(diffVals)}" fill="none"/>`,
    `<path class="alpha-line" d="${path(alphaVals)}" fill="none"/>`,
    `</svg>`,
  ].join("");
}

export function renderBanner(code: string, message: string): string {
  return [
    `<div class="banner error" role="alert">`,
    `<strong>${escapeHtml(code)}</strong> ${escapeHtml(message)}`,
    `<button class="dismiss" data-action="dismiss">×</button>`,
    `</div>`,
  ].join("");
}

export function renderSession(session: SessionView, nameOf: NameOf): string {
  const lastTrace = [...session.history].reverse().find((h) => !h.no_op)?.trace ?? [];
  return [
    `<section class="panel base">`,
    renderRecipePanel(session.base_recipe.title, session.base_recipe.ingredients,
                      session.base_recipe.instructions),
    `</section>`,
    `<section class="panel edited">`,
    renderEditedPanel(session),
    `</section>`,
    `<section class="panel side">`,
    `<h3>history</h3>`,
    renderHistory(session, nameOf),
    `<h3>optimization trace</h3>`,
    renderTraceChart(lastTrace),
    `</section>`,
  ].join("\n");
}

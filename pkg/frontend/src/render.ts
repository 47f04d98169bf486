/**
 * Pure rendering helpers: server schedule -> grid rows -> HTML strings.
 * Row r holds exactly the queries of stage r in pattern order; cell text is
 * taken verbatim from the server response so the grid can be compared
 * byte-for-byte against GET /patterns/{id}/schedule.
 */

import type { PatternSummary, PatternView, ScheduleView } from "./api.js";

export interface GridRow {
  cells: string[];
  /** estimated row time = max rt in the stage, absent when rt is unknown */
  time: number | null;
}

export function renderScheduleGrid(schedule: ScheduleView): GridRow[] {
  return schedule.stage_templates.map((cells, row) => ({
    cells: [...cells],
    time: schedule.stage_times ? (schedule.stage_times[row] ?? null) : null,
  }));
}

export function gridFromPattern(view: PatternView): GridRow[] {
  const times =
    view.node_rt && view.node_rt.every((rt) => rt > 0)
      ? view.stages.map((stage) => Math.max(...stage.map((node) => view.node_rt![node]!)))
      : null;
  return view.stages.map((stage, row) => ({
    cells: stage.map((node) => view.templates[node]!),
    time: times ? (times[row] ?? null) : null,
  }));
}

function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function gridToHtml(rows: GridRow[]): string {
  const body = rows
    .map((row) => {
      const cells = row.cells
        .map((cell) => `<td class="cell">${escapeHtml(cell)}</td>`)
        .join("");
      const time = row.time === null ? "" : ` <span class="time">${row.time.toFixed(4)}s</span>`;
      return `<tr><th class="stage">stage${time}</th>${cells}</tr>`;
    })
    .join("\n");
  return `<table class="schedule-grid">\n${body}\n</table>`;
}

export type SortKey = "support" | "probability";

export function sortPatterns(
  patterns: PatternSummary[],
  key: SortKey,
  descending = true,
): PatternSummary[] {
  const sign = descending ? -1 : 1;
  return [...patterns].sort((a, b) => {
    if (a[key] !== b[key]) return a[key] < b[key] ? sign : -sign;
    return a.id - b.id;
  });
}

export function patternTableHtml(patterns: PatternSummary[]): string {
  if (patterns.length === 0) {
    return `<p class="empty">No patterns discovered yet.</p>`;
  }
  const rows = patterns
    .map(
      (p) =>
        `<tr data-pattern-id="${p.id}"><td>${p.id}</td><td>${escapeHtml(p.group)}</td>` +
        `<td>${p.templates.length}</td><td>${p.support}</td>` +
        `<td>${p.probability.toFixed(4)}</td></tr>`,
    )
    .join("\n");
  return (
    `<table class="patterns"><thead><tr><th>id</th><th>group</th><th>queries</th>` +
    `<th data-sort="support">support</th><th data-sort="probability">probability</th>` +
    `</tr></thead><tbody>\n${rows}\n</tbody></table>`
  );
}

export function depListHtml(deps: [number, number][]): string {
  if (deps.length === 0) return `<p class="empty">No business dependencies.</p>`;
  const items = deps
    .map(
      ([from, to]) =>
        `<li class="dep" data-from="${from}" data-to="${to}">` +
        `${from} &rarr; ${to} <button class="remove-dep">remove</button></li>`,
    )
    .join("\n");
  return `<ul class="deps">\n${items}\n</ul>`;
}

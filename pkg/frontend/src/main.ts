/**
 * Browser bootstrap: pattern table on the left, schedule grid and dependency
 * editor for the selected pattern on the right. All data comes from the
 * pattern API; the server base URL defaults to port 8080 on the same host
 * and can be overridden with ?api=http://host:port.
 */

import { ApiError, PatternApi, type PatternSummary } from "./api.js";
import { PatternController } from "./model.js";
import {
  depListHtml,
  gridToHtml,
  patternTableHtml,
  sortPatterns,
  type SortKey,
} from "./render.js";

const params = new URLSearchParams(window.location.search);
const api = new PatternApi(params.get("api") ?? `http://${window.location.hostname}:8080`);

let summaries: PatternSummary[] = [];
let sortKey: SortKey = "support";
let controller: PatternController | null = null;

const tableHost = document.getElementById("pattern-table")!;
const detailHost = document.getElementById("pattern-detail")!;
const banner = document.getElementById("banner")!;

function showBanner(message: string | null): void {
  banner.textContent = message ?? "";
  banner.classList.toggle("hidden", message === null);
}

function renderTable(): void {
  tableHost.innerHTML = patternTableHtml(sortPatterns(summaries, sortKey));
  tableHost.querySelectorAll("tbody tr").forEach((row) => {
    row.addEventListener("click", () => {
      void selectPattern(Number((row as HTMLElement).dataset.patternId));
    });
  });
  tableHost.querySelectorAll("th[data-sort]").forEach((th) => {
    th.addEventListener("click", () => {
      sortKey = (th as HTMLElement).dataset.sort as SortKey;
      renderTable();
    });
  });
}

function renderDetail(inlineError: string | null = null, conflict = false): void {
  if (!controller?.view) {
    detailHost.innerHTML = `<p class="empty">Select a pattern to inspect its schedule.</p>`;
    return;
  }
  const view = controller.view;
  const messages: string[] = [];
  if (inlineError) messages.push(`<p class="inline-error">Rejected: ${inlineError}</p>`);
  if (conflict) {
    messages.push(`<p class="conflict">Pattern changed elsewhere; showing the latest state. Retry your edit.</p>`);
  }
  detailHost.innerHTML = `
    <h2>Pattern ${view.id} &mdash; ${view.group}</h2>
    <p>support ${view.support}, probability ${view.probability.toFixed(4)},
       model order ${view.model_ord}, theta ${view.theta}</p>
    ${messages.join("\n")}
    ${gridToHtml(controller.grid())}
    <h3>Business dependencies</h3>
    ${depListHtml(view.deps)}
    <form id="add-dep">
      <input name="from" type="number" min="0" placeholder="from" required>
      <input name="to" type="number" min="0" placeholder="to" required>
      <button type="submit">add dependency</button>
    </form>
  `;
  detailHost.querySelectorAll(".remove-dep").forEach((button) => {
    button.addEventListener("click", (event) => {
      const item = (event.target as HTMLElement).closest(".dep") as HTMLElement;
      void edit(Number(item.dataset.from), Number(item.dataset.to), "remove");
    });
  });
  detailHost.querySelector("#add-dep")!.addEventListener("submit", (event) => {
    event.preventDefault();
    const form = event.target as HTMLFormElement;
    const from = Number((form.elements.namedItem("from") as HTMLInputElement).value);
    const to = Number((form.elements.namedItem("to") as HTMLInputElement).value);
    void edit(from, to, "add");
  });
}

async function edit(from: number, to: number, action: "add" | "remove"): Promise<void> {
  if (!controller) return;
  try {
    const result = await controller.editDependency(from, to, action);
    renderDetail(result.inlineError, result.conflict);
  } catch (error) {
    showBanner(error instanceof ApiError ? error.message : `Server unreachable: ${error}`);
  }
}

async function selectPattern(id: number): Promise<void> {
  controller = new PatternController(api, id);
  try {
    await controller.load();
    showBanner(null);
  } catch (error) {
    showBanner(error instanceof ApiError ? error.message : `Server unreachable: ${error}`);
    controller = null;
  }
  renderDetail();
}

async function refresh(): Promise<void> {
  try {
    summaries = await api.listPatterns();
    showBanner(null);
  } catch (error) {
    summaries = [];
    showBanner(`Server unreachable: ${error}`);
  }
  renderTable();
}

document.getElementById("refresh")!.addEventListener("click", () => void refresh());
void refresh();

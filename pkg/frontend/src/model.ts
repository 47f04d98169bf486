/**
 * View-model for one pattern's edit loop.
 *
 * Rules the UI lives by: schedules are never computed locally, every mutation
 * round-trips the version token, a 400 shows its reason inline without
 * touching the grid, and a 409 reloads the pattern and asks the user to
 * retry on fresh state. One mutation may be in flight per pattern.
 */

import { ApiError, PatternApi, type PatternView } from "./api.js";
import { gridFromPattern, type GridRow } from "./render.js";

export type EditAction = "add" | "remove";

export interface EditResult {
  ok: boolean;
  /** inline rejection reason for a 400, null otherwise */
  inlineError: string | null;
  /** true when a 409 forced a reload; the user should re-check and retry */
  conflict: boolean;
}

export class PatternController {
  view: PatternView | null = null;
  connectionError: string | null = null;
  private inFlight = false;

  constructor(
    readonly api: PatternApi,
    readonly patternId: number,
  ) {}

  async load(): Promise<PatternView> {
    try {
      this.view = await this.api.getPattern(this.patternId);
      this.connectionError = null;
      return this.view;
    } catch (error) {
      if (!(error instanceof ApiError)) {
        this.connectionError = String(error);
      }
      throw error;
    }
  }

  grid(): GridRow[] {
    if (!this.view) throw new Error("pattern not loaded");
    return gridFromPattern(this.view);
  }

  async editDependency(from: number, to: number, action: EditAction): Promise<EditResult> {
    if (!this.view) throw new Error("pattern not loaded");
    if (this.inFlight) throw new Error("another edit is already in flight");
    this.inFlight = true;
    try {
      const version = this.view.version;
      const updated =
        action === "add"
          ? await this.api.addDependency(this.patternId, from, to, version)
          : await this.api.removeDependency(this.patternId, from, to, version);
      this.view = updated; // re-render from the server response, never locally
      return { ok: true, inlineError: null, conflict: false };
    } catch (error) {
      if (error instanceof ApiError && error.status === 400) {
        return { ok: false, inlineError: error.message, conflict: false };
      }
      if (error instanceof ApiError && error.status === 409) {
        await this.load();
        return { ok: false, inlineError: null, conflict: true };
      }
      if (!(error instanceof ApiError)) {
        this.connectionError = String(error);
      }
      throw error;
    } finally {
      this.inFlight = false;
    }
  }
}

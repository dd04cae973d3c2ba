/**
 * State machine for the per-URL options dialog.
 *
 * The dialog must distinguish three outcomes of the archive lookup:
 * never indexed (offer "archive it now"), indexed (show capture span and
 * a browse link), and lookup failed (show a retryable error without
 * pretending the URL is unarchived).
 */

import { ApiClient, ApiError, UrlStatus } from "./api.js";

export type UrlStatusState =
  | { kind: "loading"; url: string }
  | { kind: "never_indexed"; url: string }
  | {
      kind: "indexed";
      url: string;
      firstCapture: string;
      lastCapture: string;
    }
  | { kind: "lookup_failed"; url: string; message: string };

export interface DialogAction {
  id: "archive_now" | "browse_captures" | "retry_lookup";
  label: string;
}

export function stateFromResponse(status: UrlStatus): UrlStatusState {
  if (status.status === "indexed") {
    return {
      kind: "indexed",
      url: status.url,
      firstCapture: status.first_capture ?? "",
      lastCapture: status.last_capture ?? "",
    };
  }
  return { kind: "never_indexed", url: status.url };
}

export async function lookupUrlStatus(
  client: ApiClient,
  url: string,
): Promise<UrlStatusState> {
  try {
    return stateFromResponse(await client.getUrlStatus(url));
  } catch (error) {
    const message =
      error instanceof ApiError
        ? `Archive lookup failed (${error.code})`
        : "Archive lookup failed";
    return { kind: "lookup_failed", url, message };
  }
}

/** Which dialog buttons are offered in each state. */
export function availableActions(state: UrlStatusState): DialogAction[] {
  switch (state.kind) {
    case "loading":
      return [];
    case "never_indexed":
      return [{ id: "archive_now", label: "Archive this page now" }];
    case "indexed":
      return [{ id: "browse_captures", label: "Browse captures" }];
    case "lookup_failed":
      return [{ id: "retry_lookup", label: "Retry lookup" }];
  }
}

export function statusLabel(state: UrlStatusState): string {
  switch (state.kind) {
    case "loading":
      return "Checking archive status...";
    case "never_indexed":
      return "Not yet archived";
    case "indexed":
      return `Archived ${state.firstCapture.slice(0, 10)} to ${state.lastCapture.slice(0, 10)}`;
    case "lookup_failed":
      return state.message;
  }
}

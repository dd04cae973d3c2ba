/**
 * Search page state and its round-trippable URL query-string encoding,
 * so searches are shareable links and the back button works.
 */

export interface SearchState {
  query: string;
  mediaType: string | null;
  filters: Record<string, string>; // facet field -> selected value
  page: number;
  pageSize: number;
}

export const FILTER_FIELDS = [
  "group",
  "collector",
  "tag",
  "language",
  "source",
  "creator",
] as const;

export const DEFAULT_PAGE_SIZE = 20;

export function emptySearchState(): SearchState {
  return {
    query: "",
    mediaType: null,
    filters: {},
    page: 1,
    pageSize: DEFAULT_PAGE_SIZE,
  };
}

/** Encode as the exact query string the search endpoint accepts. */
export function encodeSearchState(state: SearchState): string {
  const params = new URLSearchParams();
  if (state.query) params.set("q", state.query);
  if (state.mediaType) params.set("type", state.mediaType);
  for (const field of FILTER_FIELDS) {
    const value = state.filters[field];
    if (value) params.set(field, value);
  }
  if (state.page !== 1) params.set("page", String(state.page));
  if (state.pageSize !== DEFAULT_PAGE_SIZE)
    params.set("page_size", String(state.pageSize));
  return params.toString();
}

export function decodeSearchState(queryString: string): SearchState {
  const params = new URLSearchParams(queryString);
  const state = emptySearchState();
  state.query = params.get("q") ?? "";
  state.mediaType = params.get("type");
  for (const field of FILTER_FIELDS) {
    const value = params.get(field);
    if (value) state.filters[field] = value;
  }
  const page = Number(params.get("page") ?? "1");
  state.page = Number.isInteger(page) && page >= 1 ? page : 1;
  const pageSize = Number(params.get("page_size") ?? String(DEFAULT_PAGE_SIZE));
  state.pageSize =
    Number.isInteger(pageSize) && pageSize >= 1 && pageSize <= 100
      ? pageSize
      : DEFAULT_PAGE_SIZE;
  return state;
}

/** Toggling an active facet clears it; picking a new value resets paging. */
export function toggleFilter(
  state: SearchState,
  field: string,
  value: string,
): SearchState {
  const filters = { ...state.filters };
  if (filters[field] === value) {
    delete filters[field];
  } else {
    filters[field] = value;
  }
  return { ...state, filters, page: 1 };
}

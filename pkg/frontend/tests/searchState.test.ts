import { describe, expect, it } from "vitest";

import {
  decodeSearchState,
  DEFAULT_PAGE_SIZE,
  emptySearchState,
  encodeSearchState,
  FILTER_FIELDS,
  SearchState,
  toggleFilter,
} from "../src/searchState.js";

describe("encode/decode round trip", () => {
  it("round-trips a fully populated state", () => {
    const state: SearchState = {
      query: "human rights",
      mediaType: "image",
      filters: { collector: "Columbia University Libraries", language: "en" },
      page: 3,
      pageSize: 50,
    };
    expect(decodeSearchState(encodeSearchState(state))).toEqual(state);
  });

  it("round-trips the empty state to an empty string", () => {
    expect(encodeSearchState(emptySearchState())).toBe("");
    expect(decodeSearchState("")).toEqual(emptySearchState());
  });

  it("round-trips randomized states", () => {
    let seed = 12345;
    const rand = () => {
      seed = (seed * 1103515245 + 12345) % 2147483648;
      return seed / 2147483648;
    };
    const words = ["climate", "art", "tibet", "a&b", "c d", "ü"];
    for (let trial = 0; trial < 200; trial++) {
      const state = emptySearchState();
      if (rand() < 0.8)
        state.query = words.filter(() => rand() < 0.4).join(" ");
      if (rand() < 0.3) state.mediaType = "image";
      for (const field of FILTER_FIELDS) {
        if (rand() < 0.3)
          state.filters[field] = words[Math.floor(rand() * words.length)]!;
      }
      state.page = 1 + Math.floor(rand() * 5);
      state.pageSize = rand() < 0.5 ? DEFAULT_PAGE_SIZE : 100;
      expect(decodeSearchState(encodeSearchState(state))).toEqual(state);
    }
  });

  it("ignores junk paging values", () => {
    expect(decodeSearchState("q=x&page=-2&page_size=9999")).toEqual({
      ...emptySearchState(),
      query: "x",
    });
  });

  it("preserves url-hostile characters in query and filters", () => {
    const state = {
      ...emptySearchState(),
      query: "a=b&c?d#e",
      filters: { tag: "photo gallery" },
    };
    expect(decodeSearchState(encodeSearchState(state))).toEqual(state);
  });
});

describe("toggleFilter", () => {
  it("sets, replaces, and clears a facet, resetting the page", () => {
    let state = { ...emptySearchState(), page: 4 };
    state = toggleFilter(state, "language", "en");
    expect(state.filters).toEqual({ language: "en" });
    expect(state.page).toBe(1);
    state = toggleFilter({ ...state, page: 2 }, "language", "es");
    expect(state.filters).toEqual({ language: "es" });
    state = toggleFilter(state, "language", "es");
    expect(state.filters).toEqual({});
  });

  it("does not mutate the input state", () => {
    const original = emptySearchState();
    toggleFilter(original, "tag", "x");
    expect(original.filters).toEqual({});
  });
});

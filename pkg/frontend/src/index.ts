export * from "./api.js";
export * from "./timeline.js";
export * from "./urlStatus.js";
export * from "./searchState.js";
export * from "./groupView.js";

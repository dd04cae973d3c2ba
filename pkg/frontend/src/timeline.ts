/**
 * View model for the capture-history timeline: one bar per calendar month
 * between the first and last capture, with heights as fractions of the
 * busiest month. Months without captures render as zero-height bars so
 * gaps stay visible.
 */

import type { Timeline, TimelineBucket } from "./api.js";

export interface TimelineBar {
  month: string; // "YYYY-MM"
  count: number;
  /** 0..1, relative to the busiest month */
  heightFraction: number;
}

export interface TimelineViewModel {
  bars: TimelineBar[];
  totalCaptures: number;
  firstMonth: string | null;
  lastMonth: string | null;
  spanLabel: string;
}

function nextMonth(month: string): string {
  const [y, m] = month.split("-").map(Number) as [number, number];
  return m === 12
    ? `${y + 1}-01`
    : `${y}-${String(m + 1).padStart(2, "0")}`;
}

/** Fill calendar-month gaps between buckets with zero-count bars. */
export function fillMonthGaps(buckets: TimelineBucket[]): TimelineBucket[] {
  if (buckets.length === 0) return [];
  const sorted = [...buckets].sort((a, b) => a.month.localeCompare(b.month));
  const byMonth = new Map(sorted.map((b) => [b.month, b.count]));
  const filled: TimelineBucket[] = [];
  const last = sorted[sorted.length - 1]!.month;
  for (let month = sorted[0]!.month; ; month = nextMonth(month)) {
    filled.push({ month, count: byMonth.get(month) ?? 0 });
    if (month === last) break;
  }
  return filled;
}

export function buildTimelineViewModel(timeline: Timeline): TimelineViewModel {
  const buckets = fillMonthGaps(timeline.buckets);
  const peak = Math.max(0, ...buckets.map((b) => b.count));
  const bars = buckets.map((b) => ({
    month: b.month,
    count: b.count,
    heightFraction: peak === 0 ? 0 : b.count / peak,
  }));
  const totalCaptures = timeline.buckets.reduce((sum, b) => sum + b.count, 0);
  const firstMonth = bars.length ? bars[0]!.month : null;
  const lastMonth = bars.length ? bars[bars.length - 1]!.month : null;
  const spanLabel =
    bars.length === 0
      ? "No captures"
      : `${totalCaptures} captures, ${firstMonth} to ${lastMonth}`;
  return { bars, totalCaptures, firstMonth, lastMonth, spanLabel };
}

import type { DetectionFeature, DetectionFilters } from "./types.js";

export const SEVERITY_LEVELS = ["S1", "S2", "S3", "S4", "S5"] as const;
export const VERDICTS = ["pending", "accepted", "rejected"] as const;

/**
 * Apply exact-match filters to a detection list. Semantics mirror the
 * server's query parameters: a feature passes only when every set field
 * equals the feature's value, and severity never matches detections
 * that carry no severity at all.
 */
export function applyFilters(
  features: DetectionFeature[],
  filters: DetectionFilters,
): DetectionFeature[] {
  return features.filter((f) => {
    const p = f.properties;
    if (filters.class !== undefined && p.class !== filters.class) return false;
    if (filters.severity !== undefined && p.severity !== filters.severity) return false;
    if (filters.verdict !== undefined && p.verdict !== filters.verdict) return false;
    return true;
  });
}

/** Distinct defect classes present, sorted for stable menus. */
export function classesPresent(features: DetectionFeature[]): string[] {
  const seen = new Set<string>();
  for (const f of features) seen.add(f.properties.class);
  return [...seen].sort();
}

/** Distinct severities present, in S1..S5 order. */
export function severitiesPresent(features: DetectionFeature[]): string[] {
  const seen = new Set<string>();
  for (const f of features) {
    if (f.properties.severity !== null) seen.add(f.properties.severity);
  }
  return SEVERITY_LEVELS.filter((s) => seen.has(s));
}

/** Shapes returned by the inspection server's JSON endpoints. */

export type Verdict = "pending" | "accepted" | "rejected";

export interface RatingLetters {
  operating: string;
  temperature: string;
  equipment: string;
}

export interface SiteSummary {
  site_id: string;
  capacity_mw_dc: number;
  n_panels: number;
  n_uninspectable: number;
  or_ratio: number;
  c_defect_mw: number;
  delta_t_max_c: number;
  apm: number;
  a_total: number;
  rating: string;
  letters: RatingLetters;
  power_loss_mw_dc: number;
  revenue_loss_usd: number;
  site_baseline_c: number;
  counts_by_class: Record<string, number>;
  counts_by_severity: Record<string, number>;
  n_counted: number;
  n_rejected: number;
  estimation_basis: string;
  [extra: string]: unknown;
}

export interface DetectionProperties {
  id: string;
  class: string;
  confidence: number;
  delta_t: number | null;
  severity: string | null;
  panel_ids: string[];
  source: string;
  verdict: Verdict;
  note: string;
  severity_band: string;
  color: string;
  loss_mw: number;
  loss_usd: number;
}

export interface DetectionFeature {
  type: "Feature";
  id: string;
  geometry: { type: "Polygon"; coordinates: number[][][] };
  properties: DetectionProperties;
}

export interface DetectionCollection {
  type: "FeatureCollection";
  projected_crs: string;
  features: DetectionFeature[];
}

export interface MercatorBounds {
  x_min: number;
  y_min: number;
  x_max: number;
  y_max: number;
}

export interface SiteMeta {
  site_id: string;
  layers: string[];
  /** Null when the server was started without imagery layers. */
  mercator_bounds: MercatorBounds | null;
  crs: string;
}

export interface VerdictResponse {
  id: string;
  verdict: Verdict;
  note: string;
  summary: SiteSummary;
}

export interface DetectionFilters {
  class?: string;
  severity?: string;
  verdict?: Verdict;
}

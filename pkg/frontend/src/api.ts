import type {
  DetectionCollection,
  DetectionFilters,
  SiteMeta,
  SiteSummary,
  Verdict,
  VerdictResponse,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly path: string,
    detail: string,
  ) {
    super(`${status} ${path}: ${detail}`);
    this.name = "ApiError";
  }
}

/** Thin client for the inspection server's review endpoints. */
export class ApiClient {
  private readonly base: string;

  constructor(baseUrl: string) {
    this.base = baseUrl.replace(/\/+$/, "");
  }

  async site(): Promise<SiteSummary> {
    return this.getJson<SiteSummary>("/api/site");
  }

  async meta(): Promise<SiteMeta> {
    return this.getJson<SiteMeta>("/api/meta");
  }

  async detections(filters: DetectionFilters = {}): Promise<DetectionCollection> {
    const params = new URLSearchParams();
    if (filters.class !== undefined) params.set("class", filters.class);
    if (filters.severity !== undefined) params.set("severity", filters.severity);
    if (filters.verdict !== undefined) params.set("verdict", filters.verdict);
    const query = params.toString();
    return this.getJson<DetectionCollection>(
      query ? `/api/detections?${query}` : "/api/detections",
    );
  }

  async setVerdict(id: string, verdict: Verdict, note = ""): Promise<VerdictResponse> {
    const path = `/api/detections/${encodeURIComponent(id)}/verdict`;
    const resp = await fetch(this.base + path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ verdict, note }),
    });
    if (!resp.ok) {
      throw new ApiError(resp.status, path, await resp.text());
    }
    return (await resp.json()) as VerdictResponse;
  }

  tileUrl(layer: string, z: number, x: number, y: number): string {
    return `${this.base}/tiles/${layer}/${z}/${x}/${y}.png`;
  }

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.base + path);
    if (!resp.ok) {
      throw new ApiError(resp.status, path, await resp.text());
    }
    return (await resp.json()) as T;
  }
}

import { ApiClient } from "./api.js";
import { applyFilters, classesPresent, SEVERITY_LEVELS, VERDICTS } from "./filters.js";
import { MapView } from "./map.js";
import { boundsOfFeatures } from "./mercator.js";
import { SidePanel } from "./panel.js";
import type {
  DetectionFeature,
  DetectionFilters,
  SiteMeta,
  SiteSummary,
  Verdict,
  VerdictResponse,
} from "./types.js";

export interface ConsoleOptions {
  mapWidth?: number;
  mapHeight?: number;
}

const ALL = "__all__";

/**
 * Review console controller. Owns the toolbar, map and side pane, and
 * routes every verdict through the server so the displayed rating is
 * always the server's own recomputation, never a local estimate.
 */
export class ReviewConsole {
  readonly api: ApiClient;
  readonly map: MapView;
  readonly panel: SidePanel;

  private meta!: SiteMeta;
  private summary!: SiteSummary;
  private allFeatures: DetectionFeature[] = [];
  private filters: DetectionFilters = {};
  private selectedId: string | null = null;

  private readonly layerBar: HTMLDivElement;
  private readonly severitySelect: HTMLSelectElement;
  private readonly classSelect: HTMLSelectElement;
  private readonly verdictSelect: HTMLSelectElement;

  constructor(
    readonly root: HTMLElement,
    baseUrl: string,
    options: ConsoleOptions = {},
  ) {
    this.api = new ApiClient(baseUrl);
    root.classList.add("console");

    const toolbar = document.createElement("div");
    toolbar.className = "toolbar";
    this.layerBar = document.createElement("div");
    this.layerBar.className = "layer-bar";
    this.severitySelect = buildSelect("severity-filter", "All severities");
    this.classSelect = buildSelect("class-filter", "All classes");
    this.verdictSelect = buildSelect("verdict-filter", "All verdicts");
    toolbar.append(this.layerBar, this.severitySelect, this.classSelect, this.verdictSelect);

    const body = document.createElement("div");
    body.className = "console-body";
    const mapHost = document.createElement("div");
    const panelHost = document.createElement("div");
    body.append(mapHost, panelHost);
    root.append(toolbar, body);

    this.map = new MapView(mapHost, {
      width: options.mapWidth,
      height: options.mapHeight,
      tileUrl: (layer, z, x, y) => this.api.tileUrl(layer, z, x, y),
      onSelect: (id) => this.select(id),
    });
    this.panel = new SidePanel(panelHost, {
      onVerdict: (id, verdict) => void this.setVerdict(id, verdict),
    });

    this.severitySelect.addEventListener("change", () => this.readFilterControls());
    this.classSelect.addEventListener("change", () => this.readFilterControls());
    this.verdictSelect.addEventListener("change", () => this.readFilterControls());
  }

  /** Load metadata, summary and detections, then draw everything. */
  async init(): Promise<void> {
    this.meta = await this.api.meta();
    this.summary = await this.api.site();
    const collection = await this.api.detections();
    this.allFeatures = collection.features;

    this.buildLayerButtons();
    fillSelect(this.severitySelect, [...SEVERITY_LEVELS]);
    fillSelect(this.classSelect, classesPresent(this.allFeatures));
    fillSelect(this.verdictSelect, [...VERDICTS]);

    this.map.fitTo(this.meta.mercator_bounds ?? boundsOfFeatures(this.allFeatures));
    this.map.setFeatures(applyFilters(this.allFeatures, this.filters));
    this.panel.renderSummary(this.summary);
    this.panel.renderDetail(null);
  }

  get currentSummary(): SiteSummary {
    return this.summary;
  }

  get currentFilters(): DetectionFilters {
    return { ...this.filters };
  }

  setFilters(filters: DetectionFilters): void {
    this.filters = { ...filters };
    this.syncFilterControls();
    this.map.setFeatures(applyFilters(this.allFeatures, this.filters));
  }

  setLayer(layer: string): void {
    this.map.setLayer(layer);
    for (const node of this.layerBar.children) {
      const pressed = node.getAttribute("data-layer") === layer;
      node.setAttribute("aria-pressed", String(pressed));
    }
  }

  select(id: string | null): void {
    this.selectedId = id;
    this.map.setSelected(id);
    this.panel.renderDetail(this.findFeature(id));
  }

  /**
   * Post a verdict and refresh the pane from the response summary, so
   * the numbers on screen are exactly what the server computed.
   */
  async setVerdict(id: string, verdict: Verdict, note = ""): Promise<VerdictResponse> {
    const resp = await this.api.setVerdict(id, verdict, note);
    const feature = this.findFeature(id);
    if (feature !== null) {
      feature.properties.verdict = resp.verdict;
      feature.properties.note = resp.note;
    }
    this.summary = resp.summary;
    this.panel.renderSummary(this.summary);
    this.map.setFeatures(applyFilters(this.allFeatures, this.filters));
    if (this.selectedId === id) {
      this.panel.renderDetail(feature);
    }
    return resp;
  }

  private findFeature(id: string | null): DetectionFeature | null {
    if (id === null) return null;
    return this.allFeatures.find((f) => f.properties.id === id) ?? null;
  }

  private buildLayerButtons(): void {
    this.layerBar.replaceChildren();
    for (const layer of this.meta.layers) {
      const button = document.createElement("button");
      button.type = "button";
      button.textContent = layer.toUpperCase();
      button.setAttribute("data-layer", layer);
      button.setAttribute("aria-pressed", String(layer === this.map.currentLayer));
      button.addEventListener("click", () => this.setLayer(layer));
      this.layerBar.append(button);
    }
  }

  private readFilterControls(): void {
    const pick = (el: HTMLSelectElement) => (el.value === ALL ? undefined : el.value);
    this.setFilters({
      severity: pick(this.severitySelect),
      class: pick(this.classSelect),
      verdict: pick(this.verdictSelect) as Verdict | undefined,
    });
  }

  private syncFilterControls(): void {
    this.severitySelect.value = this.filters.severity ?? ALL;
    this.classSelect.value = this.filters.class ?? ALL;
    this.verdictSelect.value = this.filters.verdict ?? ALL;
  }
}

export async function createConsole(
  root: HTMLElement,
  baseUrl: string,
  options: ConsoleOptions = {},
): Promise<ReviewConsole> {
  const console_ = new ReviewConsole(root, baseUrl, options);
  await console_.init();
  return console_;
}

function buildSelect(name: string, allLabel: string): HTMLSelectElement {
  const select = document.createElement("select");
  select.setAttribute("data-control", name);
  const option = document.createElement("option");
  option.value = ALL;
  option.textContent = allLabel;
  select.append(option);
  return select;
}

function fillSelect(select: HTMLSelectElement, values: string[]): void {
  while (select.options.length > 1) {
    select.remove(1);
  }
  for (const value of values) {
    const option = document.createElement("option");
    option.value = value;
    option.textContent = value;
    select.append(option);
  }
}

const appRoot = document.getElementById("app");
if (appRoot !== null) {
  void createConsole(appRoot, window.location.origin);
}

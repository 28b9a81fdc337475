import {
  boundsCenter,
  lonLatToMercator,
  mercatorToPixel,
  TILE_SIZE,
  visibleTiles,
  zoomToFit,
  type MercatorPoint,
} from "./mercator.js";
import type { DetectionFeature, MercatorBounds } from "./types.js";

const SVG_NS = "http://www.w3.org/2000/svg";

export interface MapViewOptions {
  /** Viewport size in CSS pixels; fixed so layout needs no measurement. */
  width?: number;
  height?: number;
  tileUrl: (layer: string, z: number, x: number, y: number) => string;
  onSelect?: (id: string | null) => void;
}

/**
 * Slippy-map widget with an image tile pane and an SVG overlay of
 * detection polygons. Switching the base layer replaces only the tile
 * images; overlay nodes are left untouched so review state survives.
 */
export class MapView {
  private readonly width: number;
  private readonly height: number;
  private readonly tileUrl: MapViewOptions["tileUrl"];
  private readonly onSelect: (id: string | null) => void;
  private readonly tilePane: HTMLDivElement;
  private readonly overlayPane: SVGSVGElement;

  private layer = "ir";
  private zoom = 0;
  private center: MercatorPoint = { x: 0, y: 0 };
  private features: DetectionFeature[] = [];
  private selectedId: string | null = null;

  constructor(
    readonly container: HTMLElement,
    options: MapViewOptions,
  ) {
    this.width = options.width ?? 800;
    this.height = options.height ?? 600;
    this.tileUrl = options.tileUrl;
    this.onSelect = options.onSelect ?? (() => {});

    container.classList.add("map-viewport");
    container.style.position = "relative";
    container.style.overflow = "hidden";
    container.style.width = `${this.width}px`;
    container.style.height = `${this.height}px`;

    this.tilePane = document.createElement("div");
    this.tilePane.className = "tile-pane";
    this.tilePane.style.position = "absolute";
    this.tilePane.style.inset = "0";

    this.overlayPane = document.createElementNS(SVG_NS, "svg");
    this.overlayPane.setAttribute("class", "overlay-pane");
    this.overlayPane.setAttribute("width", String(this.width));
    this.overlayPane.setAttribute("height", String(this.height));
    this.overlayPane.style.position = "absolute";
    this.overlayPane.style.inset = "0";

    container.append(this.tilePane, this.overlayPane);
  }

  get currentLayer(): string {
    return this.layer;
  }

  get currentZoom(): number {
    return this.zoom;
  }

  /** Center the view on the site and pick the tightest zoom that fits. */
  fitTo(bounds: MercatorBounds): void {
    this.center = boundsCenter(bounds);
    this.zoom = zoomToFit(bounds, this.width, this.height);
    this.renderTiles();
    this.renderOverlay();
  }

  /** Swap the base imagery; the overlay pane is not rebuilt. */
  setLayer(layer: string): void {
    if (layer === this.layer) return;
    this.layer = layer;
    this.renderTiles();
  }

  setFeatures(features: DetectionFeature[]): void {
    this.features = features;
    this.renderOverlay();
  }

  setSelected(id: string | null): void {
    this.selectedId = id;
    for (const node of this.overlayPane.children) {
      node.classList.toggle("selected", node.getAttribute("data-id") === id);
    }
  }

  overlayIds(): string[] {
    const ids: string[] = [];
    for (const node of this.overlayPane.children) {
      const id = node.getAttribute("data-id");
      if (id !== null) ids.push(id);
    }
    return ids;
  }

  tileSources(): string[] {
    const urls: string[] = [];
    for (const node of this.tilePane.children) {
      const src = node.getAttribute("src");
      if (src !== null) urls.push(src);
    }
    return urls;
  }

  /** The overlay SVG element itself, for persistence checks. */
  overlayElement(): SVGSVGElement {
    return this.overlayPane;
  }

  private viewOrigin(): MercatorPoint {
    const px = mercatorToPixel(this.center, this.zoom);
    return { x: px.x - this.width / 2, y: px.y - this.height / 2 };
  }

  private renderTiles(): void {
    const origin = this.viewOrigin();
    const range = visibleTiles(this.center, this.zoom, this.width, this.height);
    this.tilePane.replaceChildren();
    for (let ty = range.yMin; ty <= range.yMax; ty++) {
      for (let tx = range.xMin; tx <= range.xMax; tx++) {
        const img = document.createElement("img");
        img.className = "tile";
        img.width = TILE_SIZE;
        img.height = TILE_SIZE;
        img.src = this.tileUrl(this.layer, range.z, tx, ty);
        img.style.position = "absolute";
        img.style.left = `${tx * TILE_SIZE - origin.x}px`;
        img.style.top = `${ty * TILE_SIZE - origin.y}px`;
        this.tilePane.append(img);
      }
    }
  }

  private renderOverlay(): void {
    const origin = this.viewOrigin();
    this.overlayPane.replaceChildren();
    for (const feature of this.features) {
      const ring = feature.geometry.coordinates[0] ?? [];
      const points = ring
        .map(([lon, lat]) => {
          const px = mercatorToPixel(lonLatToMercator(lon, lat), this.zoom);
          return `${(px.x - origin.x).toFixed(1)},${(px.y - origin.y).toFixed(1)}`;
        })
        .join(" ");
      const poly = document.createElementNS(SVG_NS, "polygon");
      poly.setAttribute("points", points);
      poly.setAttribute("data-id", feature.properties.id);
      poly.setAttribute("data-class", feature.properties.class);
      poly.setAttribute("data-severity", feature.properties.severity ?? "");
      poly.setAttribute("fill", feature.properties.color);
      poly.setAttribute("fill-opacity", "0.25");
      poly.setAttribute("stroke", feature.properties.color);
      poly.setAttribute("stroke-width", "1.5");
      if (feature.properties.id === this.selectedId) {
        poly.classList.add("selected");
      }
      poly.addEventListener("click", () => this.onSelect(feature.properties.id));
      this.overlayPane.append(poly);
    }
  }
}

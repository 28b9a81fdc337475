import type { MercatorBounds } from "./types.js";

export const EARTH_HALF = 20037508.342789244;
export const TILE_SIZE = 256;

export interface MercatorPoint {
  x: number;
  y: number;
}

export interface TileAddress {
  z: number;
  x: number;
  y: number;
}

export interface TileRange {
  z: number;
  xMin: number;
  xMax: number;
  yMin: number;
  yMax: number;
}

/** Project a WGS84 lon/lat pair into web mercator meters. */
export function lonLatToMercator(lon: number, lat: number): MercatorPoint {
  const x = (lon / 180) * EARTH_HALF;
  const rad = (lat * Math.PI) / 180;
  const y = (Math.log(Math.tan(Math.PI / 4 + rad / 2)) / Math.PI) * EARTH_HALF;
  return { x, y };
}

/** World size in pixels at a zoom level. */
export function worldPixels(z: number): number {
  return TILE_SIZE * 2 ** z;
}

/**
 * Map mercator meters to global pixel coordinates at zoom z.
 * Pixel origin is the top-left corner of tile (0, 0).
 */
export function mercatorToPixel(p: MercatorPoint, z: number): MercatorPoint {
  const world = worldPixels(z);
  return {
    x: ((p.x + EARTH_HALF) / (2 * EARTH_HALF)) * world,
    y: ((EARTH_HALF - p.y) / (2 * EARTH_HALF)) * world,
  };
}

/** Tile containing a mercator point at zoom z. */
export function mercatorToTile(p: MercatorPoint, z: number): TileAddress {
  const px = mercatorToPixel(p, z);
  return {
    z,
    x: Math.floor(px.x / TILE_SIZE),
    y: Math.floor(px.y / TILE_SIZE),
  };
}

export function boundsCenter(b: MercatorBounds): MercatorPoint {
  return { x: (b.x_min + b.x_max) / 2, y: (b.y_min + b.y_max) / 2 };
}

interface HasPolygon {
  geometry: { coordinates: number[][][] };
}

/**
 * Mercator bounds enclosing a set of lon/lat polygon features. Used to
 * frame the view when the server has no imagery layers to take bounds
 * from. Falls back to the whole world for an empty set.
 */
export function boundsOfFeatures(features: HasPolygon[]): MercatorBounds {
  let xMin = Infinity;
  let yMin = Infinity;
  let xMax = -Infinity;
  let yMax = -Infinity;
  for (const feature of features) {
    for (const ring of feature.geometry.coordinates) {
      for (const [lon, lat] of ring) {
        const p = lonLatToMercator(lon, lat);
        xMin = Math.min(xMin, p.x);
        yMin = Math.min(yMin, p.y);
        xMax = Math.max(xMax, p.x);
        yMax = Math.max(yMax, p.y);
      }
    }
  }
  if (xMin > xMax) {
    return { x_min: -EARTH_HALF, y_min: -EARTH_HALF, x_max: EARTH_HALF, y_max: EARTH_HALF };
  }
  return { x_min: xMin, y_min: yMin, x_max: xMax, y_max: yMax };
}

/**
 * Largest integer zoom at which the bounds fit inside a viewport of
 * widthPx by heightPx pixels, clamped to [0, maxZoom].
 */
export function zoomToFit(
  b: MercatorBounds,
  widthPx: number,
  heightPx: number,
  maxZoom = 22,
): number {
  const spanX = Math.max(b.x_max - b.x_min, 1e-9);
  const spanY = Math.max(b.y_max - b.y_min, 1e-9);
  for (let z = maxZoom; z > 0; z--) {
    const metersPerPixel = (2 * EARTH_HALF) / worldPixels(z);
    if (spanX / metersPerPixel <= widthPx && spanY / metersPerPixel <= heightPx) {
      return z;
    }
  }
  return 0;
}

/** Tiles needed to cover a viewport centered on a mercator point. */
export function visibleTiles(
  center: MercatorPoint,
  z: number,
  widthPx: number,
  heightPx: number,
): TileRange {
  const px = mercatorToPixel(center, z);
  const maxIndex = 2 ** z - 1;
  const clamp = (v: number) => Math.min(Math.max(v, 0), maxIndex);
  return {
    z,
    xMin: clamp(Math.floor((px.x - widthPx / 2) / TILE_SIZE)),
    xMax: clamp(Math.floor((px.x + widthPx / 2) / TILE_SIZE)),
    yMin: clamp(Math.floor((px.y - heightPx / 2) / TILE_SIZE)),
    yMax: clamp(Math.floor((px.y + heightPx / 2) / TILE_SIZE)),
  };
}

"""GeoJSON serialization of tables, panels, and detections.

Files follow RFC 7946: coordinates are WGS84 lon/lat, written with 9-decimal
precision (about 0.1 mm) so round-trips are stable. The working projected CRS
is recorded in a ``projected_crs`` foreign member and used to restore world
coordinates on import. Feature order and key order are fixed, which makes
exports byte-reproducible.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Callable, List, Sequence, Tuple

from rasterio.crs import CRS
from rasterio.warp import transform as warp_transform

from .detect import Detection, Panel, Table, detection_properties
from .geometry import Polygon

WGS84 = "EPSG:4326"
_NDIGITS = 9


def ring_to_wgs84(ring: Sequence[Tuple[float, float]], crs_code: str,
                  ) -> List[List[float]]:
    xs = [p[0] for p in ring]
    ys = [p[1] for p in ring]
    lons, lats = warp_transform(CRS.from_string(crs_code), CRS.from_string(WGS84),
                                xs, ys)
    return [[round(lon, _NDIGITS), round(lat, _NDIGITS)]
            for lon, lat in zip(lons, lats)]


def ring_from_wgs84(ring: Sequence[Sequence[float]], crs_code: str,
                    ) -> List[Tuple[float, float]]:
    lons = [float(p[0]) for p in ring]
    lats = [float(p[1]) for p in ring]
    xs, ys = warp_transform(CRS.from_string(WGS84), CRS.from_string(crs_code),
                            lons, lats)
    return list(zip(xs, ys))


def polygon_feature(polygon: Polygon, properties: dict, feature_id: str,
                    crs_code: str) -> dict:
    ring = ring_to_wgs84(polygon.ring, crs_code)
    ring.append(list(ring[0]))
    return {
        "type": "Feature",
        "id": feature_id,
        "geometry": {"type": "Polygon", "coordinates": [ring]},
        "properties": properties,
    }


def feature_collection(features: Sequence[dict], crs_code: str) -> dict:
    return {
        "type": "FeatureCollection",
        "projected_crs": crs_code,
        "features": list(features),
    }


def collection_crs(collection: dict) -> str:
    code = collection.get("projected_crs")
    if not code:
        raise ValueError("FeatureCollection lacks a projected_crs member")
    return str(code)


def world_ring_converter(collection: dict) -> Callable:
    """Closure restoring projected coordinates for one collection's features."""
    code = collection_crs(collection)
    return lambda ring: ring_from_wgs84(ring, code)


def tables_to_collection(tables: Sequence[Table], crs_code: str) -> dict:
    feats = [polygon_feature(t.rect.polygon(),
                             {"id": t.id,
                              "angle_deg": round(t.rect.angle_deg, 6),
                              "width_m": round(t.rect.width, 6),
                              "height_m": round(t.rect.height, 6)},
                             t.id, crs_code)
             for t in sorted(tables, key=lambda t: t.id)]
    return feature_collection(feats, crs_code)


def panels_to_collection(panels: Sequence[Panel], crs_code: str) -> dict:
    feats = [polygon_feature(p.rect.polygon(),
                             {"id": p.id, "table_id": p.table_id,
                              "row": p.row, "col": p.col},
                             p.id, crs_code)
             for p in sorted(panels, key=lambda p: p.id)]
    return feature_collection(feats, crs_code)


def detections_to_collection(detections: Sequence[Detection],
                             crs_code: str) -> dict:
    feats = [polygon_feature(d.geometry, detection_properties(d), d.id, crs_code)
             for d in sorted(detections, key=lambda d: d.id)]
    return feature_collection(feats, crs_code)


def detections_from_collection(collection: dict) -> List[Detection]:
    """Exact inverse of detections_to_collection (source and verdict kept)."""
    code = collection_crs(collection)
    out = []
    for feat in collection.get("features", []):
        props = feat.get("properties") or {}
        ring = ring_from_wgs84(feat["geometry"]["coordinates"][0], code)
        delta_t = props.get("delta_t")
        out.append(Detection(
            id=str(feat.get("id") or props.get("id")),
            defect_class=props["class"],
            geometry=Polygon(tuple(ring)),
            confidence=float(props.get("confidence", 1.0)),
            delta_t=float(delta_t) if delta_t is not None else None,
            severity=props.get("severity"),
            panel_ids=tuple(props.get("panel_ids") or ()),
            source=props.get("source", "baseline"),
            verdict=props.get("verdict", "pending"),
        ))
    return out


def write_geojson(collection: dict, path: Path) -> None:
    path = Path(path)
    text = json.dumps(collection, sort_keys=True, separators=(",", ":"))
    path.write_text(text + "\n", encoding="utf-8")


def read_geojson(path: Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))

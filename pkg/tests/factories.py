"""Small random-object builders shared by unit and acceptance tests."""

from __future__ import annotations

import numpy as np

from solarscan.detect import Detection
from solarscan.geometry import OrientedRect

CLASSES = ("Hotspot", "MultiHotspot", "DiodeBypass",
           "PanelOffline", "StringOutage", "TrackerMisalignment")


def random_rect(rng: np.random.Generator, span: float = 40.0) -> OrientedRect:
    return OrientedRect(
        cx=float(rng.uniform(0, span)),
        cy=float(rng.uniform(0, span)),
        width=float(rng.uniform(0.8, 4.0)),
        height=float(rng.uniform(0.8, 4.0)),
        angle_deg=float(rng.uniform(-90.0, 90.0)),
    )


def random_detections(rng: np.random.Generator, n: int,
                      span: float = 40.0) -> list[Detection]:
    """Clustered oriented boxes so NMS actually has overlaps to resolve."""
    dets = []
    anchors = [(float(rng.uniform(0, span)), float(rng.uniform(0, span)))
               for _ in range(max(1, n // 4))]
    for i in range(n):
        ax, ay = anchors[int(rng.integers(0, len(anchors)))]
        rect = OrientedRect(
            cx=ax + float(rng.normal(0, 0.8)),
            cy=ay + float(rng.normal(0, 0.8)),
            width=float(rng.uniform(0.8, 3.0)),
            height=float(rng.uniform(0.8, 3.0)),
            angle_deg=float(rng.uniform(-90.0, 90.0)),
        )
        dets.append(Detection(
            id=f"d{i:04d}",
            defect_class=CLASSES[int(rng.integers(0, len(CLASSES)))],
            geometry=rect.polygon(),
            confidence=float(rng.choice([0.3, 0.5, 0.5, 0.7, 0.9, 1.0])),
        ))
    return dets

"""Build the result directories the console test suite runs against.

Produces two review targets under the given root:
  full/    a complete inspection run of a synthetic site
  single/  the same run trimmed to its highest-delta hotspot, so a
           single rejection empties the site of counted defects
"""
import json
import shutil
import sys
from pathlib import Path

from solarscan.cli import main


def build(root: Path) -> None:
    if root.exists():
        shutil.rmtree(root)
    site = root / "site"
    if main(["synth", "--out", str(site), "--seed", "7", "--size", "1536"]) != 0:
        raise SystemExit("synth failed")
    if main(["inspect", "--config", str(site / "config.toml"),
             "--out", str(root / "full")]) != 0:
        raise SystemExit("inspect failed")

    single = root / "single"
    shutil.copytree(root / "full", single)
    det_path = single / "detections.geojson"
    collection = json.loads(det_path.read_text(encoding="utf-8"))
    hotspots = [f for f in collection["features"]
                if f["properties"]["class"] == "Hotspot"
                and f["properties"]["delta_t"] is not None]
    if not hotspots:
        raise SystemExit("fixture needs at least one hotspot detection")
    keep = max(hotspots, key=lambda f: f["properties"]["delta_t"])
    collection["features"] = [keep]
    det_path.write_text(json.dumps(collection), encoding="utf-8")
    print(f"fixture ready at {root}")


if __name__ == "__main__":
    build(Path(sys.argv[1]))

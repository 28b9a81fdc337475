"""Site health ratings, loss estimation, and fleet aggregation.

A site gets a three-letter rating, one letter per category in fixed order:
Operating (capacity-weighted healthy fraction), Temperature Safety (worst
detection differential), Equipment (anomalies per MW). Letter bands are
half-open and lower-edge inclusive so boundary values rate reproducibly.

Losses are capacity-based: each affected panel loses a per-class fraction of
its module wattage, counted once at its worst class. Revenue loss is the
linear energy-price estimate over a configured horizon. String outages count
toward defective capacity but are excluded from the anomalies-per-MW metric.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from .detect import Detection

MODULE_TYPES = ("poly-crystalline", "thin-film", "mono")
MOUNT_TYPES = ("ground-fixed", "tracker", "rooftop", "canopy", "mixed")

HOURS_PER_YEAR = 8760.0

_CAPACITY_BANDS = (("<1 MW", 1.0), ("1-10 MW", 10.0), ("10-100 MW", 100.0),
                   (">=100 MW", float("inf")))
_AGE_BANDS = (("<5 yr", 5), ("5-10 yr", 10), (">=10 yr", 10 ** 9))


@dataclass(frozen=True)
class SiteMetadata:
    site_id: str
    capacity_mw_dc: float
    module_wattage_w: float
    module_type: str = "poly-crystalline"
    mount_type: str = "ground-fixed"
    commission_year: int = 2018
    state: str = "CO"
    location: Tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        if self.capacity_mw_dc <= 0:
            raise ValueError("capacity_mw_dc must be > 0")
        if self.module_wattage_w <= 0:
            raise ValueError("module_wattage_w must be > 0")
        if self.module_type not in MODULE_TYPES:
            raise ValueError(f"module_type must be one of {MODULE_TYPES}")
        if self.mount_type not in MOUNT_TYPES:
            raise ValueError(f"mount_type must be one of {MOUNT_TYPES}")


@dataclass(frozen=True)
class LossModel:
    """Loss fraction of module wattage per defect class.

    String outage loss applies per member panel. All values overridable per
    deployment; they are echoed into the report for traceability.
    """

    hotspot: float = 0.33
    multi_hotspot: float = 0.66
    diode_bypass: float = 0.33
    panel_offline: float = 1.0
    string_outage: float = 1.0
    tracker_misalignment: float = 0.10

    def __post_init__(self):
        for name, value in self.as_dict().items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"loss fraction {name} out of [0,1]: {value}")

    def as_dict(self) -> Dict[str, float]:
        return {
            "Hotspot": self.hotspot,
            "MultiHotspot": self.multi_hotspot,
            "DiodeBypass": self.diode_bypass,
            "PanelOffline": self.panel_offline,
            "StringOutage": self.string_outage,
            "TrackerMisalignment": self.tracker_misalignment,
        }

    def fraction(self, defect_class: str) -> float:
        return self.as_dict()[defect_class]


@dataclass(frozen=True)
class EconomicsConfig:
    capacity_factor: float = 0.25
    energy_price_usd_per_mwh: float = 30.0
    horizon_years: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.capacity_factor <= 1.0:
            raise ValueError("capacity_factor must be in (0, 1]")
        if self.energy_price_usd_per_mwh <= 0:
            raise ValueError("energy_price_usd_per_mwh must be > 0")
        if self.horizon_years <= 0:
            raise ValueError("horizon_years must be > 0")


@dataclass(frozen=True)
class SiteHealthReport:
    site_id: str
    capacity_mw_dc: float
    or_ratio: float
    c_defect_mw: float
    delta_t_max: float
    apm: float
    a_total: int
    letters: Tuple[str, str, str]
    power_loss_mw_dc: float
    revenue_loss_usd: float
    site_baseline_c: Optional[float]
    n_panels: int
    n_uninspectable: int
    counts_by_class: Dict[str, int]
    counts_by_severity: Dict[str, int]
    n_counted: int
    n_rejected: int
    loss_model: Dict[str, float] = field(default_factory=dict)
    economics: Dict[str, float] = field(default_factory=dict)

    @property
    def rating(self) -> str:
        return "".join(self.letters)

    def to_dict(self) -> dict:
        return {
            "site_id": self.site_id,
            "capacity_mw_dc": round(self.capacity_mw_dc, 6),
            "rating": self.rating,
            "letters": {
                "operating": self.letters[0],
                "temperature": self.letters[1],
                "equipment": self.letters[2],
            },
            "or_ratio": round(self.or_ratio, 9),
            "c_defect_mw": round(self.c_defect_mw, 9),
            "delta_t_max_c": round(self.delta_t_max, 6),
            "apm": round(self.apm, 9),
            "a_total": self.a_total,
            "power_loss_mw_dc": round(self.power_loss_mw_dc, 9),
            "revenue_loss_usd": round(self.revenue_loss_usd, 2),
            "estimation_basis": "capacity",
            "site_baseline_c": (round(self.site_baseline_c, 6)
                                if self.site_baseline_c is not None else None),
            "n_panels": self.n_panels,
            "n_uninspectable": self.n_uninspectable,
            "counts_by_class": dict(sorted(self.counts_by_class.items())),
            "counts_by_severity": dict(sorted(self.counts_by_severity.items())),
            "n_counted": self.n_counted,
            "n_rejected": self.n_rejected,
            "loss_model": {k: round(v, 6) for k, v in sorted(self.loss_model.items())},
            "economics": {k: round(v, 6) for k, v in sorted(self.economics.items())},
        }


# ---------------------------------------------------------------------------
# Rating algebra
# ---------------------------------------------------------------------------

def defective_capacity(detections: Sequence[Detection], meta: SiteMetadata,
                       loss_model: LossModel) -> float:
    """Defective capacity in MW; each panel counted once at its worst class.

    A detection without panel ids (should not survive the structural filter,
    but imported data can be sparse) counts as a single module.
    """
    worst: Dict[str, float] = {}
    for det in detections:
        frac = loss_model.fraction(det.defect_class)
        keys = det.panel_ids if det.panel_ids else (f"@{det.id}",)
        for key in keys:
            if frac > worst.get(key, -1.0):
                worst[key] = frac
    watts = sum(worst[k] for k in sorted(worst)) * meta.module_wattage_w
    return watts / 1e6


def operational_ratio(c_total: float, c_defect: float) -> float:
    if c_total <= 0:
        raise ValueError("c_total must be > 0")
    if not 0.0 <= c_defect <= c_total:
        raise ValueError(f"c_defect {c_defect} outside [0, {c_total}]")
    return (c_total - c_defect) / c_total


def operating_letter(or_ratio: float) -> str:
    if or_ratio >= 0.995:
        return "A"
    if or_ratio >= 0.975:
        return "B"
    if or_ratio >= 0.80:
        return "C"
    return "D"


def temperature_letter(delta_t_max: float) -> str:
    if delta_t_max < 10.0:
        return "A"
    if delta_t_max < 15.0:
        return "B"
    if delta_t_max < 20.0:
        return "C"
    return "D"


def equipment_letter(a_total_excl_strings: int, c_total: float) -> Tuple[float, str]:
    """Anomalies per MW and its letter; string outages are not anomalies here."""
    if c_total <= 0:
        raise ValueError("c_total must be > 0")
    apm = a_total_excl_strings / c_total
    if apm < 13.0:
        letter = "A"
    elif apm < 52.0:
        letter = "B"
    elif apm < 173.0:
        letter = "C"
    else:
        letter = "D"
    return apm, letter


def rate_site(or_ratio: float, delta_t_max: float, apm: float) -> str:
    """Three letters in category order: Operating, Temperature, Equipment."""
    if apm < 13.0:
        eq = "A"
    elif apm < 52.0:
        eq = "B"
    elif apm < 173.0:
        eq = "C"
    else:
        eq = "D"
    return operating_letter(or_ratio) + temperature_letter(delta_t_max) + eq


def power_and_revenue_loss(c_defect_mw: float,
                           econ: EconomicsConfig) -> Tuple[float, float]:
    power = c_defect_mw
    revenue = (c_defect_mw * econ.capacity_factor * HOURS_PER_YEAR
               * econ.energy_price_usd_per_mwh * econ.horizon_years)
    return power, revenue


def build_report(meta: SiteMetadata, detections: Sequence[Detection],
                 loss_model: LossModel, econ: EconomicsConfig,
                 site_baseline_c: Optional[float] = None, n_panels: int = 0,
                 n_uninspectable: int = 0) -> SiteHealthReport:
    """Full health report; rejected detections are excluded everywhere."""
    counted = [d for d in detections if d.verdict != "rejected"]
    n_rejected = len(detections) - len(counted)

    c_defect = defective_capacity(counted, meta, loss_model)
    c_defect = min(c_defect, meta.capacity_mw_dc)
    or_ratio = operational_ratio(meta.capacity_mw_dc, c_defect)
    deltas = [d.delta_t for d in counted if d.delta_t is not None]
    delta_t_max = max(deltas) if deltas else 0.0
    a_total = sum(1 for d in counted if d.defect_class != "StringOutage")
    apm, eq_letter = equipment_letter(a_total, meta.capacity_mw_dc)
    letters = (operating_letter(or_ratio), temperature_letter(delta_t_max), eq_letter)
    power, revenue = power_and_revenue_loss(c_defect, econ)

    by_class: Dict[str, int] = {}
    by_severity: Dict[str, int] = {}
    for d in counted:
        by_class[d.defect_class] = by_class.get(d.defect_class, 0) + 1
        if d.severity is not None:
            by_severity[d.severity] = by_severity.get(d.severity, 0) + 1

    return SiteHealthReport(
        site_id=meta.site_id,
        capacity_mw_dc=meta.capacity_mw_dc,
        or_ratio=or_ratio,
        c_defect_mw=c_defect,
        delta_t_max=delta_t_max,
        apm=apm,
        a_total=a_total,
        letters=letters,
        power_loss_mw_dc=power,
        revenue_loss_usd=revenue,
        site_baseline_c=site_baseline_c,
        n_panels=n_panels,
        n_uninspectable=n_uninspectable,
        counts_by_class=by_class,
        counts_by_severity=by_severity,
        n_counted=len(counted),
        n_rejected=n_rejected,
        loss_model=loss_model.as_dict(),
        economics={
            "capacity_factor": econ.capacity_factor,
            "energy_price_usd_per_mwh": econ.energy_price_usd_per_mwh,
            "horizon_years": econ.horizon_years,
        },
    )


def report_to_dict(meta: SiteMetadata, report: SiteHealthReport) -> dict:
    """Report plus full site metadata, ready for serialization."""
    d = report.to_dict()
    d["site"] = {
        "site_id": meta.site_id,
        "capacity_mw_dc": round(meta.capacity_mw_dc, 6),
        "module_wattage_w": round(meta.module_wattage_w, 3),
        "module_type": meta.module_type,
        "mount_type": meta.mount_type,
        "commission_year": meta.commission_year,
        "state": meta.state,
        "location": [round(meta.location[0], 9), round(meta.location[1], 9)],
    }
    return d


def report_from_dict(d: dict) -> Tuple[SiteMetadata, SiteHealthReport]:
    """Inverse of report_to_dict, for fleet aggregation over saved runs."""
    s = d["site"]
    meta = SiteMetadata(
        site_id=s["site_id"],
        capacity_mw_dc=s["capacity_mw_dc"],
        module_wattage_w=s["module_wattage_w"],
        module_type=s.get("module_type", "poly-crystalline"),
        mount_type=s.get("mount_type", "ground-fixed"),
        commission_year=s.get("commission_year", 2018),
        state=s.get("state", "CO"),
        location=tuple(s.get("location", (0.0, 0.0))),
    )
    letters = d["letters"]
    report = SiteHealthReport(
        site_id=d["site_id"],
        capacity_mw_dc=d["capacity_mw_dc"],
        or_ratio=d["or_ratio"],
        c_defect_mw=d["c_defect_mw"],
        delta_t_max=d["delta_t_max_c"],
        apm=d["apm"],
        a_total=d["a_total"],
        letters=(letters["operating"], letters["temperature"],
                 letters["equipment"]),
        power_loss_mw_dc=d["power_loss_mw_dc"],
        revenue_loss_usd=d["revenue_loss_usd"],
        site_baseline_c=d.get("site_baseline_c"),
        n_panels=d.get("n_panels", 0),
        n_uninspectable=d.get("n_uninspectable", 0),
        counts_by_class=dict(d.get("counts_by_class", {})),
        counts_by_severity=dict(d.get("counts_by_severity", {})),
        n_counted=d.get("n_counted", 0),
        n_rejected=d.get("n_rejected", 0),
        loss_model=dict(d.get("loss_model", {})),
        economics=dict(d.get("economics", {})),
    )
    return meta, report


# ---------------------------------------------------------------------------
# Fleet aggregation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FleetSummary:
    site_count: int
    mean_or_by_state: Dict[str, float]
    share_bbb_or_better: float
    counts_by_capacity_band: Dict[str, int]
    counts_by_age_band: Dict[str, int]
    counts_by_mount_type: Dict[str, int]

    def to_dict(self) -> dict:
        return {
            "site_count": self.site_count,
            "mean_or_by_state": {k: round(v, 9)
                                 for k, v in sorted(self.mean_or_by_state.items())},
            "share_bbb_or_better": round(self.share_bbb_or_better, 9),
            "counts_by_capacity_band": dict(self.counts_by_capacity_band),
            "counts_by_age_band": dict(self.counts_by_age_band),
            "counts_by_mount_type": dict(sorted(self.counts_by_mount_type.items())),
        }


def is_bbb_or_better(rating: str) -> bool:
    return all(letter in "AB" for letter in rating)


def _band(value: float, bands) -> str:
    for name, upper in bands:
        if value < upper:
            return name
    return bands[-1][0]


def aggregate_fleet(items: Sequence[Tuple[SiteMetadata, SiteHealthReport]],
                    as_of_year: int = 2023) -> FleetSummary:
    if not items:
        raise ValueError("aggregate_fleet needs at least one site")
    by_state: Dict[str, List[float]] = {}
    cap_counts = {name: 0 for name, _ in _CAPACITY_BANDS}
    age_counts = {name: 0 for name, _ in _AGE_BANDS}
    mount_counts: Dict[str, int] = {}
    good = 0
    for meta, report in items:
        by_state.setdefault(meta.state, []).append(report.or_ratio)
        cap_counts[_band(meta.capacity_mw_dc, _CAPACITY_BANDS)] += 1
        age_counts[_band(as_of_year - meta.commission_year, _AGE_BANDS)] += 1
        mount_counts[meta.mount_type] = mount_counts.get(meta.mount_type, 0) + 1
        if is_bbb_or_better(report.rating):
            good += 1
    return FleetSummary(
        site_count=len(items),
        mean_or_by_state={s: sum(v) / len(v) for s, v in by_state.items()},
        share_bbb_or_better=good / len(items),
        counts_by_capacity_band=cap_counts,
        counts_by_age_band=age_counts,
        counts_by_mount_type=mount_counts,
    )


def fleet_csv(items: Sequence[Tuple[SiteMetadata, SiteHealthReport]],
              as_of_year: int = 2023) -> str:
    """One row per site plus a fleet summary row."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["site_id", "state", "capacity_mw_dc", "rating", "or_ratio",
                     "delta_t_max_c", "apm", "c_defect_mw", "revenue_loss_usd"])
    for meta, rep in items:
        writer.writerow([meta.site_id, meta.state, f"{meta.capacity_mw_dc:.6g}",
                         rep.rating, f"{rep.or_ratio:.6f}",
                         f"{rep.delta_t_max:.2f}", f"{rep.apm:.4f}",
                         f"{rep.c_defect_mw:.6f}", f"{rep.revenue_loss_usd:.2f}"])
    summary = aggregate_fleet(items, as_of_year=as_of_year)
    mean_or = sum(r.or_ratio for _, r in items) / len(items)
    total_loss = sum(r.revenue_loss_usd for _, r in items)
    writer.writerow(["FLEET", "", f"{sum(m.capacity_mw_dc for m, _ in items):.6g}",
                     f"{summary.share_bbb_or_better:.1%} BBB+",
                     f"{mean_or:.6f}", "", "", "", f"{total_loss:.2f}"])
    return buf.getvalue()

import type { DetectionFeature, SiteSummary, Verdict } from "./types.js";

export function formatUsd(value: number): string {
  return `$${value.toLocaleString("en-US", {
    minimumFractionDigits: 2,
    maximumFractionDigits: 2,
  })}`;
}

export function formatMw(value: number): string {
  return `${value.toFixed(4)} MW`;
}

export interface SidePanelOptions {
  onVerdict?: (id: string, verdict: Verdict) => void;
}

/**
 * Side pane with the live site rating block and a detail card for the
 * selected detection. The rating block is always rebuilt from a full
 * summary payload so it can never drift from the server's arithmetic.
 */
export class SidePanel {
  private readonly ratingBlock: HTMLDivElement;
  private readonly detailCard: HTMLDivElement;
  private readonly onVerdict: (id: string, verdict: Verdict) => void;

  constructor(
    readonly container: HTMLElement,
    options: SidePanelOptions = {},
  ) {
    this.onVerdict = options.onVerdict ?? (() => {});
    container.classList.add("side-panel");
    this.ratingBlock = document.createElement("div");
    this.ratingBlock.className = "rating-block";
    this.detailCard = document.createElement("div");
    this.detailCard.className = "detail-card";
    container.append(this.ratingBlock, this.detailCard);
  }

  renderSummary(summary: SiteSummary): void {
    this.ratingBlock.replaceChildren(
      field("rating", summary.rating, "Rating"),
      field("or-ratio", `${(summary.or_ratio * 100).toFixed(2)}%`, "Operating ratio"),
      field("delta-t", `${summary.delta_t_max_c.toFixed(1)} C`, "Max delta-T"),
      field("apm", summary.apm.toFixed(1), "Anomalies per MW"),
      field("defect-mw", formatMw(summary.c_defect_mw), "Defect capacity"),
      field("revenue", formatUsd(summary.revenue_loss_usd), "Revenue at risk"),
      field("counted", String(summary.n_counted), "Counted"),
      field("rejected", String(summary.n_rejected), "Rejected"),
      countsList("counts-class", summary.counts_by_class),
      countsList("counts-severity", summary.counts_by_severity),
    );
  }

  renderDetail(feature: DetectionFeature | null): void {
    this.detailCard.replaceChildren();
    if (feature === null) {
      const hint = document.createElement("p");
      hint.className = "hint";
      hint.textContent = "Select a detection on the map.";
      this.detailCard.append(hint);
      return;
    }
    const p = feature.properties;
    this.detailCard.append(
      field("det-id", p.id, "Detection"),
      field("det-class", p.class, "Class"),
      field("det-severity", p.severity ?? "n/a", "Severity"),
      field("det-delta", p.delta_t === null ? "n/a" : `${p.delta_t.toFixed(1)} C`, "Delta-T"),
      field("det-loss", formatUsd(p.loss_usd), "Loss"),
      field("det-verdict", p.verdict, "Verdict"),
    );
    const actions = document.createElement("div");
    actions.className = "verdict-actions";
    for (const verdict of ["accepted", "rejected", "pending"] as Verdict[]) {
      const button = document.createElement("button");
      button.type = "button";
      button.textContent = verdict;
      button.setAttribute("data-verdict", verdict);
      button.addEventListener("click", () => this.onVerdict(p.id, verdict));
      actions.append(button);
    }
    this.detailCard.append(actions);
  }

  /** Text content of a summary field, for assertions and debugging. */
  fieldText(name: string): string | null {
    const node = this.container.querySelector(`[data-field="${name}"] .value`);
    return node === null ? null : node.textContent;
  }
}

function field(name: string, value: string, label: string): HTMLDivElement {
  const row = document.createElement("div");
  row.className = "field";
  row.setAttribute("data-field", name);
  const labelNode = document.createElement("span");
  labelNode.className = "label";
  labelNode.textContent = label;
  const valueNode = document.createElement("span");
  valueNode.className = "value";
  valueNode.textContent = value;
  row.append(labelNode, valueNode);
  return row;
}

function countsList(name: string, counts: Record<string, number>): HTMLDivElement {
  const block = document.createElement("div");
  block.className = "counts";
  block.setAttribute("data-field", name);
  const list = document.createElement("ul");
  for (const key of Object.keys(counts).sort()) {
    const item = document.createElement("li");
    item.setAttribute("data-key", key);
    item.textContent = `${key}: ${counts[key]}`;
    list.append(item);
  }
  block.append(list);
  return block;
}

/** Dashboard: knowledge-graph counts and growth from /api/kg/stats, plus
 * the retrieval-depth distribution of this session's answered turns. */

import type { ApiLike, EvolutionSummary, KgStats } from "./api.js";
import { barChart, lineChart } from "./charts.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export class DashboardView {
  private readonly counts: HTMLElement;
  private readonly sizeChart: HTMLElement;
  private readonly depthChart: HTMLElement;
  private readonly evolutionBox: HTMLElement;
  private histogramSource: () => Map<number, number> = () => new Map();
  lastStats: KgStats | undefined;

  constructor(
    root: HTMLElement,
    private readonly api: ApiLike,
  ) {
    this.counts = el("div", "kg-counts");
    this.sizeChart = el("div", "kg-size-chart");
    this.depthChart = el("div", "depth-chart");
    this.evolutionBox = el("div", "last-evolution", "no evolution yet");
    root.append(
      el("h2", undefined, "Knowledge graph"),
      this.counts,
      this.sizeChart,
      el("h2", undefined, "Retrieval depth (this session)"),
      this.depthChart,
      el("h2", undefined, "Last evolution"),
      this.evolutionBox,
    );
  }

  setHistogramSource(source: () => Map<number, number>): void {
    this.histogramSource = source;
  }

  setLastEvolution(summary: EvolutionSummary): void {
    while (this.evolutionBox.firstChild) {
      this.evolutionBox.removeChild(this.evolutionBox.firstChild);
    }
    this.evolutionBox.appendChild(
      el(
        "p",
        "evolution-summary",
        `candidates ${summary.candidates}, added ${summary.added}, ` +
          `skipped exact ${summary.skipped_exact}, skipped similar ${summary.skipped_similar}`,
      ),
    );
    for (const triple of summary.added_triples) {
      this.evolutionBox.appendChild(
        el("p", "evolution-triple", `${triple.head} | ${triple.relation} | ${triple.tail}`),
      );
    }
  }

  /** Re-fetch stats and re-render every panel from the fresh payload. */
  async refresh(): Promise<void> {
    const stats = await this.api.stats();
    this.lastStats = stats;
    while (this.counts.firstChild) this.counts.removeChild(this.counts.firstChild);
    this.counts.append(
      this.statBox("triples", "stat-triples", stats.triple_count),
      this.statBox("entities", "stat-entities", stats.entity_count),
      this.statBox("relations", "stat-relations", stats.relation_count),
    );
    lineChart(this.sizeChart, stats.size_series, "no size history yet");
    this.renderHistogram();
  }

  renderHistogram(): void {
    const histogram = this.histogramSource();
    const bars = [...histogram.entries()]
      .sort((a, b) => a[0] - b[0])
      .map(([depth, count]) => ({ label: `depth ${depth}`, value: count }));
    barChart(this.depthChart, bars, "no answered questions yet");
  }

  private statBox(label: string, className: string, value: number): HTMLElement {
    const box = el("div", "stat-box");
    box.appendChild(el("span", `stat-value ${className}`, String(value)));
    box.appendChild(el("span", "stat-label", label));
    return box;
  }
}

/** Hand-rolled canvas charts with exact numeric labels rendered as DOM text,
 * so the numbers stay visible (and testable) even where canvas is absent. */

export interface Bar {
  label: string;
  value: number;
}

function clear(container: HTMLElement): void {
  while (container.firstChild) container.removeChild(container.firstChild);
}

function emptyState(container: HTMLElement, message: string): void {
  const div = document.createElement("div");
  div.className = "chart-empty";
  div.textContent = message;
  container.appendChild(div);
}

function makeCanvas(container: HTMLElement): CanvasRenderingContext2D | null {
  const canvas = document.createElement("canvas");
  canvas.width = 460;
  canvas.height = 160;
  canvas.className = "chart-canvas";
  container.appendChild(canvas);
  return canvas.getContext ? canvas.getContext("2d") : null;
}

export function lineChart(container: HTMLElement, series: number[], emptyMessage: string): void {
  clear(container);
  if (series.length === 0) {
    emptyState(container, emptyMessage);
    return;
  }
  const ctx = makeCanvas(container);
  const max = Math.max(...series);
  const min = Math.min(...series);
  if (ctx) {
    const w = 460;
    const h = 160;
    const pad = 10;
    const span = max - min || 1;
    ctx.strokeStyle = "#2563eb";
    ctx.lineWidth = 2;
    ctx.beginPath();
    series.forEach((value, i) => {
      const x = pad + (i * (w - 2 * pad)) / Math.max(series.length - 1, 1);
      const y = h - pad - ((value - min) * (h - 2 * pad)) / span;
      if (i === 0) ctx.moveTo(x, y);
      else ctx.lineTo(x, y);
    });
    ctx.stroke();
  }
  const labels = document.createElement("div");
  labels.className = "chart-labels";
  const range = document.createElement("span");
  range.className = "chart-range-label";
  range.textContent = `min ${min} / max ${max}`;
  const final = document.createElement("span");
  final.className = "chart-final-label";
  final.textContent = String(series[series.length - 1]);
  labels.append(range, final);
  container.appendChild(labels);
}

export function barChart(container: HTMLElement, bars: Bar[], emptyMessage: string): void {
  clear(container);
  const total = bars.reduce((sum, bar) => sum + bar.value, 0);
  if (bars.length === 0 || total === 0) {
    emptyState(container, emptyMessage);
    return;
  }
  const ctx = makeCanvas(container);
  if (ctx) {
    const w = 460;
    const h = 160;
    const pad = 10;
    const max = Math.max(...bars.map((b) => b.value), 1);
    const slot = (w - 2 * pad) / bars.length;
    ctx.fillStyle = "#059669";
    bars.forEach((bar, i) => {
      const height = ((h - 2 * pad) * bar.value) / max;
      ctx.fillRect(pad + i * slot + slot * 0.15, h - pad - height, slot * 0.7, height);
    });
  }
  const labels = document.createElement("div");
  labels.className = "chart-labels";
  for (const bar of bars) {
    const span = document.createElement("span");
    span.className = "bar-label";
    span.textContent = `${bar.label}: ${bar.value}`;
    labels.appendChild(span);
  }
  const sum = document.createElement("span");
  sum.className = "bar-total-label";
  sum.textContent = `total ${total}`;
  labels.appendChild(sum);
  container.appendChild(labels);
}

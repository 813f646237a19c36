// Rolling strip charts of the safety scalars with an emphasized zero line.

import { RingBuffer } from "./ring.js";

export interface ChartSpec {
  label: string;
  color: string;
  buffer: RingBuffer;
  unit?: string;
}

export class StripCharts {
  constructor(private canvas: HTMLCanvasElement, private specs: ChartSpec[],
              private windowSeconds = 30) {}

  render(now: number): void {
    const ctx = this.canvas.getContext("2d")!;
    const { width, height } = this.canvas;
    ctx.fillStyle = "#10141a";
    ctx.fillRect(0, 0, width, height);
    const rows = this.specs.length;
    const rowH = height / rows;
    this.specs.forEach((spec, r) => {
      const y0 = r * rowH;
      this.renderRow(ctx, spec, now, y0, rowH, width);
    });
  }

  private renderRow(ctx: CanvasRenderingContext2D, spec: ChartSpec, now: number,
                    y0: number, rowH: number, width: number): void {
    const pad = 16;
    const plotH = rowH - pad;
    const items = spec.buffer.items;
    ctx.strokeStyle = "#26303c";
    ctx.strokeRect(0.5, y0 + 0.5, width - 1, rowH - 1);
    ctx.fillStyle = "#93a4b5";
    ctx.font = "11px sans-serif";
    const latest = spec.buffer.latest();
    const label = latest === undefined
      ? spec.label
      : `${spec.label}: ${latest.value.toPrecision(4)}${spec.unit ?? ""}`;
    ctx.fillText(label, 6, y0 + 12);
    if (items.length < 2) return;
    let lo = Math.min(0, spec.buffer.min());
    let hi = Math.max(spec.buffer.max(), 1e-9);
    const span = hi - lo || 1;
    lo -= 0.08 * span;
    hi += 0.08 * span;
    const tx = (t: number) =>
      width * (1 - (now - t) / this.windowSeconds);
    const vy = (v: number) => y0 + pad + (plotH - 4) * (1 - (v - lo) / (hi - lo));
    // emphasized zero line
    if (lo < 0 && hi > 0) {
      ctx.strokeStyle = "#5a6b7d";
      ctx.setLineDash([4, 3]);
      ctx.beginPath();
      ctx.moveTo(0, vy(0));
      ctx.lineTo(width, vy(0));
      ctx.stroke();
      ctx.setLineDash([]);
    }
    ctx.strokeStyle = spec.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    let started = false;
    for (const s of items) {
      const x = tx(s.t);
      if (x < 0) continue;
      const y = vy(s.value);
      if (!started) {
        ctx.moveTo(x, y);
        started = true;
      } else {
        ctx.lineTo(x, y);
      }
    }
    ctx.stroke();
  }
}

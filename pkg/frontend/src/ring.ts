// Fixed-capacity time-series ring buffer backing the strip charts.

export interface Sample {
  t: number;
  value: number;
}

export class RingBuffer {
  private buf: Sample[] = [];
  constructor(private windowSeconds: number, private capacity = 4096) {}

  push(t: number, value: number): void {
    const last = this.buf[this.buf.length - 1];
    if (last && t < last.t) {
      // session reset: time went backwards, restart the window
      this.buf = [];
    }
    this.buf.push({ t, value });
    this.trim(t);
    if (this.buf.length > this.capacity) {
      this.buf.splice(0, this.buf.length - this.capacity);
    }
  }

  private trim(now: number): void {
    const cutoff = now - this.windowSeconds;
    let drop = 0;
    while (drop < this.buf.length && this.buf[drop].t < cutoff) drop++;
    if (drop > 0) this.buf.splice(0, drop);
  }

  get items(): readonly Sample[] {
    return this.buf;
  }

  get length(): number {
    return this.buf.length;
  }

  min(): number {
    let m = Infinity;
    for (const s of this.buf) m = Math.min(m, s.value);
    return m;
  }

  max(): number {
    let m = -Infinity;
    for (const s of this.buf) m = Math.max(m, s.value);
    return m;
  }

  latest(): Sample | undefined {
    return this.buf[this.buf.length - 1];
  }
}

// Diverging color map centered at zero: negative/boundary values render red,
// safe positive values blue-green. Scaling is symmetric around 0 so the zero
// level is visually anchored.

export function divergingColor(value: number, scale: number): string {
  const x = Math.max(-1, Math.min(1, scale > 0 ? value / scale : 0));
  let r: number, g: number, b: number;
  if (x < 0) {
    const t = -x;
    r = 210 + 45 * t;
    g = 90 - 70 * t;
    b = 80 - 60 * t;
  } else {
    const t = x;
    r = 210 - 170 * t;
    g = 90 + 110 * t;
    b = 80 + 140 * t;
  }
  return `rgb(${Math.round(r)},${Math.round(g)},${Math.round(b)})`;
}

// distinct link hues for the sample overlay (matches by-link grouping)
const LINK_HUES = [0, 35, 70, 130, 180, 215, 260, 300, 330];

export function linkColor(link: number): string {
  const hue = LINK_HUES[link % LINK_HUES.length];
  return `hsl(${hue},65%,60%)`;
}

/**
 * Deterministic SVG chart builder: fixed canvas, fixed fonts, no clock, no
 * randomness.  Rendering the same data twice yields identical bytes.
 */

export interface Series {
  label: string;
  color: string;
  points: { x: number; y: number }[];
  dash?: string;
  ci?: { lo: number; hi: number }[]; // optional whiskers, aligned with points
}

export interface ChartSpec {
  title: string;
  xLabel: string;
  yLabel: string;
  series: Series[];
  logY?: boolean;
  warning?: string;
}

const W = 640;
const H = 420;
const M = { left: 64, right: 16, top: 36, bottom: 44 };

function fmt(v: number): string {
  if (!Number.isFinite(v)) return "inf";
  return Number(v.toPrecision(6)).toString();
}

export function renderChart(spec: ChartSpec): string {
  const pts = spec.series.flatMap((s) => s.points).filter((p) => Number.isFinite(p.y));
  const parts: string[] = [];
  parts.push(`<svg xmlns="http://www.w3.org/2000/svg" width="${W}" height="${H}" viewBox="0 0 ${W} ${H}">`);
  parts.push(`<rect width="${W}" height="${H}" fill="white"/>`);
  parts.push(text(W / 2, 20, spec.title, 14, "middle"));
  if (pts.length === 0) {
    parts.push(text(W / 2, H / 2, `no data${spec.warning ? ": " + spec.warning : ""}`, 13, "middle", "#aa3333"));
    parts.push("</svg>");
    return parts.join("\n") + "\n";
  }
  const tx = (v: number) => v;
  const ty = (v: number) => (spec.logY ? Math.log10(Math.max(v, 1e-12)) : v);
  const xs = pts.map((p) => tx(p.x));
  const ys = pts.map((p) => ty(p.y));
  const [x0, x1] = pad(Math.min(...xs), Math.max(...xs));
  const [y0, y1] = pad(Math.min(...ys), Math.max(...ys));
  const sx = (v: number) => M.left + ((tx(v) - x0) / (x1 - x0)) * (W - M.left - M.right);
  const sy = (v: number) => H - M.bottom - ((ty(v) - y0) / (y1 - y0)) * (H - M.top - M.bottom);

  parts.push(`<rect x="${M.left}" y="${M.top}" width="${W - M.left - M.right}" height="${H - M.top - M.bottom}" fill="none" stroke="#444"/>`);
  for (let i = 0; i <= 4; i++) {
    const gx = x0 + ((x1 - x0) * i) / 4;
    const gy = y0 + ((y1 - y0) * i) / 4;
    const px = M.left + ((W - M.left - M.right) * i) / 4;
    const py = H - M.bottom - ((H - M.top - M.bottom) * i) / 4;
    parts.push(`<line x1="${fmt(px)}" y1="${M.top}" x2="${fmt(px)}" y2="${H - M.bottom}" stroke="#dddddd"/>`);
    parts.push(`<line x1="${M.left}" y1="${fmt(py)}" x2="${W - M.right}" y2="${fmt(py)}" stroke="#dddddd"/>`);
    parts.push(text(px, H - M.bottom + 16, fmt(gx), 10, "middle"));
    parts.push(text(M.left - 6, py + 3, spec.logY ? `1e${fmt(gy)}` : fmt(gy), 10, "end"));
  }
  parts.push(text(W / 2, H - 10, spec.xLabel, 11, "middle"));
  parts.push(text(14, H / 2, spec.yLabel, 11, "middle", "#000", true));

  spec.series.forEach((s, si) => {
    const finite = s.points.filter((p) => Number.isFinite(p.y));
    const path = finite.map((p) => `${fmt(sx(p.x))},${fmt(sy(p.y))}`).join(" ");
    const dash = s.dash ? ` stroke-dasharray="${s.dash}"` : "";
    if (finite.length > 1) {
      parts.push(`<polyline fill="none" stroke="${s.color}"${dash} stroke-width="1.5" points="${path}"/>`);
    }
    finite.forEach((p, i) => {
      parts.push(`<circle cx="${fmt(sx(p.x))}" cy="${fmt(sy(p.y))}" r="2.5" fill="${s.color}"/>`);
      const ci = s.ci?.[s.points.indexOf(p)];
      if (ci) {
        parts.push(`<line x1="${fmt(sx(p.x))}" y1="${fmt(sy(Math.max(ci.lo, 1e-12)))}" x2="${fmt(sx(p.x))}" y2="${fmt(sy(Math.max(ci.hi, 1e-12)))}" stroke="${s.color}" stroke-width="1"/>`);
      }
    });
    parts.push(text(W - M.right - 6, M.top + 14 + 14 * si, s.label, 11, "end", s.color));
  });
  parts.push("</svg>");
  return parts.join("\n") + "\n";
}

function pad(lo: number, hi: number): [number, number] {
  if (lo === hi) return [lo - 1, hi + 1];
  const m = (hi - lo) * 0.06;
  return [lo - m, hi + m];
}

function text(x: number, y: number, s: string, size: number, anchor: string, fill = "#000", vertical = false): string {
  const esc = s.replace(/&/g, "&amp;").replace(/</g, "&lt;").replace(/>/g, "&gt;");
  const rot = vertical ? ` transform="rotate(-90 ${fmt(x)} ${fmt(y)})"` : "";
  return `<text x="${fmt(x)}" y="${fmt(y)}" font-family="monospace" font-size="${size}" text-anchor="${anchor}" fill="${fill}"${rot}>${esc}</text>`;
}

import init, { mselect_curve, outcome_quality, convergence } from "./pkg/plasmode_wasm.js";

const COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];
const PAD = { l: 60, r: 20, t: 20, b: 36 };

function frame(canvas, xs, ys) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  const w = canvas.width - PAD.l - PAD.r;
  const h = canvas.height - PAD.t - PAD.b;
  let [x0, x1] = [Math.min(...xs), Math.max(...xs)];
  let [y0, y1] = [Math.min(...ys), Math.max(...ys)];
  if (x0 === x1) { x0 -= 0.5; x1 += 0.5; }
  if (y0 === y1) { y0 -= 0.5; y1 += 0.5; }
  const sx = (x) => PAD.l + ((x - x0) / (x1 - x0)) * w;
  const sy = (y) => PAD.t + h - ((y - y0) / (y1 - y0)) * h;
  ctx.strokeStyle = "#888";
  ctx.strokeRect(PAD.l, PAD.t, w, h);
  ctx.fillStyle = "#444";
  ctx.font = "11px sans-serif";
  for (let k = 0; k <= 4; k++) {
    const xv = x0 + ((x1 - x0) * k) / 4;
    const yv = y0 + ((y1 - y0) * k) / 4;
    ctx.fillText(fmt(xv), sx(xv) - 12, PAD.t + h + 16);
    ctx.fillText(fmt(yv), 4, sy(yv) + 4);
  }
  return { ctx, sx, sy };
}

function fmt(v) {
  const a = Math.abs(v);
  return a !== 0 && (a < 1e-2 || a >= 1e4) ? v.toExponential(1) : String(+v.toFixed(3));
}

function line(ctx, pts, color, width = 1.5) {
  ctx.strokeStyle = color;
  ctx.lineWidth = width;
  ctx.beginPath();
  pts.forEach(([x, y], i) => (i ? ctx.lineTo(x, y) : ctx.moveTo(x, y)));
  ctx.stroke();
  ctx.lineWidth = 1;
}

function legend(ctx, labels) {
  labels.forEach((label, i) => {
    ctx.fillStyle = COLORS[i % COLORS.length];
    ctx.fillRect(PAD.l + 10, PAD.t + 8 + i * 16, 10, 10);
    ctx.fillStyle = "#222";
    ctx.fillText(label, PAD.l + 26, PAD.t + 17 + i * 16);
  });
}

function params(form) {
  return Object.fromEntries([...new FormData(form)].map(([k, v]) => [k, Number(v)]));
}

function wire(id, compute, draw) {
  const root = document.getElementById(id);
  const form = root.querySelector("form");
  const canvas = root.querySelector("canvas");
  const out = root.querySelector(".out");
  const go = (ev) => {
    ev?.preventDefault();
    out.classList.remove("err");
    out.textContent = "running...";
    // Let the status text paint before the synchronous wasm call.
    setTimeout(() => {
      try {
        const t = performance.now();
        const data = JSON.parse(compute(params(form)));
        out.textContent = draw(canvas, data) + `\n(${(performance.now() - t).toFixed(0)} ms)`;
      } catch (e) {
        out.classList.add("err");
        out.textContent = String(e.message ?? e);
      }
    }, 10);
  };
  form.addEventListener("submit", go);
  go();
}

function drawMselect(canvas, d) {
  const xs = d.distances.map((_, j) => d.candidates[j]);
  const { ctx, sx, sy } = frame(canvas, xs, d.distances);
  line(ctx, xs.map((x, j) => [sx(x), sy(d.distances[j])]), COLORS[0]);
  ctx.strokeStyle = COLORS[1];
  ctx.setLineDash([4, 4]);
  line(ctx, [[sx(d.m_star), PAD.t], [sx(d.m_star), canvas.height - PAD.b]], COLORS[1], 1);
  ctx.setLineDash([]);
  legend(ctx, ["distance to the next smaller m", `m* = ${d.m_star}`]);
  return `training rows n = ${d.n}; ${d.candidates.length} candidates; chosen m* = ${d.m_star}`;
}

function drawQuality(canvas, d) {
  const groups = [["original", d.original], ["pooled plasmodes", d.pooled], ...d.replicates.map((h, i) => [`replicate ${i + 1}`, h])];
  const width = d.edges[1] - d.edges[0];
  const dens = groups.map(([, h]) => {
    const total = h.reduce((a, b) => a + b, 0);
    return h.map((c) => c / (total * width));
  });
  const { ctx, sx, sy } = frame(canvas, d.edges, [0, ...dens.flat()]);
  dens.forEach((ds, g) => {
    const pts = [];
    ds.forEach((v, k) => pts.push([sx(d.edges[k]), sy(v)], [sx(d.edges[k + 1]), sy(v)]));
    if (g === 0) {
      ctx.fillStyle = "rgba(31,119,180,0.18)";
      ds.forEach((v, k) => ctx.fillRect(sx(d.edges[k]), sy(v), sx(d.edges[k + 1]) - sx(d.edges[k]), sy(0) - sy(v)));
    }
    line(ctx, pts, COLORS[g % COLORS.length], g < 2 ? 2 : 1);
  });
  legend(ctx, groups.map(([l]) => l));
  return [
    `true effects: ${d.nonzero_effects} of ${d.p} nonzero`,
    `KS(pooled, original) = ${d.ks_pooled.toFixed(3)} (threshold ${d.ks_threshold})`,
    `range within original: ${d.range_within_original}; within linear predictor: ${d.range_within_predictor}`,
  ].join("\n");
}

function drawConvergence(canvas, d) {
  const n = d.models[0].running_msep.length;
  const xs = Array.from({ length: n }, (_, i) => i + 1);
  const { ctx, sx, sy } = frame(canvas, xs, d.models.flatMap((m) => m.running_msep));
  d.models.forEach((m, i) => line(ctx, m.running_msep.map((v, k) => [sx(k + 1), sy(v)]), COLORS[i]));
  legend(ctx, d.models.map((m) => m.model));
  return d.models
    .map((m) => `${m.model.padEnd(9)} MSEP ${m.msep_hat.toExponential(3)}  MAB ${m.mab_hat.toExponential(3)}  stable at ${m.converged_at_msep ?? "-"} (MSEP) / ${m.converged_at_mab ?? "-"} (MAB)`)
    .join("\n");
}

await init();
wire("mselect", (p) => mselect_curve(p.n, p.p, p.q, p.draws, BigInt(p.seed)), drawMselect);
wire("quality", (p) => outcome_quality(p.n, p.p, p.m, p.replicates, p.noise, BigInt(p.seed)), drawQuality);
wire("convergence", (p) => convergence(p.n, p.p, p.m, p.replicates, p.noise, p.window, p.tol, BigInt(p.seed)), drawConvergence);

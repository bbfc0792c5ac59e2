import init, { Demo, randomSearch } from "./pkg/cglo_web.js";

const $ = (id) => document.getElementById(id);
const canvas = $("plot");
const ctx = canvas.getContext("2d");
let demo = null;
let running = false;

const COLORS = { truth: "#888", overall: "#1f5fbf", band: "rgba(31,95,191,0.15)", global: "#e07b00",
  point: "#222", best: "#d62728", opt: "#2ca02c", region: "#bbb" };

function params() {
  return { objective: $("objective").value, seed: BigInt($("seed").value || 0), budget: BigInt($("budget").value || 0) };
}

function setButtons() {
  const live = demo !== null && !demo.isDone() && !running;
  $("step").disabled = !live;
  $("run").disabled = !live;
  $("rs").disabled = demo === null || running;
}

function fmt(v) {
  return Number.isFinite(v) ? v.toPrecision(5) : String(v);
}

function status() {
  const best = demo.best();
  const d = demo.dim();
  const lines = [
    `iteration ${demo.iteration()}   replications ${demo.consumed()} / ${demo.total()}${demo.isDone() ? "   (done)" : ""}`,
    demo.lastStep(),
    `incumbent x = [${Array.from(best.slice(0, d), fmt).join(", ")}]  sample mean ${fmt(best[d])}  true value ${fmt(best[d + 1])}`,
  ];
  const opt = demo.optimum();
  if (opt.length) {
    lines.push(`known optimum x = [${Array.from(opt.slice(0, d), fmt).join(", ")}]  value ${fmt(opt[d])}  gap ${fmt(Math.abs(best[d + 1] - opt[d]))}`);
  }
  $("status").textContent = lines.join("\n");
}

function legend(items) {
  $("legend").innerHTML = items
    .map(([label, color]) => `<span><i class="sw" style="background:${color}"></i>${label}</span>`)
    .join("");
}

function draw1d() {
  const W = canvas.width, H = canvas.height, pad = 40;
  const n = 300;
  const c = demo.curve(n);
  const rows = [];
  for (let i = 0; i < n; i++) rows.push(c.subarray(6 * i, 6 * i + 6));
  const pts = demo.design();
  const dpts = [];
  for (let i = 0; i < pts.length; i += 4) dpts.push(pts.subarray(i, i + 4));

  let lo = Infinity, hi = -Infinity;
  for (const r of rows) {
    lo = Math.min(lo, r[1], r[4] - 2 * r[5]);
    hi = Math.max(hi, r[1], r[4] + 2 * r[5]);
  }
  for (const p of dpts) { lo = Math.min(lo, p[1]); hi = Math.max(hi, p[1]); }
  const span = hi - lo || 1;
  lo -= 0.05 * span; hi += 0.05 * span;
  const [xl, xu] = demo.bounds();
  const sx = (x) => pad + ((x - xl) / (xu - xl)) * (W - 2 * pad);
  const sy = (y) => H - pad - ((y - lo) / (hi - lo)) * (H - 2 * pad);

  ctx.clearRect(0, 0, W, H);
  ctx.strokeStyle = "#999"; ctx.lineWidth = 1;
  ctx.strokeRect(pad, pad, W - 2 * pad, H - 2 * pad);
  ctx.fillStyle = "#555"; ctx.font = "12px sans-serif";
  ctx.fillText(fmt(hi), 2, pad + 4); ctx.fillText(fmt(lo), 2, H - pad);
  ctx.fillText(String(xl), pad, H - pad + 16); ctx.fillText(String(xu), W - pad - 10, H - pad + 16);

  const centers = Array.from(demo.centers()).sort((a, b) => a - b);
  ctx.setLineDash([2, 4]); ctx.strokeStyle = COLORS.region;
  for (let i = 0; i + 1 < centers.length; i++) {
    const x = sx((centers[i] + centers[i + 1]) / 2);
    ctx.beginPath(); ctx.moveTo(x, pad); ctx.lineTo(x, H - pad); ctx.stroke();
  }
  ctx.setLineDash([]);

  ctx.fillStyle = COLORS.band;
  ctx.beginPath();
  rows.forEach((r, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, sx(r[0]), sy(r[4] + 2 * r[5])));
  for (let i = rows.length - 1; i >= 0; i--) ctx.lineTo(sx(rows[i][0]), sy(rows[i][4] - 2 * rows[i][5]));
  ctx.fill();

  const line = (k, color, dash) => {
    ctx.strokeStyle = color; ctx.lineWidth = 1.5; ctx.setLineDash(dash);
    ctx.beginPath();
    rows.forEach((r, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, sx(r[0]), sy(r[k])));
    ctx.stroke(); ctx.setLineDash([]);
  };
  line(1, COLORS.truth, []);
  line(2, COLORS.global, [6, 4]);
  line(4, COLORS.overall, []);

  const maxReps = Math.max(...dpts.map((p) => p[2]));
  ctx.fillStyle = COLORS.point;
  for (const p of dpts) {
    ctx.beginPath(); ctx.arc(sx(p[0]), sy(p[1]), 2 + 3 * Math.sqrt(p[2] / maxReps), 0, 2 * Math.PI); ctx.fill();
  }
  const best = demo.best();
  ctx.strokeStyle = COLORS.best; ctx.lineWidth = 2;
  ctx.beginPath(); ctx.arc(sx(best[0]), sy(best[1]), 8, 0, 2 * Math.PI); ctx.stroke();
  const opt = demo.optimum();
  if (opt.length) {
    ctx.fillStyle = COLORS.opt;
    ctx.beginPath(); ctx.moveTo(sx(opt[0]), sy(opt[1]) + 4); ctx.lineTo(sx(opt[0]) - 6, sy(opt[1]) + 14);
    ctx.lineTo(sx(opt[0]) + 6, sy(opt[1]) + 14); ctx.fill();
  }
  legend([["true mean", COLORS.truth], ["global trend", COLORS.global], ["overall model ± 2 sd", COLORS.overall],
    ["design points (size ~ replications)", COLORS.point], ["incumbent", COLORS.best], ["optimum", COLORS.opt]]);
}

function heat(values, n, x0, y0, size, lo, hi) {
  const cell = size / n;
  for (let j = 0; j < n; j++) {
    for (let i = 0; i < n; i++) {
      const t = (values[j * n + i] - lo) / (hi - lo || 1);
      const r = Math.round(255 * Math.min(1, 2 * t));
      const b = Math.round(255 * Math.min(1, 2 * (1 - t)));
      ctx.fillStyle = `rgb(${r},${Math.round(255 * (1 - Math.abs(2 * t - 1)))},${b})`;
      ctx.fillRect(x0 + i * cell, y0 + size - (j + 1) * cell, Math.ceil(cell), Math.ceil(cell));
    }
  }
}

function draw2d() {
  const W = canvas.width, H = canvas.height, pad = 30;
  const n = 40;
  const size = Math.min(H - 2 * pad, (W - 3 * pad) / 2);
  const model = demo.surface(n, false);
  const truth = demo.surface(n, true);
  let lo = Infinity, hi = -Infinity;
  for (const v of truth) { lo = Math.min(lo, v); hi = Math.max(hi, v); }
  const [x1l, x2l, x1u, x2u] = demo.bounds();
  ctx.clearRect(0, 0, W, H);
  ctx.fillStyle = "#333"; ctx.font = "13px sans-serif";
  const panels = [[pad, "overall model mean"], [2 * pad + size, "true mean"]];
  heat(model, n, panels[0][0], pad, size, lo, hi);
  heat(truth, n, panels[1][0], pad, size, lo, hi);
  const pts = demo.design();
  const best = demo.best();
  const opt = demo.optimum();
  for (const [x0, title] of panels) {
    ctx.fillStyle = "#333"; ctx.fillText(title, x0, pad - 8);
    const sx = (x) => x0 + ((x - x1l) / (x1u - x1l)) * size;
    const sy = (y) => pad + size - ((y - x2l) / (x2u - x2l)) * size;
    ctx.fillStyle = "#000";
    for (let i = 0; i < pts.length; i += 5) ctx.fillRect(sx(pts[i]) - 1.5, sy(pts[i + 1]) - 1.5, 3, 3);
    ctx.strokeStyle = "#fff"; ctx.lineWidth = 2;
    ctx.beginPath(); ctx.arc(sx(best[0]), sy(best[1]), 7, 0, 2 * Math.PI); ctx.stroke();
    if (opt.length) {
      ctx.strokeStyle = "#000";
      ctx.beginPath(); ctx.moveTo(sx(opt[0]) - 6, sy(opt[1])); ctx.lineTo(sx(opt[0]) + 6, sy(opt[1]));
      ctx.moveTo(sx(opt[0]), sy(opt[1]) - 6); ctx.lineTo(sx(opt[0]), sy(opt[1]) + 6); ctx.stroke();
    }
  }
  legend([["design points", "#000"], ["incumbent (white ring)", "#fff"], ["optimum (cross)", "#000"],
    [`color scale ${fmt(lo)} (blue) to ${fmt(hi)} (red), shared`, "linear-gradient(90deg,#00f,#0f0,#f00)"]]);
}

function redraw() {
  if (demo.dim() === 1) draw1d(); else draw2d();
  status();
  setButtons();
}

function fail(e) {
  $("status").textContent = `error: ${e}`;
  running = false;
  setButtons();
}

function start() {
  try {
    if (demo) demo.free();
    demo = null;
    const p = params();
    demo = new Demo(p.objective, p.seed, p.budget);
    $("compare").textContent = "";
    redraw();
  } catch (e) {
    fail(e);
  }
}

function step() {
  try { demo.step(); redraw(); } catch (e) { fail(e); }
}

function runToEnd() {
  running = true;
  setButtons();
  const tick = () => {
    try {
      const more = demo.step();
      redraw();
      if (more) setTimeout(tick, 0); else { running = false; setButtons(); }
    } catch (e) {
      fail(e);
    }
  };
  setTimeout(tick, 0);
}

function compare() {
  try {
    const p = params();
    const d = demo.dim();
    const r = randomSearch(p.objective, p.seed, p.budget);
    const best = demo.best();
    $("compare").textContent =
      `random search, same budget: x = [${Array.from(r.slice(0, d), fmt).join(", ")}]  sample mean ${fmt(r[d])}  true value ${fmt(r[d + 1])}\n` +
      `this session so far:        x = [${Array.from(best.slice(0, d), fmt).join(", ")}]  sample mean ${fmt(best[d])}  true value ${fmt(best[d + 1])}`;
  } catch (e) {
    fail(e);
  }
}

$("objective").addEventListener("change", () => {
  $("budget").value = $("objective").value === "sun2d" ? 5000 : 3000;
});
$("start").addEventListener("click", start);
$("step").addEventListener("click", step);
$("run").addEventListener("click", runToEnd);
$("rs").addEventListener("click", compare);

init().then(() => {
  $("status").textContent = "Ready. Start a session.";
  start();
}, fail);

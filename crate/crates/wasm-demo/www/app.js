import init, { disjointCurves, hybridCurves, splitTrace } from "./pkg/pslinucb_wasm_demo.js";

function values(section) {
  const v = {};
  for (const input of section.querySelectorAll("input")) {
    v[input.name] = input.type === "checkbox" ? input.checked : Number(input.value);
  }
  return v;
}

function plot(canvas, xs, series, marks) {
  const ratio = window.devicePixelRatio || 1;
  canvas.width = canvas.clientWidth * ratio;
  canvas.height = canvas.clientHeight * ratio;
  const ctx = canvas.getContext("2d");
  ctx.scale(ratio, ratio);
  const w = canvas.clientWidth, h = canvas.clientHeight, pad = 30;
  ctx.clearRect(0, 0, w, h);

  const x0 = xs[0], x1 = xs[xs.length - 1];
  let lo = Infinity, hi = -Infinity;
  for (const s of series) for (const y of s.ys) if (Number.isFinite(y)) { lo = Math.min(lo, y); hi = Math.max(hi, y); }
  lo = Math.min(lo, 0);
  if (!(hi > lo)) hi = lo + 1;
  const px = x => pad + (x - x0) / (x1 - x0 || 1) * (w - 2 * pad);
  const py = y => h - pad - (y - lo) / (hi - lo) * (h - 2 * pad);

  ctx.strokeStyle = "#bbb";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.fillStyle = "#666";
  ctx.font = "11px sans-serif";
  ctx.fillText(hi.toPrecision(3), 2, pad + 4);
  ctx.fillText(lo.toPrecision(3), 2, h - pad);
  ctx.fillText(String(x1), w - pad - 20, h - pad + 14);

  for (const m of marks) {
    ctx.strokeStyle = m.color;
    ctx.globalAlpha = 0.5;
    for (const x of m.xs) {
      ctx.beginPath();
      ctx.moveTo(px(x), pad);
      ctx.lineTo(px(x), h - pad);
      ctx.stroke();
    }
    ctx.globalAlpha = 1;
  }
  for (const s of series) {
    ctx.strokeStyle = s.color;
    ctx.lineWidth = 1.5;
    ctx.beginPath();
    s.ys.forEach((y, i) => (i ? ctx.lineTo(px(xs[i]), py(y)) : ctx.moveTo(px(xs[i]), py(y))));
    ctx.stroke();
  }
}

function steps(n) {
  return Float64Array.from({ length: n }, (_, i) => i + 1);
}

function regretSection(id, run) {
  const section = document.getElementById(id);
  const out = section.querySelector(".out");
  section.querySelector("button").addEventListener("click", () => {
    const v = values(section);
    try {
      const started = performance.now();
      const c = run(v.alpha, v.window, v.delta, v.horizon, v.every, v.seed);
      const base = c.baseline, ps = c.piecewise, det = c.detections;
      plot(section.querySelector("canvas"), steps(base.length),
        [{ ys: base, color: "#888" }, { ys: ps, color: "#c33" }],
        [{ xs: det, color: "#36c" }]);
      const gain = 100 * (1 - ps[ps.length - 1] / base[base.length - 1]);
      out.textContent = `regret ${base[base.length - 1].toFixed(1)} vs ${ps[ps.length - 1].toFixed(1)}` +
        ` (${gain.toFixed(1)}% lower), ${det.length} restarts, ${(performance.now() - started).toFixed(0)} ms`;
      c.free();
    } catch (e) {
      out.textContent = String(e);
    }
  });
}

function splitSection() {
  const section = document.getElementById("split");
  const out = section.querySelector(".out");
  section.querySelector("button").addEventListener("click", () => {
    const v = values(section);
    try {
      const t = splitTrace(v.window, v.noise, v.b, v.perStep, v.steps, v.horizon, v.seed);
      const xs = t.steps, stat = t.statistic, thr = t.threshold;
      if (xs.length === 0) {
        out.textContent = "the window never fills";
        return;
      }
      plot(section.querySelector("canvas"), xs,
        [{ ys: thr, color: "#888" }, { ys: stat, color: "#c33" }],
        [{ xs: [t.change_at], color: "#36c" }]);
      const i = stat.findIndex((s, k) => s > thr[k]);
      out.textContent = `c = ${t.c.toFixed(3)}; ` +
        (i < 0 ? "no crossing" : `first crossing at step ${xs[i]} (change at ${t.change_at})`);
      t.free();
    } catch (e) {
      out.textContent = String(e);
    }
  });
}

await init();
regretSection("disjoint", disjointCurves);
regretSection("hybrid", hybridCurves);
splitSection();
for (const b of document.querySelectorAll("button")) b.click();

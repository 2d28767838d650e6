import init, { whiteNoiseCurves, crosstalkHeatmap, crosstalkRatioCurves } from "./pkg/qsfe_wasm.js";

const COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#637939"];
const $ = (id) => document.getElementById(id);

function axes(ctx, w, h, pad, yMin, yMax, xLabel) {
  ctx.clearRect(0, 0, w, h);
  ctx.strokeStyle = "#999";
  ctx.fillStyle = "#333";
  ctx.font = "12px sans-serif";
  ctx.strokeRect(pad, pad / 2, w - 1.5 * pad, h - 1.5 * pad);
  for (let i = 0; i <= 4; i++) {
    const y = yMin + (yMax - yMin) * i / 4;
    const py = h - pad - (h - 1.5 * pad) * i / 4;
    ctx.fillText(y.toFixed(2), 4, py + 4);
    const x = i / 4;
    ctx.fillText(x.toFixed(2), pad + (w - 1.5 * pad) * x - 10, h - pad + 16);
  }
  ctx.fillText(xLabel, w / 2 - 40, h - 4);
}

function plotCurves(canvas, legend, set, withExact) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 50;
  const values = set.curves.flatMap((c) => c.lower.filter((v) => v !== null));
  if (withExact) values.push(...set.exact);
  const yMin = Math.max(0, Math.floor(Math.min(...values) * 20) / 20);
  const yMax = Math.min(1, Math.ceil(Math.max(...values) * 20) / 20 + 0.01);
  axes(ctx, w, h, pad, yMin, yMax, set.x_label);
  const px = (x) => pad + (w - 1.5 * pad) * x;
  const py = (y) => h - pad - (h - 1.5 * pad) * (y - yMin) / (yMax - yMin);
  const line = (xs, ys, color, dash) => {
    ctx.strokeStyle = color;
    ctx.setLineDash(dash);
    ctx.lineWidth = 2;
    ctx.beginPath();
    let started = false;
    xs.forEach((x, i) => {
      if (ys[i] === null) { started = false; return; }
      if (started) ctx.lineTo(px(x), py(ys[i])); else ctx.moveTo(px(x), py(ys[i]));
      started = true;
    });
    ctx.stroke();
    ctx.setLineDash([]);
  };
  legend.innerHTML = "";
  if (withExact) {
    line(set.curves[0].x, set.exact, "#000", [6, 4]);
    legend.innerHTML += `<span><i style="background:#000"></i>exact fidelity</span>`;
  }
  set.curves.forEach((c, k) => {
    const color = COLORS[k % COLORS.length];
    line(c.x, c.lower, color, []);
    legend.innerHTML += `<span><i style="background:${color}"></i>${c.label}</span>`;
  });
}

function plotHeatmap(canvas, map) {
  const ctx = canvas.getContext("2d");
  const cell = canvas.width / map.d;
  const max = Math.max(...map.p.flat());
  ctx.font = "10px sans-serif";
  map.p.forEach((row, a) => row.forEach((v, b) => {
    const t = Math.sqrt(v / max);
    ctx.fillStyle = `rgb(${Math.round(255 * (1 - t))}, ${Math.round(255 * (1 - 0.6 * t))}, 255)`;
    ctx.fillRect(b * cell, a * cell, cell, cell);
    ctx.fillStyle = t > 0.6 ? "#fff" : "#333";
    ctx.fillText(v.toFixed(3), b * cell + 6, a * cell + cell / 2 + 3);
  }));
}

function guard(fn) {
  try { fn(); $("status").textContent = ""; } catch (e) { $("status").textContent = String(e); }
}

function drawWhiteNoise() {
  guard(() => {
    const set = JSON.parse(whiteNoiseCurves(+$("wn-d").value, +$("wn-m").value, $("wn-chi").value, 51));
    plotCurves($("wn-plot"), $("wn-legend"), set, true);
  });
}

function drawHeatmap() {
  guard(() => {
    const a = +$("hm-a").value, b = +$("hm-b").value;
    $("hm-vals").textContent = `eps_A = ${a.toFixed(3)}, eps_B = ${b.toFixed(3)}`;
    plotHeatmap($("hm-plot"), JSON.parse(crosstalkHeatmap(a, b)));
  });
}

function drawRatio() {
  guard(() => {
    const set = JSON.parse(crosstalkRatioCurves(+$("cr-total").value, 41));
    plotCurves($("cr-plot"), $("cr-legend"), set, false);
  });
}

await init();
$("wn-go").addEventListener("click", drawWhiteNoise);
$("hm-a").addEventListener("input", drawHeatmap);
$("hm-b").addEventListener("input", drawHeatmap);
$("cr-go").addEventListener("click", drawRatio);
drawWhiteNoise();
drawHeatmap();
drawRatio();

import init, { closedFormCurve, squeezedPoint, spdcCurve } from "./pkg/hybrid_wasm.js";

const SAMPLES = 200;

function num(form, name) {
  return parseFloat(form.querySelector(`[name=${name}]`).value);
}

function show(form, text, isError = false) {
  const out = form.querySelector(".out");
  out.textContent = text;
  out.className = isError ? "out err" : "out";
}

// Two series on a shared x axis: left axis in blue, right axis in red.
function plot(canvas, triples, xLabel, leftLabel, rightLabel) {
  const ctx = canvas.getContext("2d");
  const { width: w, height: h } = canvas;
  const pad = 50;
  ctx.clearRect(0, 0, w, h);
  const xs = [], ys = [], zs = [];
  for (let i = 0; i < triples.length; i += 3) {
    xs.push(triples[i]); ys.push(triples[i + 1]); zs.push(triples[i + 2]);
  }
  const range = (v) => {
    let lo = Math.min(...v), hi = Math.max(...v);
    if (hi - lo < 1e-12) { lo -= 0.5 * Math.abs(lo) + 1e-12; hi += 0.5 * Math.abs(hi) + 1e-12; }
    return [lo, hi];
  };
  const [x0, x1] = range(xs), [y0, y1] = range(ys), [z0, z1] = range(zs);
  const px = (x) => pad + (x - x0) / (x1 - x0) * (w - 2 * pad);
  const py = (y, lo, hi) => h - pad + (lo - y) / (hi - lo) * (h - 2 * pad);

  ctx.strokeStyle = "#444";
  ctx.strokeRect(pad, pad, w - 2 * pad, h - 2 * pad);
  ctx.font = "12px sans-serif";
  ctx.fillStyle = "#000";
  ctx.textAlign = "center";
  ctx.fillText(xLabel, w / 2, h - 10);
  ctx.fillText(x0.toPrecision(3), pad, h - pad + 15);
  ctx.fillText(x1.toPrecision(3), w - pad, h - pad + 15);

  const series = [[ys, y0, y1, "#1f5fbf", leftLabel, pad - 5, "right"],
                  [zs, z0, z1, "#c0392b", rightLabel, w - pad + 5, "left"]];
  for (const [v, lo, hi, color, label, tx, align] of series) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    v.forEach((y, i) => (i ? ctx.lineTo : ctx.moveTo).call(ctx, px(xs[i]), py(y, lo, hi)));
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.textAlign = align;
    ctx.fillText(hi.toPrecision(4), tx, pad + 4);
    ctx.fillText(lo.toPrecision(4), tx, h - pad);
    ctx.fillText(label, tx, h / 2);
  }
}

function wire(id, action) {
  const form = document.getElementById(id);
  form.querySelector("button").addEventListener("click", () => {
    show(form, "computing...");
    // yield so the status text paints before the blocking call
    setTimeout(() => {
      try {
        action(form);
      } catch (e) {
        show(form, String(e), true);
      }
    }, 10);
  });
}

await init();

wire("curve", (form) => {
  const alpha = num(form, "alpha"), eta = num(form, "eta");
  const v = closedFormCurve(alpha, eta, 0.5, 0.999, SAMPLES);
  plot(form.querySelector("canvas"), v, "t", "F", "P");
  const n = v.length;
  show(form, `t = ${v[n - 3].toFixed(3)}: F = ${v[n - 2].toFixed(5)}, P = ${v[n - 1].toExponential(4)}`);
});

wire("point", (form) => {
  const onOff = form.querySelector("[name=onoff]").checked;
  const [f, p, neg] = squeezedPoint(num(form, "s"), num(form, "alpha"), num(form, "t"),
                                    num(form, "eta"), num(form, "z"), onOff);
  show(form, `fidelity          ${f.toFixed(6)}\nprobability_total ${p.toExponential(5)}\nnegativity        ${neg.toFixed(6)}`);
});

wire("spdc", (form) => {
  const v = spdcCurve(num(form, "s"), num(form, "alpha"), 0.99, num(form, "eta"), num(form, "lmax"), 60);
  plot(form.querySelector("canvas"), v, "lambda", "F_eff", "P_tot");
  const n = v.length;
  show(form, `lambda = ${v[n - 3].toFixed(4)}: F_eff = ${v[n - 2].toFixed(5)}, P_tot = ${v[n - 1].toExponential(4)}`);
});

import init, { circadian_heatmap, wingbeat_analysis, woodbore_analysis } from "./pkg/trapnet_web.js";

// fixed colour ranges so runs are comparable
const SCALES = { counts: [0, 100], temperature: [0, 60], humidity: [0, 100] };

function run(outId, fn) {
  const out = document.getElementById(outId);
  try {
    const t = performance.now();
    const result = JSON.parse(fn());
    out.className = "out";
    return [result, out, performance.now() - t];
  } catch (e) {
    out.className = "out err";
    out.textContent = String(e);
    return [null, out, 0];
  }
}

function colour(v, lo, hi) {
  if (v === null) return "#eee";
  const x = Math.max(0, Math.min(1, (v - lo) / (hi - lo)));
  return `hsl(${240 - 240 * x}, 80%, ${35 + 25 * x}%)`;
}

function drawHeatmap(matrix, metric) {
  const c = document.getElementById("heatmap");
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const cols = matrix.cols.length;
  const left = 30;
  const w = (c.width - left) / cols;
  const h = c.height / 24;
  const [lo, hi] = SCALES[metric];
  for (let r = 0; r < 24; r++) {
    for (let j = 0; j < cols; j++) {
      g.fillStyle = colour(matrix.cells[r][j], lo, hi);
      g.fillRect(left + j * w, r * h, Math.ceil(w), Math.ceil(h));
    }
    if (r % 3 === 0) {
      g.fillStyle = "#333";
      g.fillText(String(r).padStart(2, "0"), 4, r * h + h);
    }
  }
}

function drawLine(id, xs, ys, { logY = false, markers = [] } = {}) {
  const c = document.getElementById(id);
  const g = c.getContext("2d");
  g.clearRect(0, 0, c.width, c.height);
  const vals = logY ? ys.map((y) => Math.log10(Math.max(y, 1e-12))) : ys;
  const lo = Math.min(...vals);
  const hi = Math.max(...vals);
  const x0 = xs[0];
  const x1 = xs[xs.length - 1];
  const px = (x) => ((x - x0) / (x1 - x0 || 1)) * (c.width - 10) + 5;
  const py = (y) => c.height - 5 - ((y - lo) / (hi - lo || 1)) * (c.height - 10);
  g.strokeStyle = "#246";
  g.beginPath();
  vals.forEach((y, i) => (i ? g.lineTo(px(xs[i]), py(y)) : g.moveTo(px(xs[i]), py(y))));
  g.stroke();
  g.strokeStyle = "#c22";
  for (const m of markers) {
    g.beginPath();
    g.moveTo(px(m), 0);
    g.lineTo(px(m), c.height);
    g.stroke();
  }
}

function field(form, name) {
  return form.elements[name].value;
}

function heatmap(form) {
  const metric = field(form, "metric");
  const [res, out, ms] = run("heatmap-out", () =>
    circadian_heatmap(+field(form, "seed"), +field(form, "devices"), +field(form, "days"), metric),
  );
  if (!res) return;
  drawHeatmap(res.matrix, metric);
  const hours = res.profile.hours;
  let peak = 0;
  hours.forEach((h, i) => {
    if ((h.mean_counts ?? -1) > (hours[peak].mean_counts ?? -1)) peak = i;
  });
  out.textContent = `${res.rows} readings in ${ms.toFixed(0)} ms; mean counts peak at ${peak}:00`;
}

function wingbeat(form) {
  const [res, out] = run("wingbeat-out", () =>
    wingbeat_analysis(+field(form, "f0"), +field(form, "noise"), +field(form, "seed")),
  );
  if (!res) return;
  const f = res.psd.frequencies;
  drawLine("psd", f, res.psd.power, { logY: true, markers: res.fundamental_hz ? [res.fundamental_hz] : [] });
  const f0 = res.fundamental_hz === null ? "none" : `${res.fundamental_hz.toFixed(1)} Hz`;
  out.textContent = `fundamental ${f0}, sex ${res.sex}, harmonics ${res.harmonics_hz.map((h) => h.toFixed(0)).join(", ")}`;
}

function woodbore(form) {
  const [res, out] = run("woodbore-out", () =>
    woodbore_analysis(+field(form, "rate"), +field(form, "noise"), +field(form, "seed")),
  );
  if (!res) return;
  const n = res.envelope.length;
  const xs = res.envelope.map((_, i) => (i / n) * res.duration_s);
  drawLine("envelope", xs, res.envelope, { markers: res.impulses.impulse_times });
  const v = res.verdict;
  out.textContent =
    `${res.impulses.impulse_times.length} impulses detected (${res.true_clicks.length} generated), ` +
    `${res.impulses.impulse_rate_per_min.toFixed(1)}/min: ${v.infested ? "infested" : "clear"} ` +
    `(confidence ${v.confidence.toFixed(2)})`;
}

const handlers = { "heatmap-form": heatmap, "wingbeat-form": wingbeat, "woodbore-form": woodbore };

await init();
for (const [id, fn] of Object.entries(handlers)) {
  const form = document.getElementById(id);
  form.addEventListener("submit", (e) => {
    e.preventDefault();
    fn(form);
  });
  fn(form);
}

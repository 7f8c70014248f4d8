import init, { nms_profile, tune, score_captions } from "./pkg/denseval_wasm.js";

const $ = (id) => document.getElementById(id);

function clear(canvas) {
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  ctx.font = "12px system-ui, sans-serif";
  return ctx;
}

function guard(errorEl, fn) {
  try {
    errorEl.textContent = "";
    fn();
  } catch (e) {
    errorEl.textContent = String(e);
  }
}

function drawTimeline(segments, kept) {
  const canvas = $("timeline");
  const ctx = clear(canvas);
  const end = Math.max(1, ...segments.map((s) => s.end));
  const x = (t) => 10 + (t / end) * (canvas.width - 20);
  const rowH = Math.min(24, (canvas.height - 20) / Math.max(1, segments.length));
  const keep = new Set(kept);
  segments.forEach((s, i) => {
    const y = 10 + i * rowH;
    ctx.fillStyle = ctx.strokeStyle = keep.has(i) ? "#2a6" : "#999";
    if (keep.has(i)) ctx.fillRect(x(s.start), y, x(s.end) - x(s.start), rowH - 4);
    else ctx.strokeRect(x(s.start), y, x(s.end) - x(s.start), rowH - 4);
    ctx.fillStyle = "#222";
    ctx.fillText(s.score.toFixed(2), x(s.end) + 4, y + rowH - 8);
  });
}

function drawProfile(profile, threshold) {
  const canvas = $("profile");
  const ctx = clear(canvas);
  const max = Math.max(1, ...profile.map(([, c]) => c));
  const w = (canvas.width - 40) / profile.length;
  const h = canvas.height - 30;
  profile.forEach(([t, c], i) => {
    const bar = (c / max) * h;
    ctx.fillStyle = Math.abs(t - threshold) < 0.025 ? "#2a6" : "#bbb";
    ctx.fillRect(30 + i * w, 10 + h - bar, w - 2, bar);
  });
  ctx.fillStyle = "#222";
  ctx.fillText(`${max}`, 4, 18);
  ctx.fillText("0", 30, canvas.height - 6);
  ctx.fillText("1", canvas.width - 20, canvas.height - 6);
  ctx.fillText("segments kept vs threshold", canvas.width / 2 - 70, canvas.height - 6);
}

function updateNms() {
  const threshold = Number($("threshold").value);
  $("threshold-value").textContent = threshold.toFixed(2);
  guard($("nms-error"), () => {
    const segments = JSON.parse($("segments").value);
    const out = JSON.parse(nms_profile($("segments").value, threshold));
    drawTimeline(segments, out.kept);
    drawProfile(out.profile, threshold);
  });
}

function drawHistory(history) {
  const canvas = $("history");
  const ctx = clear(canvas);
  const values = history.flatMap((g) => [g.best, g.mean]);
  const lo = Math.min(...values);
  const hi = Math.max(...values);
  const span = hi - lo || 1;
  const x = (g) => 40 + (g / Math.max(1, history.length - 1)) * (canvas.width - 60);
  const y = (v) => canvas.height - 20 - ((v - lo) / span) * (canvas.height - 40);
  for (const [key, color] of [["best", "#2a6"], ["mean", "#36c"]]) {
    ctx.strokeStyle = color;
    ctx.beginPath();
    history.forEach((g, i) => (i ? ctx.lineTo(x(g.generation), y(g[key])) : ctx.moveTo(x(g.generation), y(g[key]))));
    ctx.stroke();
    ctx.fillStyle = color;
    ctx.fillText(key, canvas.width - 50, key === "best" ? 14 : 28);
  }
  ctx.fillStyle = "#222";
  ctx.fillText(hi.toFixed(2), 2, 14);
  ctx.fillText(lo.toFixed(2), 2, canvas.height - 16);
}

function runTune() {
  guard($("tune-error"), () => {
    const out = JSON.parse(
      tune($("table").value, Number($("peak").value), Number($("seed").value) >>> 0, Number($("generations").value) >>> 0),
    );
    drawHistory(out.history);
    $("tune-result").textContent =
      `best threshold ${out.best_threshold} fitness ${out.best_fitness} (${out.evaluated.length} evaluations)`;
  });
}

function updateScores() {
  guard($("score-error"), () => {
    const s = JSON.parse(score_captions($("candidate").value, $("reference").value, $("mode").value));
    const heads = ["BLEU@1", "BLEU@2", "BLEU@3", "BLEU@4", "METEOR"];
    const vals = [...s.bleu, s.meteor].map((v) => v.toFixed(3));
    $("scores").innerHTML =
      `<tr>${heads.map((h) => `<th>${h}</th>`).join("")}</tr>` +
      `<tr>${vals.map((v) => `<td>${v}</td>`).join("")}</tr>`;
  });
}

await init();
$("threshold").addEventListener("input", updateNms);
$("segments").addEventListener("input", updateNms);
$("run-tune").addEventListener("click", runTune);
for (const id of ["candidate", "reference", "mode"]) $(id).addEventListener("input", updateScores);
updateNms();
runTune();
updateScores();

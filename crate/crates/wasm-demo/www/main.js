import init, { Demo } from "./pkg/irrm_wasm_demo.js";

const MAX_SIDE = 160;
const VIEW_SCALE = 2; // css upscale for the small canvases

let demo = null;
let losses = [];
let training = false;

const $ = (id) => document.getElementById(id);
const status = (msg) => { $("status").textContent = msg; };

function drawFrame(canvas, frame, viewScale) {
  const w = frame.width, h = frame.height;
  canvas.width = w;
  canvas.height = h;
  canvas.style.width = `${w * viewScale}px`;
  canvas.style.height = `${h * viewScale}px`;
  const ctx = canvas.getContext("2d");
  ctx.putImageData(new ImageData(new Uint8ClampedArray(frame.pixels), w, h), 0, 0);
}

function refreshStatics() {
  for (let b = 0; b < 4; b++) {
    drawFrame($(`band${b}`), demo.band_view(b), VIEW_SCALE);
  }
}

function refreshRoundtrip() {
  if (!demo) return;
  const sigma = parseFloat($("sigma").value);
  const seed = parseInt($("seed").value, 10) || 0;
  drawFrame($("lr"), demo.lr_view(), VIEW_SCALE * 2);
  drawFrame($("recon"), demo.roundtrip(sigma, seed), VIEW_SCALE);
  const p = demo.last_psnr();
  $("psnr").textContent = Number.isFinite(p) ? p.toFixed(2) : "∞";
}

function drawLossChart() {
  const canvas = $("loss-chart");
  const ctx = canvas.getContext("2d");
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (losses.length < 2) return;
  const logs = losses.map((v) => Math.log10(Math.max(v, 1e-6)));
  const lo = Math.min(...logs), hi = Math.max(...logs);
  const span = Math.max(hi - lo, 1e-9);
  ctx.strokeStyle = "#4a9";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  logs.forEach((v, i) => {
    const x = (i / (logs.length - 1)) * (canvas.width - 8) + 4;
    const y = canvas.height - 6 - ((v - lo) / span) * (canvas.height - 12);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
}

function loadPixels(draw, w, h) {
  const canvas = $("original");
  canvas.width = w; // also clears, so all drawing happens in `draw`
  canvas.height = h;
  canvas.style.width = `${w * VIEW_SCALE}px`;
  canvas.style.height = `${h * VIEW_SCALE}px`;
  const ctx = canvas.getContext("2d");
  draw(ctx);
  const rgba = ctx.getImageData(0, 0, w, h).data;
  demo = new Demo(w, h, new Uint8Array(rgba.buffer), 1);
  losses = [];
  drawLossChart();
  status(`model ready: ${demo.param_count()} parameters, 0 steps`);
  refreshStatics();
  refreshRoundtrip();
}

function drawTestPattern() {
  const w = 128, h = 128;
  loadPixels((ctx) => {
    const img = ctx.createImageData(w, h);
    for (let r = 0; r < h; r++) {
      for (let c = 0; c < w; c++) {
        const i = (r * w + c) * 4;
        const rings = Math.sin(Math.hypot(r - 64, c - 64) * 0.55) * 0.5 + 0.5;
        const checker = ((r >> 3) + (c >> 3)) % 2 ? 0.85 : 0.2;
        img.data[i] = rings * 255;
        img.data[i + 1] = checker * 255;
        img.data[i + 2] = (0.3 + 0.7 * c / w) * 255;
        img.data[i + 3] = 255;
      }
    }
    ctx.putImageData(img, 0, 0);
  }, w, h);
}

$("file").addEventListener("change", (ev) => {
  const file = ev.target.files[0];
  if (!file) return;
  const url = URL.createObjectURL(file);
  const img = new Image();
  img.onload = () => {
    const scale = Math.min(1, MAX_SIDE / Math.max(img.width, img.height));
    const w = Math.max(16, Math.round(img.width * scale) & ~1);
    const h = Math.max(16, Math.round(img.height * scale) & ~1);
    loadPixels((ctx) => ctx.drawImage(img, 0, 0, w, h), w, h);
    URL.revokeObjectURL(url);
  };
  img.src = url;
});

$("pattern").addEventListener("click", drawTestPattern);

$("sigma").addEventListener("input", () => {
  $("sigma-val").textContent = parseFloat($("sigma").value).toFixed(2);
  refreshRoundtrip();
});

$("seed").addEventListener("change", refreshRoundtrip);

$("train").addEventListener("click", () => {
  if (!demo || training) return;
  training = true;
  let remaining = 50;
  const chunk = () => {
    const n = Math.min(5, remaining);
    losses.push(...demo.train_steps(n));
    remaining -= n;
    drawLossChart();
    status(`training… ${demo.steps_done()} steps, loss ${losses.at(-1).toFixed(4)}`);
    if (remaining > 0) {
      setTimeout(chunk, 0);
    } else {
      training = false;
      status(`trained: ${demo.steps_done()} steps, loss ${losses.at(-1).toFixed(4)}`);
      refreshRoundtrip();
    }
  };
  chunk();
});

$("reset").addEventListener("click", () => {
  if (!demo || training) return;
  demo.reset(1);
  losses = [];
  drawLossChart();
  status(`model reset: ${demo.param_count()} parameters, 0 steps`);
  refreshRoundtrip();
});

await init();
drawTestPattern();

import init, { edge_probabilities, sample_tree, map_tree_edges, cycle_census } from "./pkg/treegm_web.js";

const $ = (id) => document.getElementById(id);
const num = (id) => Number($(id).value);
let drawCount = 0;

function params() {
  return [$("shape").value, num("p"), num("n"), num("seed")];
}

function layout(p, w, h) {
  const r = Math.min(w, h) / 2 - 30;
  return Array.from({ length: p }, (_, i) => {
    const a = (2 * Math.PI * i) / p - Math.PI / 2;
    return [w / 2 + r * Math.cos(a), h / 2 + r * Math.sin(a)];
  });
}

// edges: list of [u, v, weight in 0..1]
function draw(p, edges) {
  const c = $("graph");
  const ctx = c.getContext("2d");
  ctx.clearRect(0, 0, c.width, c.height);
  const pos = layout(p, c.width, c.height);
  for (const [u, v, w] of edges) {
    ctx.strokeStyle = `rgba(20, 60, 160, ${w})`;
    ctx.lineWidth = 1 + 4 * w;
    ctx.beginPath();
    ctx.moveTo(...pos[u]);
    ctx.lineTo(...pos[v]);
    ctx.stroke();
  }
  ctx.font = "11px sans-serif";
  ctx.textAlign = "center";
  ctx.textBaseline = "middle";
  pos.forEach(([x, y], i) => {
    ctx.fillStyle = "#fff";
    ctx.strokeStyle = "#333";
    ctx.lineWidth = 1;
    ctx.beginPath();
    ctx.arc(x, y, 10, 0, 2 * Math.PI);
    ctx.fill();
    ctx.stroke();
    ctx.fillStyle = "#000";
    ctx.fillText(String(i), x, y);
  });
}

function pairs(flat) {
  const out = [];
  for (let i = 0; i < flat.length; i += 2) out.push([flat[i], flat[i + 1], 1]);
  return out;
}

function guard(f) {
  return () => {
    try {
      $("status").textContent = "";
      f();
    } catch (e) {
      $("status").textContent = String(e.message ?? e);
    }
  };
}

$("probs").onclick = guard(() => {
  const [shape, p, n, seed] = params();
  const out = edge_probabilities(shape, p, n, seed);
  const edges = [];
  for (let i = 0; i < p; i++)
    for (let j = i + 1; j < p; j++) {
      const w = out[i * p + j];
      if (w > 0.01) edges.push([i, j, w]);
    }
  draw(p, edges);
  $("summary").textContent = `expected true positive rate ${out[p * p].toFixed(4)}`;
});

$("draw").onclick = guard(() => {
  const [shape, p, n, seed] = params();
  drawCount += 1;
  draw(p, pairs(sample_tree(shape, p, n, seed, drawCount)));
  $("summary").textContent = `posterior draw #${drawCount}`;
});

$("map").onclick = guard(() => {
  const [shape, p, n, seed] = params();
  draw(p, pairs(map_tree_edges(shape, p, n, seed)));
  $("summary").textContent = "maximum a posteriori tree";
});

$("cycles").onclick = guard(() => {
  const out = cycle_census(num("cn"), num("cp"), num("cs"));
  let html = "<tr><th>length</th><th>count</th><th>Poisson mean</th></tr>";
  for (let i = 0; i < out.length; i += 3) {
    html += `<tr><td>${out[i]}</td><td>${out[i + 1]}</td><td>${out[i + 2].toPrecision(4)}</td></tr>`;
  }
  $("census").innerHTML = html;
});

init().then(() => {
  $("status").textContent = "";
}, (e) => {
  $("status").textContent = `failed to load wasm: ${e}`;
});

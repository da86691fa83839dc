import init, { DemoApp } from "./pkg/fashionrec_web_demo.js";

const $ = (id) => document.getElementById(id);

function esc(s) {
  return String(s).replace(/[&<>"]/g, (c) => ({ "&": "&amp;", "<": "&lt;", ">": "&gt;", '"': "&quot;" })[c]);
}

function option(sel, value, text = value) {
  const o = document.createElement("option");
  o.value = value;
  o.textContent = text;
  sel.appendChild(o);
}

function fail(out, e) {
  out.innerHTML = `<p class="err">${esc(e.message ?? e)}</p>`;
}

function hitsTable(hits) {
  if (hits.length === 0) return `<p class="muted">No matching products.</p>`;
  const rows = hits.map((h, i) => {
    const terms = h.explanation.terms
      .map((t) => `${esc(t.term)}: idf ${t.idf.toFixed(3)} x tf ${t.tf_component.toFixed(3)} = ${t.contribution.toFixed(4)}`)
      .join("<br>");
    return `<tr><td>${i + 1}</td><td class="num">${h.score.toFixed(4)}</td>
      <td>${esc(h.product.id)}</td><td>${esc(h.product.label)}</td>
      <td>${esc(h.product.title)}<br><span class="muted">${esc(h.product.description ?? "")}</span>
      <details><summary>explain</summary>${terms}<br>proximity bonus ${h.explanation.proximity_bonus.toFixed(4)}</details></td></tr>`;
  });
  return `<table><tr><th>#</th><th>score</th><th>id</th><th>label</th><th>product</th></tr>${rows.join("")}</table>`;
}

function runSearch(app) {
  const out = $("s-out");
  try {
    const r = JSON.parse(app.search(
      $("s-cluster").value, $("s-query").value, Number($("s-k").value),
      Number($("s-k1").value), Number($("s-b").value), Number($("s-prox").value),
    ));
    const note = r.fallback ? `<p class="muted">Cluster not found; searched all clusters.</p>` : "";
    out.innerHTML = note + hitsTable(r.hits);
  } catch (e) {
    fail(out, e);
  }
}

function runClassify(app) {
  const out = $("c-out");
  const labels = [...document.querySelectorAll("#c-labels input:checked")].map((c) => c.value);
  try {
    const r = JSON.parse(app.classifyCrop($("c-crop").value, labels.join(",")));
    const rows = r.ranked.map((s) => {
      const w = Math.max(0, s.score) * 200;
      return `<tr><td>${esc(s.label)}</td><td class="num">${s.score.toFixed(4)}</td><td><span class="bar" style="width:${w}px"></span></td></tr>`;
    });
    out.innerHTML = `<p>Assigned label: <strong>${esc(r.label)}</strong></p><table>${rows.join("")}</table>`;
  } catch (e) {
    fail(out, e);
  }
}

function runRecommend(app) {
  const out = $("r-out");
  try {
    const r = JSON.parse(app.recommend($("r-image").value, Number($("r-k").value)));
    if (r.status === "no_detections") {
      out.innerHTML = `<p class="muted">No garments detected.</p>`;
      return;
    }
    out.innerHTML = r.groups.map((g) => {
      const d = g.detection;
      const head = `<h3>${esc(g.crop_key)}: ${esc(d.class)} (confidence ${d.confidence.toFixed(2)})</h3>`;
      if (g.status === "error") return head + `<p class="err">${esc(g.error.code)}: ${esc(g.error.message)}</p>`;
      return head + `<p>Label <strong>${esc(g.assigned_label)}</strong> (cosine ${g.classification.score.toFixed(3)}),
        query <code>${esc(g.query_text)}</code></p>` + hitsTable(g.hits);
    }).join("");
  } catch (e) {
    fail(out, e);
  }
}

async function main() {
  await init();
  const app = new DemoApp();
  const o = JSON.parse(app.overview());
  $("status").textContent = `${o.records} products in ${o.clusters.length} clusters, ${o.images.length} outfit images.`;

  o.clusters.forEach((c) => option($("s-cluster"), c));
  $("s-cluster").value = "jeans";
  o.crops.forEach((c) => option($("c-crop"), c));
  o.images.forEach((i) => option($("r-image"), i));
  for (const l of o.labels) {
    const lab = document.createElement("label");
    lab.innerHTML = `<input type="checkbox" value="${esc(l)}"> ${esc(l)}`;
    $("c-labels").appendChild(lab);
  }
  for (const l of ["jeans", "chinos", "cargo pants", "joggers", "dress trousers"]) {
    const box = document.querySelector(`#c-labels input[value="${l}"]`);
    if (box) box.checked = true;
  }

  for (const id of ["s-cluster", "s-query", "s-k", "s-k1", "s-b", "s-prox"]) $(id).addEventListener("input", () => runSearch(app));
  $("c-crop").addEventListener("change", () => runClassify(app));
  $("c-labels").addEventListener("change", () => runClassify(app));
  for (const id of ["r-image", "r-k"]) $(id).addEventListener("input", () => runRecommend(app));

  runSearch(app);
  runClassify(app);
  runRecommend(app);
}

main().catch((e) => {
  $("status").innerHTML = `<span class="err">${esc(e.message ?? e)}</span>`;
});

import init, { entropy_explorer, Bootstrap } from "./pkg/kcrf_demo.js";

const $ = (id) => document.getElementById(id);
const fmt = (x) => x.toFixed(3);
let boot = null;

function showError(el, e) {
  el.innerHTML = `<p class="err">${e.message ?? e}</p>`;
}

function explore() {
  const w = [parseFloat($("w-ent").value), parseFloat($("w-o").value)];
  $("w-ent-v").textContent = w[0].toFixed(1);
  $("w-o-v").textContent = w[1].toFixed(1);
  try {
    const r = JSON.parse(entropy_explorer(new Float64Array(w), parseFloat($("delta-x").value)));
    const tags = ["ENT", "O"];
    $("entropy-out").innerHTML =
      `<p>p = (${r.distribution.map(fmt).join(", ")}), H = ${fmt(r.entropy)} of at most ${fmt(r.max_entropy)}; ` +
      (r.selected ? `<b>selected</b> as ${tags[r.winner]} knowledge` : "not selected") + "</p>";
  } catch (e) {
    showError($("entropy-out"), e);
  }
}

function kbList(entries) {
  if (entries.length === 0) return "<i>none</i>";
  return entries.map((e) => `${e.tag} ${e.type} = <b>${e.value}</b>`).join("<br>");
}

function run() {
  $("run-out").textContent = "running...";
  // let the status paint before the synchronous work starts
  setTimeout(() => {
    try {
      const t0 = performance.now();
      boot = new Bootstrap(parseInt($("seed").value, 10), parseFloat($("delta").value), parseFloat($("delta-prime").value));
      const s = JSON.parse(boot.summary());
      const ms = performance.now() - t0;
      const row = (name) => {
        const r = s.scores[name];
        return `<tr><td class="word">${name}</td><td>${fmt(r.precision)}</td><td>${fmt(r.recall)}</td><td>${fmt(r.f1)}</td></tr>`;
      };
      $("run-out").innerHTML =
        `<p>${s.train} train, ${s.unlabeled} unlabeled, ${s.test} test sentences; ` +
        `${s.iterations} expansion iterations; ${ms.toFixed(0)} ms.</p>` +
        `<table><tr><th class="word">system</th><th>P</th><th>R</th><th>F1</th></tr>${row("CRF-Init")}${row("KCRF")}</table>` +
        `<p>Initial knowledge:<br>${kbList(s.initial_kb)}</p><p>Added by expansion:<br>${kbList(s.added)}</p>`;
      $("sent").max = boot.testLen() - 1;
      $("sent").value = s.expansion_sentences[0] ?? 0;
      $("show").disabled = false;
      $("custom").disabled = false;
      show();
    } catch (e) {
      boot = null;
      showError($("run-out"), e);
    }
  }, 10);
}

function renderMarginals(m) {
  const ent = m.tags.indexOf("ENT");
  const head = `<tr><th class="word">token</th>${m.gold ? "<th>gold</th>" : ""}` +
    `<th>P(ENT) initial</th><th>P(ENT) expanded</th><th class="word">knowledge (expanded)</th></tr>`;
  const rows = m.tokens.map((tok, i) => {
    const a = m.runs.initial.marginals[i][ent];
    const b = m.runs.expanded.marginals[i][ent];
    const bar = (p) => `<span class="bar" style="width:${(p * 80).toFixed(0)}px"></span> ${fmt(p)}`;
    const gold = m.gold ? `<td>${m.tags[m.gold[i]]}</td>` : "";
    return `<tr class="${b > 0.5 ? "ent" : ""}"><td class="word">${tok}</td>${gold}<td>${bar(a)}</td><td>${bar(b)}</td>` +
      `<td class="word">${m.runs.expanded.knowledge[i].join(", ")}</td></tr>`;
  });
  $("marg-out").innerHTML = `<table>${head}${rows.join("")}</table>`;
}

function show() {
  if (!boot) return;
  try {
    renderMarginals(JSON.parse(boot.marginals(parseInt($("sent").value, 10))));
  } catch (e) {
    showError($("marg-out"), e);
  }
}

function custom() {
  if (!boot) return;
  try {
    renderMarginals(JSON.parse(boot.custom($("c-product").value.trim(), $("c-verb").value.trim(), $("c-noun").value.trim())));
  } catch (e) {
    showError($("marg-out"), e);
  }
}

await init();
$("status").textContent = "Ready.";
for (const id of ["w-ent", "w-o", "delta-x"]) $(id).addEventListener("input", explore);
$("run").addEventListener("click", run);
$("show").addEventListener("click", show);
$("sent").addEventListener("change", show);
$("custom").addEventListener("click", custom);
explore();

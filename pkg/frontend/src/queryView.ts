// Entity query view: sense cards, a merged-DAG rendering of all hypernym
// paths with per-sense highlighting, and the selected sense's triples.

import { ApiClient, ApiError, EntityDoc, PathDoc } from "./api.js";

interface GraphEdge {
  from: string;
  to: string;
  pathIds: string[];
}

export class QueryView {
  private doc: EntityDoc | null = null;
  private selectedSense: string | null = null;
  private highlighted: Set<string> = new Set();
  private requestToken = 0;

  private readonly form: HTMLFormElement;
  private readonly input: HTMLInputElement;
  private readonly status: HTMLElement;
  private readonly senseList: HTMLElement;
  private readonly pathPanel: HTMLElement;
  private readonly triplePanel: HTMLElement;

  constructor(
    container: HTMLElement,
    private readonly api: ApiClient,
    private readonly onSearch?: (name: string) => void,
  ) {
    container.innerHTML = `
      <form class="search-form">
        <input type="search" class="search-input" placeholder="输入实体名称…" />
        <button type="submit">查询</button>
      </form>
      <div class="status-area"></div>
      <div class="query-columns">
        <section class="sense-panel"><h2>义项</h2><div class="sense-list"></div></section>
        <section class="path-panel"><h2>上位词路径</h2><div class="path-area"></div></section>
        <section class="triple-panel"><h2>三元组</h2><div class="triple-area"></div></section>
      </div>`;
    this.form = container.querySelector(".search-form") as HTMLFormElement;
    this.input = container.querySelector(".search-input") as HTMLInputElement;
    this.status = container.querySelector(".status-area") as HTMLElement;
    this.senseList = container.querySelector(".sense-list") as HTMLElement;
    this.pathPanel = container.querySelector(".path-area") as HTMLElement;
    this.triplePanel = container.querySelector(".triple-area") as HTMLElement;
    this.form.addEventListener("submit", (event) => {
      event.preventDefault();
      const name = this.input.value.trim();
      if (name) {
        if (this.onSearch) this.onSearch(name);
        void this.search(name);
      }
    });
  }

  get state(): { entity: string | null; selectedSense: string | null; highlighted: string[] } {
    return {
      entity: this.doc ? this.doc.entity : null,
      selectedSense: this.selectedSense,
      highlighted: [...this.highlighted].sort(),
    };
  }

  async search(name: string): Promise<void> {
    this.input.value = name;
    const token = ++this.requestToken;
    this.setStatus("查询中…", "info");
    let doc: EntityDoc;
    try {
      doc = await this.api.fetchEntity(name);
    } catch (err) {
      if (token !== this.requestToken) return; // superseded by a newer search
      if (err instanceof ApiError && err.status === 404) {
        this.doc = null;
        this.selectedSense = null;
        this.highlighted = new Set();
        this.renderDocument();
        this.setStatus(`没有收录实体 “${name}”`, "warn");
      } else {
        // keep the previous view intact; only show a retryable banner
        this.setStatus(`查询失败：${err instanceof Error ? err.message : String(err)}（可重试）`, "error");
      }
      return;
    }
    if (token !== this.requestToken) return;
    this.doc = doc;
    this.selectedSense = null;
    this.highlighted = new Set();
    this.renderDocument();
    this.setStatus(doc.generated ? "该实体由多源数据即时生成" : "", doc.generated ? "badge" : "info");
  }

  selectSense(senseId: string): void {
    if (!this.doc || !this.doc.senses.some((s) => s.sense_id === senseId)) {
      console.warn(`stale sense id ignored: ${senseId}`);
      return;
    }
    this.selectedSense = senseId;
    this.highlighted = new Set(
      this.doc.paths.filter((p) => p.sense_id === senseId).map((p) => p.path_id),
    );
    this.applyHighlights();
    this.renderTriples();
    this.renderSenseSelection();
  }

  private setStatus(text: string, kind: "info" | "warn" | "error" | "badge"): void {
    this.status.textContent = text;
    this.status.className = `status-area status-${kind}`;
  }

  private renderDocument(): void {
    this.senseList.innerHTML = "";
    this.pathPanel.innerHTML = "";
    this.triplePanel.innerHTML = "";
    if (!this.doc) return;

    for (const sense of this.doc.senses) {
      const card = document.createElement("div");
      card.className = "sense-card";
      card.dataset.senseId = sense.sense_id;
      const title = document.createElement("h3");
      title.textContent = sense.sense_id;
      const detail = document.createElement("p");
      detail.textContent = sense.phrases.join(" ");
      card.append(title, detail);
      card.addEventListener("click", () => this.selectSense(sense.sense_id));
      this.senseList.append(card);
    }

    const list = document.createElement("ul");
    list.className = "path-list";
    for (const path of this.doc.paths) {
      const row = document.createElement("li");
      row.className = "path-row";
      row.dataset.pathId = path.path_id;
      row.textContent = [this.doc.entity, ...path.nodes].join(" → ");
      if (path.sense_id !== null && path.score !== null) {
        const tag = document.createElement("span");
        tag.className = "path-sense-tag";
        tag.textContent = ` [${path.sense_id} · ${path.score.toFixed(3)}]`;
        row.append(tag);
      }
      list.append(row);
    }
    this.pathPanel.append(list);
    this.pathPanel.append(this.renderGraph(this.doc));
    this.applyHighlights();
    this.renderTriples();
    this.renderSenseSelection();
  }

  // Paths share nodes (every chain starts at the entity, many end at the
  // same root), so they are drawn as one merged DAG: one column per depth
  // level, one node per term, edges tagged with the paths they belong to.
  private renderGraph(doc: EntityDoc): SVGSVGElement {
    const levels = new Map<string, number>();
    levels.set(doc.entity, 0);
    for (const path of doc.paths) {
      path.nodes.forEach((node, i) => {
        levels.set(node, Math.max(levels.get(node) ?? 0, i + 1));
      });
    }
    const edges: GraphEdge[] = [];
    const edgeIndex = new Map<string, GraphEdge>();
    for (const path of doc.paths) {
      const chain = [doc.entity, ...path.nodes];
      for (let i = 0; i + 1 < chain.length; i++) {
        const key = `${chain[i]}→${chain[i + 1]}`;
        let edge = edgeIndex.get(key);
        if (!edge) {
          edge = { from: chain[i], to: chain[i + 1], pathIds: [] };
          edgeIndex.set(key, edge);
          edges.push(edge);
        }
        edge.pathIds.push(path.path_id);
      }
    }

    const columnWidth = 150;
    const rowHeight = 56;
    const byLevel = new Map<number, string[]>();
    for (const [term, level] of levels) {
      const bucket = byLevel.get(level) ?? [];
      bucket.push(term);
      byLevel.set(level, bucket);
    }
    const positions = new Map<string, { x: number; y: number }>();
    let maxRows = 1;
    for (const [level, terms] of byLevel) {
      terms.sort();
      maxRows = Math.max(maxRows, terms.length);
      terms.forEach((term, row) => {
        positions.set(term, { x: 40 + level * columnWidth, y: 40 + row * rowHeight });
      });
    }

    const svgNs = "http://www.w3.org/2000/svg";
    const svg = document.createElementNS(svgNs, "svg");
    svg.setAttribute("class", "path-graph");
    svg.setAttribute("width", String(80 + columnWidth * byLevel.size));
    svg.setAttribute("height", String(40 + rowHeight * maxRows));

    for (const edge of edges) {
      const from = positions.get(edge.from);
      const to = positions.get(edge.to);
      if (!from || !to) continue;
      const line = document.createElementNS(svgNs, "line");
      line.setAttribute("class", "graph-edge");
      line.setAttribute("x1", String(from.x + 40));
      line.setAttribute("y1", String(from.y));
      line.setAttribute("x2", String(to.x - 40));
      line.setAttribute("y2", String(to.y));
      line.setAttribute("data-path-ids", edge.pathIds.join(" "));
      svg.append(line);
    }
    for (const [term, pos] of positions) {
      const group = document.createElementNS(svgNs, "g");
      group.setAttribute("class", "graph-node");
      group.setAttribute("data-term", term);
      const circle = document.createElementNS(svgNs, "circle");
      circle.setAttribute("cx", String(pos.x));
      circle.setAttribute("cy", String(pos.y));
      circle.setAttribute("r", "6");
      const label = document.createElementNS(svgNs, "text");
      label.setAttribute("x", String(pos.x));
      label.setAttribute("y", String(pos.y - 12));
      label.setAttribute("text-anchor", "middle");
      label.textContent = term;
      group.append(circle, label);
      svg.append(group);
    }
    return svg;
  }

  private applyHighlights(): void {
    for (const row of this.pathPanel.querySelectorAll<HTMLElement>(".path-row")) {
      row.classList.toggle("highlighted", this.highlighted.has(row.dataset.pathId ?? ""));
    }
    for (const edge of this.pathPanel.querySelectorAll<SVGElement>(".graph-edge")) {
      const ids = (edge.getAttribute("data-path-ids") ?? "").split(" ").filter(Boolean);
      edge.classList.toggle(
        "highlighted",
        ids.some((id) => this.highlighted.has(id)),
      );
    }
  }

  private renderSenseSelection(): void {
    for (const card of this.senseList.querySelectorAll<HTMLElement>(".sense-card")) {
      card.classList.toggle("selected", card.dataset.senseId === this.selectedSense);
    }
  }

  private renderTriples(): void {
    this.triplePanel.innerHTML = "";
    if (!this.doc || this.selectedSense === null) return;
    const sense = this.doc.senses.find((s) => s.sense_id === this.selectedSense);
    if (!sense) return;
    const table = document.createElement("table");
    table.className = "triple-table";
    for (const triple of sense.triples) {
      const row = document.createElement("tr");
      const rel = document.createElement("td");
      rel.textContent = triple.relation;
      const val = document.createElement("td");
      val.textContent = triple.value;
      row.append(rel, val);
      table.append(row);
    }
    this.triplePanel.append(table);
  }

  pathById(pathId: string): PathDoc | undefined {
    return this.doc?.paths.find((p) => p.path_id === pathId);
  }
}

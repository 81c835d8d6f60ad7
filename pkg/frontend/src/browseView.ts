// Top-down schema browser: a lazily expanded tree on the left, entities
// of the selected hypernym path on the right.

import { ApiClient, SchemaNode } from "./api.js";

export class BrowseView {
  private childrenCache = new Map<string, SchemaNode[]>();
  private selectedPath: string[] = [];
  private entitiesToken = 0;

  private readonly treePanel: HTMLElement;
  private readonly entityPanel: HTMLElement;
  private readonly status: HTMLElement;
  private rootsLoaded = false;

  constructor(
    container: HTMLElement,
    private readonly api: ApiClient,
  ) {
    container.innerHTML = `
      <div class="status-area"></div>
      <div class="browse-columns">
        <section class="tree-panel"><h2>层级结构</h2><ul class="tree-root"></ul></section>
        <section class="entity-panel"><h2>路径下的实体</h2><div class="entity-area"></div></section>
      </div>`;
    this.treePanel = container.querySelector(".tree-root") as HTMLElement;
    this.entityPanel = container.querySelector(".entity-area") as HTMLElement;
    this.status = container.querySelector(".status-area") as HTMLElement;
  }

  get state(): { selectedPath: string[]; cachedTerms: string[] } {
    return {
      selectedPath: [...this.selectedPath],
      cachedTerms: [...this.childrenCache.keys()].sort(),
    };
  }

  async loadRoots(): Promise<void> {
    if (this.rootsLoaded) return;
    try {
      // the forest response is used for root labels/counts only; children
      // always arrive through expandNode so each node is fetched lazily,
      // exactly once
      const doc = await this.api.fetchSchema(undefined, 1);
      this.rootsLoaded = true;
      this.treePanel.innerHTML = "";
      for (const root of doc.roots) {
        this.treePanel.append(this.renderNode(root, [root.term]));
      }
      this.setStatus("");
    } catch (err) {
      this.setStatus(`加载失败：${err instanceof Error ? err.message : String(err)}（可重试）`);
    }
  }

  async expandNode(term: string): Promise<SchemaNode[]> {
    const cached = this.childrenCache.get(term);
    if (cached !== undefined) return cached;
    const doc = await this.api.fetchSchema(term, 1);
    const children = doc.roots.length ? doc.roots[0].children : [];
    this.childrenCache.set(term, children);
    return children;
  }

  async selectPath(terms: string[]): Promise<void> {
    // terms arrive root-first from the tree; the API expects the upward
    // chain from the narrow end to the root
    const upward = [...terms].reverse();
    const token = ++this.entitiesToken;
    try {
      const doc = await this.api.fetchPathEntities(upward);
      if (token !== this.entitiesToken) return;
      this.selectedPath = upward;
      this.renderEntities(doc.entities);
      this.setStatus("");
    } catch (err) {
      if (token !== this.entitiesToken) return;
      this.setStatus(`获取实体失败：${err instanceof Error ? err.message : String(err)}（可重试）`);
    }
  }

  private renderNode(node: SchemaNode, trail: string[]): HTMLElement {
    const item = document.createElement("li");
    item.className = "tree-node";
    item.dataset.term = node.term;

    const toggle = document.createElement("button");
    toggle.type = "button";
    toggle.className = "tree-toggle";
    toggle.textContent = "+";

    const label = document.createElement("span");
    label.className = "tree-label";
    label.textContent = `${node.term} (${node.entity_count})`;
    label.addEventListener("click", () => void this.selectPath(trail));

    const childList = document.createElement("ul");
    childList.className = "tree-children";
    childList.hidden = true;

    let expanded = false;
    toggle.addEventListener("click", async () => {
      if (expanded) {
        expanded = false;
        childList.hidden = true;
        toggle.textContent = "+";
        return;
      }
      try {
        const children = await this.expandNode(node.term);
        if (!childList.childElementCount) {
          for (const child of children) {
            childList.append(this.renderNode(child, [...trail, child.term]));
          }
          if (!children.length) {
            const leaf = document.createElement("li");
            leaf.className = "tree-leaf-note";
            leaf.textContent = "（无下位词）";
            childList.append(leaf);
          }
        }
        expanded = true;
        childList.hidden = false;
        toggle.textContent = "−";
        this.setStatus("");
      } catch (err) {
        this.setStatus(`展开失败：${err instanceof Error ? err.message : String(err)}（可重试）`);
      }
    });

    item.append(toggle, label, childList);
    return item;
  }

  private renderEntities(entities: string[]): void {
    this.entityPanel.innerHTML = "";
    const heading = document.createElement("p");
    heading.className = "entity-path";
    heading.textContent = this.selectedPath.join(" → ");
    this.entityPanel.append(heading);
    if (!entities.length) {
      const empty = document.createElement("p");
      empty.className = "entity-empty";
      empty.textContent = "该路径下没有实体";
      this.entityPanel.append(empty);
      return;
    }
    const list = document.createElement("ul");
    list.className = "entity-list";
    for (const name of entities) {
      const item = document.createElement("li");
      const link = document.createElement("a");
      link.href = `#/query/${encodeURIComponent(name)}`;
      link.textContent = name;
      item.append(link);
      list.append(item);
    }
    this.entityPanel.append(list);
  }

  private setStatus(text: string): void {
    this.status.textContent = text;
    this.status.className = text ? "status-area status-error" : "status-area";
  }
}

// Documents frozen from the toy store the backend test suite builds, so
// the client tests exercise exactly what the server serves.

import type { EntityDoc, PathEntitiesDoc, SchemaDoc } from "../src/api.js";

export const FRUIT_SENSE = "蔷薇科苹果属果实";
export const PHONE_SENSE = "苹果公司的智能手机";

export const APPLE_DOC: EntityDoc = {
  entity: "苹果",
  senses: [
    {
      sense_id: PHONE_SENSE,
      phrases: ["品牌/苹果公司", "类别/手机", "类型/电子产品"],
      triples: [
        { relation: "品牌", value: "苹果公司" },
        { relation: "类别", value: "手机" },
        { relation: "类型", value: "电子产品" },
      ],
      path_ids: ["p0"],
    },
    {
      sense_id: FRUIT_SENSE,
      phrases: ["性味/微甜", "科/蔷薇科", "类别/水果"],
      triples: [
        { relation: "性味", value: "微甜" },
        { relation: "科", value: "蔷薇科" },
        { relation: "类别", value: "水果" },
      ],
      path_ids: ["p1", "p2"],
    },
  ],
  paths: [
    {
      path_id: "p0",
      nodes: ["手机", "电子产品", "物"],
      sense_id: PHONE_SENSE,
      score: 0.9186416270909947,
    },
    {
      path_id: "p1",
      nodes: ["水果", "植物", "生物", "物"],
      sense_id: FRUIT_SENSE,
      score: 0.9429541672723838,
    },
    {
      path_id: "p2",
      nodes: ["水果", "食品", "物"],
      sense_id: FRUIT_SENSE,
      score: 0.9407208683835974,
    },
  ],
  generated: false,
};

export const SCHEMA_FOREST: SchemaDoc = {
  roots: [
    {
      term: "企鹅",
      entity_count: 1,
      children: [{ term: "皇帝企鹅", entity_count: 1, children: [] }],
    },
    {
      term: "物",
      entity_count: 4,
      children: [
        { term: "生物", entity_count: 3, children: [] },
        { term: "电子产品", entity_count: 1, children: [] },
        { term: "食品", entity_count: 3, children: [] },
      ],
    },
  ],
};

export const SCHEMA_BY_ROOT: Record<string, SchemaDoc> = {
  物: {
    roots: [
      {
        term: "物",
        entity_count: 4,
        children: [
          { term: "生物", entity_count: 3, children: [] },
          { term: "电子产品", entity_count: 1, children: [] },
          { term: "食品", entity_count: 3, children: [] },
        ],
      },
    ],
  },
  食品: {
    roots: [
      {
        term: "食品",
        entity_count: 3,
        children: [
          { term: "水果", entity_count: 2, children: [] },
          { term: "面包", entity_count: 1, children: [] },
        ],
      },
    ],
  },
  水果: {
    roots: [
      {
        term: "水果",
        entity_count: 2,
        children: [
          { term: "苹果", entity_count: 1, children: [] },
          { term: "香蕉", entity_count: 1, children: [] },
        ],
      },
    ],
  },
  苹果: {
    roots: [{ term: "苹果", entity_count: 1, children: [] }],
  },
};

export const PATH_ENTITIES: Record<string, PathEntitiesDoc> = {
  "水果→食品→物": { path: ["水果", "食品", "物"], entities: ["苹果", "香蕉"] },
  "苹果→水果→食品→物": { path: ["苹果", "水果", "食品", "物"], entities: [] },
};

export interface FetchLog {
  urls: string[];
  count(predicate: (url: URL) => boolean): number;
}

/**
 * Installs a GET-only fetch stub backed by the frozen documents above.
 * Returns a log of every requested URL for cache-behavior assertions.
 */
export function installFetchMock(): FetchLog {
  const urls: string[] = [];
  const mock = async (input: RequestInfo | URL): Promise<Response> => {
    const raw = typeof input === "string" ? input : input.toString();
    urls.push(raw);
    const url = new URL(raw, "http://testserver");

    const json = (doc: unknown, status = 200) =>
      new Response(JSON.stringify(doc), {
        status,
        headers: { "content-type": "application/json; charset=utf-8" },
      });

    if (url.pathname.startsWith("/api/entity/")) {
      const name = decodeURIComponent(url.pathname.slice("/api/entity/".length));
      if (name === "苹果") return json(APPLE_DOC);
      return json({ error: `unknown entity: ${name}` }, 404);
    }
    if (url.pathname === "/api/schema") {
      const root = url.searchParams.get("root");
      if (root === null) return json(SCHEMA_FOREST);
      const doc = SCHEMA_BY_ROOT[root];
      if (doc) return json(doc);
      return json({ error: `unknown root: ${root}` }, 404);
    }
    if (url.pathname === "/api/path-entities") {
      const path = url.searchParams.get("path") ?? "";
      const doc = PATH_ENTITIES[path];
      if (doc) return json(doc);
      return json({ path: path.split("→"), entities: [] });
    }
    return json({ error: "no such endpoint" }, 404);
  };
  globalThis.fetch = mock as typeof fetch;
  return {
    urls,
    count(predicate: (url: URL) => boolean): number {
      return urls.filter((raw) => predicate(new URL(raw, "http://testserver"))).length;
    },
  };
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

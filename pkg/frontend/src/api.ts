// Typed client for the read-only JSON API. Every call is a GET; the
// client never mutates server state.

export interface TripleDoc {
  relation: string;
  value: string;
}

export interface SenseDoc {
  sense_id: string;
  phrases: string[];
  triples: TripleDoc[];
  path_ids: string[];
}

export interface PathDoc {
  path_id: string;
  nodes: string[];
  sense_id: string | null;
  score: number | null;
}

export interface EntityDoc {
  entity: string;
  senses: SenseDoc[];
  paths: PathDoc[];
  generated: boolean;
}

export interface SchemaNode {
  term: string;
  entity_count: number;
  children: SchemaNode[];
}

export interface SchemaDoc {
  roots: SchemaNode[];
}

export interface PathEntitiesDoc {
  path: string[];
  entities: string[];
}

export const PATH_SEPARATOR = "→"; // →

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function getJson<T>(url: string): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(url, { method: "GET" });
  } catch (err) {
    throw new ApiError(0, `network error: ${String(err)}`);
  }
  if (!resp.ok) {
    let detail = resp.statusText;
    try {
      const body = (await resp.json()) as { error?: string };
      if (body && body.error) detail = body.error;
    } catch {
      // non-JSON error body; keep the status text
    }
    throw new ApiError(resp.status, detail);
  }
  return (await resp.json()) as T;
}

export class ApiClient {
  constructor(private readonly baseUrl: string = "") {}

  fetchEntity(name: string): Promise<EntityDoc> {
    return getJson<EntityDoc>(`${this.baseUrl}/api/entity/${encodeURIComponent(name)}`);
  }

  fetchSchema(root?: string, depth = 1, maxChildren = 20): Promise<SchemaDoc> {
    const params = new URLSearchParams();
    if (root !== undefined) params.set("root", root);
    params.set("depth", String(depth));
    params.set("max_children", String(maxChildren));
    return getJson<SchemaDoc>(`${this.baseUrl}/api/schema?${params.toString()}`);
  }

  fetchPathEntities(path: string[]): Promise<PathEntitiesDoc> {
    const params = new URLSearchParams();
    params.set("path", path.join(PATH_SEPARATOR));
    return getJson<PathEntitiesDoc>(`${this.baseUrl}/api/path-entities?${params.toString()}`);
  }
}

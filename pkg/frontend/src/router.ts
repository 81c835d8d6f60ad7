// Hash-based routes: #/query/{name} and #/browse.

export type Route = { view: "query"; name: string | null } | { view: "browse" };

export function parseHash(hash: string): Route {
  const cleaned = hash.replace(/^#\/?/, "");
  if (cleaned.startsWith("browse")) {
    return { view: "browse" };
  }
  if (cleaned.startsWith("query")) {
    const rest = cleaned.slice("query".length).replace(/^\//, "");
    return { view: "query", name: rest ? decodeURIComponent(rest) : null };
  }
  return { view: "query", name: null };
}

export function queryHash(name: string): string {
  return `#/query/${encodeURIComponent(name)}`;
}

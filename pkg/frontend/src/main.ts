import { ApiClient } from "./api.js";
import { BrowseView } from "./browseView.js";
import { QueryView } from "./queryView.js";
import { parseHash, queryHash } from "./router.js";

function boot(): void {
  const api = new ApiClient();
  const queryContainer = document.getElementById("query-view") as HTMLElement;
  const browseContainer = document.getElementById("browse-view") as HTMLElement;
  const queryView = new QueryView(queryContainer, api, (name) => {
    history.replaceState(null, "", queryHash(name));
  });
  const browseView = new BrowseView(browseContainer, api);
  let lastQueried: string | null = null;

  function apply(): void {
    const route = parseHash(location.hash);
    queryContainer.hidden = route.view !== "query";
    browseContainer.hidden = route.view !== "browse";
    for (const link of document.querySelectorAll<HTMLElement>(".nav-link")) {
      link.classList.toggle("active", link.dataset.view === route.view);
    }
    if (route.view === "browse") {
      void browseView.loadRoots();
    } else if (route.name && route.name !== lastQueried) {
      lastQueried = route.name;
      void queryView.search(route.name);
    }
  }

  window.addEventListener("hashchange", apply);
  apply();
}

document.addEventListener("DOMContentLoaded", boot);

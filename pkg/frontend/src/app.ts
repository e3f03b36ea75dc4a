/** Hash-routed shell: title bar with a page menu, one workflow per view. */

import { ApiClient } from "./api.js";
import { FormStore } from "./formStore.js";
import { PAGES, PageDeps } from "./pages.js";

function mount(): void {
  const api = new ApiClient("");
  const deps: PageDeps = { api, formStore: new FormStore(api) };

  const body = document.body;
  const header = document.createElement("header");
  const title = document.createElement("h1");
  title.textContent = "kgmill console";
  const nav = document.createElement("nav");
  for (const page of PAGES) {
    const link = document.createElement("a");
    link.href = `#${page.slug}`;
    link.textContent = page.title;
    nav.append(link);
  }
  header.append(title, nav);

  const main = document.createElement("main");
  body.append(header, main);

  function route(): void {
    const slug = window.location.hash.replace("#", "") || PAGES[0].slug;
    const page = PAGES.find((p) => p.slug === slug) ?? PAGES[0];
    main.replaceChildren();
    page.render(main, deps);
  }

  window.addEventListener("hashchange", route);
  route();
}

mount();

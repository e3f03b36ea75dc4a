/**
 * Workflow pages. Rendering is plain DOM: each page gets a container and the
 * shared dependencies and wires its own events. Heavy logic (validation,
 * serialization, polling, review) lives in the testable modules.
 */

import { ApiClient, ApiError } from "./api.js";
import { ConflictError, FormStore } from "./formStore.js";
import {
  emptyRelationship,
  emptySet,
  multiResponseDisabled,
  RelationshipSetModel,
  toRunConfig,
  validateSet,
} from "./models.js";
import { loadMatchReview, emptyStateMessage, selectPreferredMatch } from "./matchReview.js";
import { RunConsole, RunView } from "./runConsole.js";

export interface PageDeps {
  api: ApiClient;
  formStore: FormStore;
}

type PageRender = (root: HTMLElement, deps: PageDeps) => void;

export const PAGES: { slug: string; title: string; render: PageRender }[] = [
  { slug: "terminology", title: "Terminology Populator", render: terminologyPage },
  { slug: "code-sets", title: "Code Set Populator", render: codeSetPage },
  { slug: "relationships", title: "Relationship Populator", render: relationshipPage },
  { slug: "matches", title: "Relationship String to Code Matcher", render: matchPage },
  { slug: "custom-tables", title: "Custom Table Populator", render: customTablePage },
  { slug: "about", title: "About", render: aboutPage },
];

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  if (text !== undefined) node.textContent = text;
  return node;
}

function banner(root: HTMLElement, message: string, kind: "error" | "ok" | "info"): void {
  const existing = root.querySelector(".banner");
  if (existing) existing.remove();
  const node = el("div", { class: `banner banner-${kind}` }, message);
  if (kind === "error") {
    const retry = el("button", {}, "retry");
    retry.addEventListener("click", () => window.location.reload());
    node.append(" ", retry);
  }
  root.prepend(node);
}

async function guarded(root: HTMLElement, work: () => Promise<void>): Promise<void> {
  try {
    await work();
  } catch (error) {
    const message =
      error instanceof ApiError
        ? `service error (${error.status}): ${error.message}`
        : error instanceof Error
          ? error.message
          : String(error);
    banner(root, message, "error");
  }
}

async function watchJob(api: ApiClient, jobId: number, statusNode: HTMLElement): Promise<void> {
  for (;;) {
    const job = await api.getJob(jobId);
    statusNode.textContent =
      `job ${job.id}: ${job.status}` +
      (job.progress.total ? ` (${job.progress.done}/${job.progress.total})` : "");
    if (["completed", "failed", "killed_budget"].includes(job.status)) {
      if (job.error) statusNode.textContent += ` — ${job.error}`;
      return;
    }
    await new Promise((resolve) => setTimeout(resolve, 1000));
  }
}

// -- terminology populator ----------------------------------------------------

function terminologyPage(root: HTMLElement, { api }: PageDeps): void {
  root.append(el("h2", {}, "Terminology Populator"));
  const form = el("div", { class: "card" });
  const name = el("input", { placeholder: "terminology name" });
  const rows = el("textarea", {
    rows: "10",
    placeholder: "code_id<TAB>string<TAB>rank — one row per line",
  });
  const submit = el("button", {}, "Import");
  const status = el("p", { class: "status" });
  form.append(labelled("Name", name), labelled("Rows", rows), submit, status);
  root.append(form);

  const listing = el("ul");
  root.append(el("h3", {}, "Terminologies"), listing);
  void guarded(root, async () => {
    for (const t of await api.listTerminologies()) {
      listing.append(el("li", {}, `${t.name} (#${t.id})`));
    }
  });

  submit.addEventListener("click", () =>
    guarded(root, async () => {
      const { job } = await api.importTerminology(name.value, rows.value);
      await watchJob(api, job, status);
    }),
  );
}

// -- code set populator ----------------------------------------------------------

function codeSetPage(root: HTMLElement, { api }: PageDeps): void {
  root.append(el("h2", {}, "Code Set Populator"));
  const card = el("div", { class: "card" });
  const terminology = el("input", { placeholder: "terminology name or id" });
  const name = el("input", { placeholder: "code set name" });
  const filter = el("textarea", { rows: "4" });
  filter.value = '{"op": "all"}';
  const style = el("input", { placeholder: "expansion style (optional)" });
  const submit = el("button", {}, "Create code set");
  const status = el("p", { class: "status" });
  card.append(
    labelled("Terminology", terminology),
    labelled("Name", name),
    labelled("Membership filter (JSON)", filter),
    labelled("Expansion style", style),
    submit,
    status,
  );
  root.append(card);

  submit.addEventListener("click", () =>
    guarded(root, async () => {
      const parsed = JSON.parse(filter.value);
      const { job } = await api.createCodeSet(
        terminology.value,
        name.value,
        parsed,
        style.value.trim() || null,
      );
      await watchJob(api, job, status);
    }),
  );
}

// -- relationship populator --------------------------------------------------------

function relationshipPage(root: HTMLElement, deps: PageDeps): void {
  const { api, formStore } = deps;
  let model: RelationshipSetModel = emptySet();
  let baseVersion = 0;

  root.append(el("h2", {}, "Relationship Populator"));

  const header = el("div", { class: "card" });
  const setName = el("input", { placeholder: "relationship set name" });
  const loadButton = el("button", {}, "Load");
  const saveButton = el("button", {}, "Save");
  const codeSet = el("input", { placeholder: "code set name or id" });
  const limit = el("input", { placeholder: "dollar limit (optional)" });
  header.append(
    labelled("Relationship Set", setName),
    loadButton,
    saveButton,
    labelled("Code set", codeSet),
    labelled("Dollar limit", limit),
  );

  const toolbar = el("div", { class: "toolbar" });
  const addButton = el("button", {}, "Add Relationship");
  const collapseAll = el("button", {}, "Collapse All");
  const expandAll = el("button", {}, "Expand All");
  toolbar.append(addButton, collapseAll, expandAll);

  const cards = el("div", { class: "cards" });
  const launchButton = el("button", { class: "primary" }, "Generate Relationships");
  const consoleNode = el("div", { class: "run-console" });
  const issuesNode = el("ul", { class: "issues" });

  root.append(header, el("h3", {}, "Relationships"), toolbar, cards, issuesNode,
              launchButton, consoleNode);

  function syncFromInputs(): void {
    model.name = setName.value;
    model.codeSet = codeSet.value;
    model.budget.dollarLimit = limit.value.trim() || null;
  }

  function renderIssues(): boolean {
    syncFromInputs();
    issuesNode.replaceChildren();
    const issues = validateSet(model);
    for (const issue of issues) {
      issuesNode.append(el("li", {}, `${issue.field}: ${issue.message}`));
    }
    const blocked = issues.length > 0;
    (saveButton as HTMLButtonElement).disabled = blocked;
    (launchButton as HTMLButtonElement).disabled = blocked;
    return !blocked;
  }

  function renderCards(): void {
    cards.replaceChildren();
    model.relationships.forEach((relationship, index) => {
      const card = el("div", { class: "card relationship" });
      const title = el("h4", {}, `Relationship #${index + 1}: ${relationship.predicate || "(new)"}`);
      const toggle = el("button", {}, relationship.collapsed ? "Expand" : "Collapse");
      const remove = el("button", {}, "Remove");
      toggle.addEventListener("click", () => {
        relationship.collapsed = !relationship.collapsed;
        renderCards();
      });
      remove.addEventListener("click", () => {
        model.relationships.splice(index, 1);
        renderCards();
        renderIssues();
      });
      card.append(title, toggle, remove);
      if (!relationship.collapsed) {
        card.append(relationshipFields(relationship, () => {
          renderIssues();
          title.textContent = `Relationship #${index + 1}: ${relationship.predicate || "(new)"}`;
        }));
      }
      cards.append(card);
    });
  }

  addButton.addEventListener("click", () => {
    model.relationships.push(emptyRelationship());
    renderCards();
    renderIssues();
  });
  collapseAll.addEventListener("click", () => {
    model.relationships.forEach((r) => (r.collapsed = true));
    renderCards();
  });
  expandAll.addEventListener("click", () => {
    model.relationships.forEach((r) => (r.collapsed = false));
    renderCards();
  });
  setName.addEventListener("input", renderIssues);
  codeSet.addEventListener("input", renderIssues);
  limit.addEventListener("input", renderIssues);

  loadButton.addEventListener("click", () =>
    guarded(root, async () => {
      const loaded = await formStore.load(setName.value);
      if (!loaded) {
        banner(root, `no saved set named '${setName.value}'`, "info");
        return;
      }
      model = loaded.set;
      baseVersion = loaded.version;
      codeSet.value = model.codeSet;
      limit.value = model.budget.dollarLimit ?? "";
      renderCards();
      renderIssues();
      banner(root, `loaded version ${baseVersion}`, "ok");
    }),
  );

  saveButton.addEventListener("click", () =>
    guarded(root, async () => {
      if (!renderIssues()) return;
      try {
        baseVersion = await formStore.save(model, baseVersion);
        banner(root, `saved version ${baseVersion}`, "ok");
      } catch (error) {
        if (error instanceof ConflictError) {
          banner(root, error.message, "error");
          return;
        }
        throw error;
      }
    }),
  );

  launchButton.addEventListener("click", () =>
    guarded(root, async () => {
      if (!renderIssues()) return;
      const runConsole = new RunConsole(api);
      const jobId = await runConsole.launch(toRunConfig(model));
      consoleNode.replaceChildren(el("p", {}, `launched job ${jobId}`));
      const timer = setInterval(() => renderRunView(consoleNode, runConsole), 500);
      try {
        const final = await runConsole.watch(jobId, model.budget.dollarLimit);
        renderRunView(consoleNode, runConsole);
        banner(root, `run finished: ${final.status}`, final.killed ? "error" : "ok");
      } finally {
        clearInterval(timer);
      }
    }),
  );

  renderCards();
  renderIssues();
}

function relationshipFields(
  model: ReturnType<typeof emptyRelationship>,
  onChange: () => void,
): HTMLElement {
  const box = el("div", { class: "fields" });
  const predicate = el("input", {
    placeholder: "e.g. has differential diagnosis of",
  }) as HTMLInputElement;
  predicate.value = model.predicate;
  predicate.addEventListener("input", () => {
    model.predicate = predicate.value;
    onChange();
  });

  const template = el("textarea", { rows: "3" }) as HTMLTextAreaElement;
  template.value = model.template;
  template.addEventListener("input", () => {
    model.template = template.value;
    onChange();
  });

  const multi = el("input", { type: "checkbox" }) as HTMLInputElement;
  multi.checked = model.multiResponse;
  multi.addEventListener("change", () => {
    model.multiResponse = multi.checked;
    onChange();
  });

  const noWrite = el("input", { type: "checkbox" }) as HTMLInputElement;
  noWrite.checked = model.noWrite;
  noWrite.addEventListener("change", () => {
    model.noWrite = noWrite.checked;
    onChange();
  });

  const dictionary = el("textarea", {
    rows: "3",
    placeholder: "one 'key: value' per line (letters or short words as keys)",
  }) as HTMLTextAreaElement;
  dictionary.value = model.dictionary
    .map((entry) => `${entry.key}: ${entry.value}`)
    .join("\n");
  dictionary.addEventListener("input", () => {
    model.dictionary = dictionary.value
      .split("\n")
      .filter((line) => line.includes(":"))
      .map((line) => {
        const [key, ...rest] = line.split(":");
        return { key: key.trim(), value: rest.join(":").trim() };
      });
    // Mirrors the server invariant: a dictionary forces single-response.
    multi.disabled = multiResponseDisabled(model);
    if (multi.disabled && model.multiResponse) {
      model.multiResponse = false;
      multi.checked = false;
    }
    onChange();
  });
  multi.disabled = multiResponseDisabled(model);

  const mode = selectBox(["none", "vote", "average", "sum", "boolean_vote"],
                         model.areYouSure.mode);
  mode.addEventListener("change", () => {
    model.areYouSure.mode = mode.value;
    onChange();
  });
  const repeats = el("input", { type: "number", min: "1" }) as HTMLInputElement;
  repeats.value = model.areYouSure.repeats?.toString() ?? "";
  repeats.addEventListener("input", () => {
    model.areYouSure.repeats = repeats.value ? Number(repeats.value) : null;
    onChange();
  });

  const method = selectBox(["none", "inline", "requery", "db_lookup"],
                           model.beceptivity.method);
  method.addEventListener("change", () => {
    model.beceptivity.method = method.value;
    onChange();
  });
  const minRequired = numberInput(model.beceptivity.minRequired, (value) => {
    model.beceptivity.minRequired = value;
    onChange();
  });
  const scaleMax = numberInput(model.beceptivity.scaleMax, (value) => {
    model.beceptivity.scaleMax = value;
    onChange();
  });
  const depth = numberInput(model.beceptivity.maxRefinementDepth, (value) => {
    model.beceptivity.maxRefinementDepth = value;
    onChange();
  });

  const styles = el("input", {
    placeholder: "expansion styles, comma-separated",
  }) as HTMLInputElement;
  styles.value = model.expansionStyles.join(",");
  styles.addEventListener("input", () => {
    model.expansionStyles = styles.value
      .split(",")
      .map((s) => s.trim())
      .filter(Boolean);
    onChange();
  });

  box.append(
    labelled("Relationship Term or Phrase to Be Stored In Database", predicate),
    labelled(
      "Prompt to Use to Get the Desired Relationship Information for Each Term " +
        "in the Code Set from the LLM",
      template,
    ),
    labelled(
      "Multi-Response? (note: must be false if you have a response dictionary " +
        "defined below)",
      multi,
    ),
    labelled("Include a no-write reasoning element?", noWrite),
    labelled("Response dictionary", dictionary),
    labelled("Are-you-sure mode", mode),
    labelled("Are-you-sure repeats", repeats),
    labelled("Beceptivity method", method),
    labelled("Beceptivity minimum required", minRequired),
    labelled("Beceptivity scale maximum", scaleMax),
    labelled("Maximum refinement depth", depth),
    labelled("Object expansion styles", styles),
  );
  return box;
}

// -- match review -------------------------------------------------------------------

function matchPage(root: HTMLElement, { api }: PageDeps): void {
  root.append(el("h2", {}, "Relationship String to Code Matcher"));
  const card = el("div", { class: "card" });
  const runId = el("input", { type: "number", placeholder: "run id" });
  const batch = el("button", {}, "Match run objects");
  const batchStatus = el("p", { class: "status" });
  const query = el("input", { placeholder: "object string" });
  const show = el("button", {}, "Show matches");
  const table = el("table");
  card.append(
    labelled("Run", runId),
    batch,
    batchStatus,
    labelled("Object string", query),
    show,
    table,
  );
  root.append(card);

  batch.addEventListener("click", () =>
    guarded(root, async () => {
      const { job } = await api.launchMatchBatch(Number(runId.value));
      await watchJob(api, job, batchStatus);
    }),
  );

  show.addEventListener("click", () =>
    guarded(root, async () => {
      const state = await loadMatchReview(api, query.value);
      table.replaceChildren();
      const message = emptyStateMessage(state);
      if (message) {
        table.append(el("caption", {}, message));
        return;
      }
      const head = el("tr");
      for (const column of ["rank", "code", "main subject string", "distance", ""]) {
        head.append(el("th", {}, column));
      }
      table.append(head);
      for (const record of state.records) {
        for (const match of record.ranked) {
          const row = el("tr");
          row.append(
            el("td", {}, String(match.rank)),
            el("td", {}, match.code_id),
            el("td", {}, match.main_string),
            el("td", {}, match.distance.toFixed(6)),
          );
          const pick = el("button", {}, "prefer");
          pick.addEventListener("click", () =>
            guarded(root, async () => {
              await selectPreferredMatch(api, state.objectString, match);
              banner(root, `preferred match saved: ${match.code_id}`, "ok");
            }),
          );
          const cell = el("td");
          cell.append(pick);
          row.append(cell);
          table.append(row);
        }
      }
    }),
  );
}

// -- custom tables -----------------------------------------------------------------------

function customTablePage(root: HTMLElement, { api }: PageDeps): void {
  root.append(el("h2", {}, "Custom Table Populator"));
  const card = el("div", { class: "card" });
  const name = el("input", { placeholder: "table name" });
  const query = el("textarea", { rows: "4", placeholder: "SELECT ..." });
  const submit = el("button", {}, "Materialize");
  const status = el("p", { class: "status" });
  const preview = el("pre");
  card.append(labelled("Name", name), labelled("Query", query), submit, status, preview);
  root.append(card);

  submit.addEventListener("click", () =>
    guarded(root, async () => {
      const { job } = await api.materialize(name.value, query.value);
      await watchJob(api, job, status);
      const table = await api.getCustomTable(name.value);
      preview.textContent =
        `${table.name} v${table.version} — ${table.rows.length} rows\n` +
        table.columns.join(" | ") + "\n" +
        table.rows.slice(0, 20).map((row) => row.join(" | ")).join("\n");
    }),
  );
}

// -- about ------------------------------------------------------------------------------------

function aboutPage(root: HTMLElement, _deps: PageDeps): void {
  root.append(
    el("h2", {}, "About — PLEASE READ"),
    el(
      "p",
      {},
      "This console drives a knowledge-graph population engine. Generated " +
        "relationships come from a language model and will contain errors; " +
        "review everything before use and keep humans in the loop.",
    ),
    el(
      "p",
      {},
      "There is no authentication and no privacy layer: deploy behind your " +
        "own controls. Costs are tracked per run with a hard dollar limit.",
    ),
  );
}

// -- shared helpers -----------------------------------------------------------------------------

function labelled(text: string, control: HTMLElement): HTMLElement {
  const wrap = el("label", { class: "field" });
  wrap.append(el("span", {}, text), control);
  return wrap;
}

function selectBox(options: string[], value: string): HTMLSelectElement {
  const select = el("select") as HTMLSelectElement;
  for (const option of options) {
    select.append(el("option", { value: option }, option));
  }
  select.value = value;
  return select;
}

function numberInput(value: number, onInput: (value: number) => void): HTMLInputElement {
  const input = el("input", { type: "number", step: "any" }) as HTMLInputElement;
  input.value = String(value);
  input.addEventListener("input", () => onInput(Number(input.value)));
  return input;
}

export function renderRunView(node: HTMLElement, runConsole: RunConsole): void {
  const view: RunView | undefined = runConsole.snapshots[runConsole.snapshots.length - 1];
  if (!view) return;
  node.replaceChildren();
  const lines = [
    `job ${view.jobId}: ${view.status}`,
    view.total ? `progress ${view.done}/${view.total}` : "progress pending",
  ];
  if (view.costSoFar !== null) {
    lines.push(
      `cost ${view.costSoFar}` +
        (view.dollarLimit ? ` of limit ${view.dollarLimit}` : ""),
    );
  }
  for (const line of lines) node.append(el("p", {}, line));
  if (view.killed) node.append(el("p", { class: "killed" }, "KILLED: dollar limit exceeded"));
  if (view.error) node.append(el("p", { class: "error" }, view.error));
}

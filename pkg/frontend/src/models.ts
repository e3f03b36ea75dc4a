/**
 * Relationship form models: what the relationship populator edits, how it
 * validates, and how it round-trips to the server's run-config shape.
 *
 * Client-side validation mirrors the server invariants; in particular a
 * relationship cannot be multi-response once a response dictionary has
 * entries, so the form disables the flag rather than letting a save fail.
 */

export interface DictionaryEntry {
  key: string;
  value: string;
}

export interface RelationshipFormModel {
  predicate: string;
  template: string;
  multiResponse: boolean;
  noWrite: boolean;
  dictionary: DictionaryEntry[];
  areYouSure: { mode: string; repeats: number | null };
  beceptivity: {
    method: string;
    minRequired: number;
    scaleMax: number;
    maxRefinementDepth: number;
  };
  expansionStyles: string[];
  collapsed: boolean; // UI state only; not serialized
}

export interface RelationshipSetModel {
  name: string;
  codeSet: string;
  workerCount: number;
  budget: {
    pricePerPromptToken: string;
    pricePerCompletionToken: string;
    dollarLimit: string | null;
  };
  relationships: RelationshipFormModel[];
}

export function emptyRelationship(): RelationshipFormModel {
  return {
    predicate: "",
    template: "",
    multiResponse: false,
    noWrite: false,
    dictionary: [],
    areYouSure: { mode: "none", repeats: null },
    beceptivity: { method: "none", minRequired: 6, scaleMax: 10, maxRefinementDepth: 2 },
    expansionStyles: [],
    collapsed: false,
  };
}

export function emptySet(): RelationshipSetModel {
  return {
    name: "",
    codeSet: "",
    workerCount: 1,
    budget: { pricePerPromptToken: "0", pricePerCompletionToken: "0", dollarLimit: null },
    relationships: [emptyRelationship()],
  };
}

export interface ValidationIssue {
  field: string;
  message: string;
}

export function validateRelationship(model: RelationshipFormModel): ValidationIssue[] {
  const issues: ValidationIssue[] = [];
  if (!model.predicate.trim()) {
    issues.push({ field: "predicate", message: "relationship term is required" });
  }
  const placeholders = model.template.split("<<<concept>>>").length - 1;
  if (placeholders !== 1) {
    issues.push({
      field: "template",
      message: "prompt must contain exactly one <<<concept>>> placeholder",
    });
  }
  if (model.dictionary.length > 0 && model.multiResponse) {
    issues.push({
      field: "multiResponse",
      message: "multi-response must be false when a response dictionary is defined",
    });
  }
  const keys = model.dictionary.map((entry) => entry.key.trim());
  if (new Set(keys).size !== keys.length) {
    issues.push({ field: "dictionary", message: "dictionary keys must be unique" });
  }
  for (const key of keys) {
    if (!key || /\d/.test(key)) {
      issues.push({
        field: "dictionary",
        message: `key '${key}' must be a non-numeric letter or short word`,
      });
      break;
    }
  }
  if (model.areYouSure.mode !== "none" && (model.areYouSure.repeats ?? 3) < 1) {
    issues.push({ field: "areYouSure", message: "repeats must be at least 1" });
  }
  const b = model.beceptivity;
  if (b.method !== "none") {
    if (b.scaleMax <= 0) {
      issues.push({ field: "beceptivity", message: "scale maximum must be positive" });
    } else if (b.minRequired < 0 || b.minRequired > b.scaleMax) {
      issues.push({
        field: "beceptivity",
        message: "minimum required must lie within [0, scale maximum]",
      });
    }
  }
  return issues;
}

export function validateSet(model: RelationshipSetModel): ValidationIssue[] {
  const issues: ValidationIssue[] = [];
  if (!model.name.trim()) issues.push({ field: "name", message: "set name is required" });
  if (!model.codeSet.trim()) {
    issues.push({ field: "codeSet", message: "code set is required" });
  }
  if (model.relationships.length === 0) {
    issues.push({ field: "relationships", message: "add at least one relationship" });
  }
  model.relationships.forEach((relationship, index) => {
    for (const issue of validateRelationship(relationship)) {
      issues.push({ field: `relationships[${index}].${issue.field}`, message: issue.message });
    }
  });
  return issues;
}

/** Whether the multi-response control must be disabled (mirrors the server). */
export function multiResponseDisabled(model: RelationshipFormModel): boolean {
  return model.dictionary.length > 0;
}

// -- serialization ----------------------------------------------------------

/** Server run-config shape (what POST /runs consumes). */
export function toRunConfig(model: RelationshipSetModel): Record<string, unknown> {
  const budget: Record<string, unknown> = {
    price_per_prompt_token: model.budget.pricePerPromptToken,
    price_per_completion_token: model.budget.pricePerCompletionToken,
  };
  if (model.budget.dollarLimit !== null && model.budget.dollarLimit !== "") {
    budget.dollar_limit = model.budget.dollarLimit;
  }
  return {
    code_set: model.codeSet,
    worker_count: model.workerCount,
    budget,
    relationships: model.relationships.map((relationship) => {
      const element: Record<string, unknown> = {
        name: "answer",
        value_kind: "free_text",
        multi_response: relationship.multiResponse,
        no_write: false,
      };
      if (relationship.dictionary.length > 0) {
        element.dictionary = Object.fromEntries(
          relationship.dictionary.map((entry) => [entry.key, entry.value]),
        );
      }
      const elements: Record<string, unknown>[] = [];
      if (relationship.noWrite) {
        elements.push({ name: "reasoning", value_kind: "free_text", no_write: true });
      }
      elements.push(element);
      const out: Record<string, unknown> = {
        predicate: relationship.predicate,
        template: relationship.template,
        elements,
        are_you_sure: {
          mode: relationship.areYouSure.mode,
          repeats: relationship.areYouSure.repeats,
        },
        beceptivity: {
          method: relationship.beceptivity.method,
          min_required: relationship.beceptivity.minRequired,
          scale_max: relationship.beceptivity.scaleMax,
          max_refinement_depth: relationship.beceptivity.maxRefinementDepth,
        },
      };
      if (relationship.expansionStyles.length > 0) {
        out.expansion_styles = relationship.expansionStyles;
      }
      return out;
    }),
  };
}

// -- persistence round-trip ---------------------------------------------------

/**
 * Saved form documents are versioned JSON stored through the generic
 * annotations endpoint. The version token backs optimistic concurrency:
 * saving over a newer version than the one loaded must prompt a reload.
 */
export interface SavedSetDocument {
  version: number;
  set: RelationshipSetModel;
}

export function serializeSet(model: RelationshipSetModel, version: number): string {
  const cleaned: RelationshipSetModel = {
    ...model,
    relationships: model.relationships.map((relationship) => ({
      ...relationship,
      collapsed: false, // UI state never persists
    })),
  };
  return JSON.stringify({ version, set: cleaned });
}

export function deserializeSet(body: string): SavedSetDocument {
  const parsed = JSON.parse(body) as SavedSetDocument;
  if (typeof parsed.version !== "number" || !parsed.set) {
    throw new Error("malformed relationship set document");
  }
  const set = parsed.set;
  set.relationships = set.relationships.map((relationship) => ({
    ...emptyRelationship(),
    ...relationship,
    collapsed: false,
  }));
  return { version: parsed.version, set };
}

/**
 * Persistence for relationship-set configurations through the generic
 * annotations endpoint, with optimistic concurrency: every save bumps a
 * version token, and saving over a version you did not load raises
 * ConflictError so the page can prompt a reload.
 */

import { ApiClient } from "./api.js";
import {
  RelationshipSetModel,
  SavedSetDocument,
  deserializeSet,
  serializeSet,
} from "./models.js";

const SUBJECT_KIND = "relationship_set";

export class ConflictError extends Error {
  constructor(public currentVersion: number, public attemptedBase: number) {
    super(
      `relationship set changed on the server (version ${currentVersion}); ` +
        "reload before saving",
    );
  }
}

export class FormStore {
  constructor(private api: ApiClient) {}

  async load(name: string): Promise<SavedSetDocument | null> {
    const notes = await this.api.listAnnotations(SUBJECT_KIND, name);
    if (notes.length === 0) return null;
    return deserializeSet(notes[notes.length - 1].body);
  }

  /**
   * Saves the model as baseVersion+1. baseVersion must equal the latest
   * stored version (or 0 when creating).
   */
  async save(model: RelationshipSetModel, baseVersion: number): Promise<number> {
    const current = await this.load(model.name);
    const currentVersion = current?.version ?? 0;
    if (currentVersion !== baseVersion) {
      throw new ConflictError(currentVersion, baseVersion);
    }
    const nextVersion = baseVersion + 1;
    await this.api.addAnnotation(
      SUBJECT_KIND,
      model.name,
      serializeSet(model, nextVersion),
    );
    return nextVersion;
  }
}

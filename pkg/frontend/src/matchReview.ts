/**
 * Match review: ranked candidate codes for an object string, plus the
 * reviewer's preferred-match selection persisted as an annotation (review
 * metadata never mutates triples).
 */

import { ApiClient, MatchRecord, RankedMatch } from "./api.js";

export interface MatchReviewState {
  objectString: string;
  records: MatchRecord[];
  empty: boolean; // true when nothing matched under the threshold
}

export async function loadMatchReview(
  api: ApiClient,
  objectString: string,
): Promise<MatchReviewState> {
  const records = await api.getMatches(objectString);
  const empty = records.length === 0 || records.every((r) => r.ranked.length === 0);
  return { objectString, records, empty };
}

export function emptyStateMessage(state: MatchReviewState): string | null {
  if (!state.empty) return null;
  const z = state.records[0]?.z;
  return z === undefined
    ? "no stored matches for this string"
    : `no code within z=${z}`;
}

export async function selectPreferredMatch(
  api: ApiClient,
  objectString: string,
  match: RankedMatch,
): Promise<number> {
  const { id } = await api.addAnnotation(
    "match_review",
    objectString,
    JSON.stringify({ code_id: match.code_id, rank: match.rank, distance: match.distance }),
  );
  return id;
}

export async function loadPreferredMatch(
  api: ApiClient,
  objectString: string,
): Promise<{ code_id: string; rank: number; distance: number } | null> {
  const notes = await api.listAnnotations("match_review", objectString);
  if (notes.length === 0) return null;
  return JSON.parse(notes[notes.length - 1].body);
}

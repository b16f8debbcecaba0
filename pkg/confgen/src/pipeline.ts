/** End-to-end preparation: names -> structures -> conformer ensembles ->
 * filtered, labeled JSONL records. */

import type { Conformer, InputRow, LabelRow, PrepSpec } from './types.js';
import { Rng } from './geometry.js';
import { sampleConformers } from './conformers.js';
import { scoreConformers } from './energy.js';
import { selectConformers } from './filter.js';
import { EmitRecord, buildRecord } from './emit.js';
import { structureFromInput } from './structure.js';
import { validateSpec } from './types.js';

export function prepareRecord(
  row: InputRow,
  labels: LabelRow[],
  spec: PrepSpec,
  rng: Rng,
): EmitRecord {
  const structure = structureFromInput(row.nameOrSmiles);
  const raw = sampleConformers(structure, spec.nGenerate, rng);
  const scored: Conformer[] = scoreConformers(structure, raw);
  const kept = selectConformers(scored, spec.rmsdThreshold, spec.nKeep);
  if (kept.length === 0) {
    throw new Error(`record ${row.id}: no conformers survived filtering`);
  }
  return buildRecord(row.id, row.saccharideClass, structure, kept, labels);
}

export function prepareAll(
  rows: InputRow[],
  labels: LabelRow[],
  spec: PrepSpec,
): EmitRecord[] {
  validateSpec(spec);
  const ids = new Set(rows.map((r) => r.id));
  if (ids.size !== rows.length) throw new Error('duplicate record ids in input');
  for (const label of labels) {
    if (!ids.has(label.id)) {
      throw new Error(`assignment for unknown record id "${label.id}"`);
    }
  }
  const master = new Rng(spec.seed);
  return rows.map((row, i) =>
    prepareRecord(
      row,
      labels.filter((l) => l.id === row.id),
      spec,
      master.derive(i),
    ),
  );
}

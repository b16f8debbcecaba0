/** Emit prepared records in the JSONL schema the shift-prediction package
 * reads:
 *
 *   {"id": str, "class": "mono"|"di"|"tri"|"poly", "smiles": str|null,
 *    "atoms": [{"z": int, "h": int}], "bonds": [[i, j, order]],
 *    "conformers": [[[x, y, z], ...]], "labels":
 *    [{"atom": int, "nucleus": "C"|"H", "shift": float, "n_eq": int}]}
 *
 * Hydrogens are not atoms; each heavy atom carries its proton count, and H
 * assignments are stored pre-averaged with n_eq = that proton count.
 */

import type { Conformer, LabelRow, Structure } from './types.js';
import { resolveAtomRef } from './structure.js';

export interface EmitRecord {
  id: string;
  class: 'mono' | 'di' | 'tri' | 'poly';
  smiles: string | null;
  atoms: Array<{ z: number; h: number }>;
  bonds: Array<[number, number, string]>;
  conformers: number[][][];
  labels: Array<{ atom: number; nucleus: 'C' | 'H'; shift: number; n_eq: number }>;
}

export function buildRecord(
  id: string,
  saccharideClass: 'mono' | 'di' | 'tri' | 'poly',
  structure: Structure,
  conformers: Conformer[],
  labels: LabelRow[],
): EmitRecord {
  const emitted: EmitRecord['labels'] = [];
  for (const row of labels) {
    const atom = resolveAtomRef(structure, row.atomRef);
    if (row.nucleus === 'H' && structure.atoms[atom].h === 0) {
      throw new Error(
        `label ${row.id}/${row.atomRef}: H assignment on atom with no attached protons`,
      );
    }
    emitted.push({
      atom,
      nucleus: row.nucleus,
      shift: row.shiftPpm,
      n_eq: row.nucleus === 'H' ? structure.atoms[atom].h : 1,
    });
  }
  return {
    id,
    class: saccharideClass,
    smiles: structure.smiles,
    atoms: structure.atoms.map((a) => ({ z: a.z, h: a.h })),
    bonds: structure.bonds.map((b) => [b.i, b.j, b.order] as [number, number, string]),
    conformers: conformers.map((c) => c.coords.map((p) => [p[0], p[1], p[2]])),
    labels: emitted,
  };
}

export function toJsonl(records: EmitRecord[]): string {
  return records.map((r) => JSON.stringify(r)).join('\n') + '\n';
}

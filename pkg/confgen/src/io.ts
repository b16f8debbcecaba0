/** CSV readers for the two pipeline inputs.
 *
 * Input list:   id,name_or_smiles,class
 * Assignments:  id,atom_ref,nucleus,shift_ppm     (atom_ref = "unit:name")
 *
 * Plain comma-separated values, header row required, no quoting (none of
 * the fields may contain commas).
 */

import type { InputRow, LabelRow } from './types.js';

function parseCsv(text: string, expectedHeader: string[]): string[][] {
  const lines = text
    .split(/\r?\n/)
    .map((l) => l.trim())
    .filter((l) => l.length > 0);
  if (lines.length === 0) throw new Error('empty CSV');
  const header = lines[0].split(',').map((h) => h.trim());
  if (header.join(',') !== expectedHeader.join(',')) {
    throw new Error(
      `bad CSV header: expected "${expectedHeader.join(',')}", got "${header.join(',')}"`,
    );
  }
  return lines.slice(1).map((line, n) => {
    const cells = line.split(',').map((c) => c.trim());
    if (cells.length !== expectedHeader.length) {
      throw new Error(`row ${n + 2}: expected ${expectedHeader.length} cells, got ${cells.length}`);
    }
    return cells;
  });
}

const CLASSES = new Set(['mono', 'di', 'tri', 'poly']);

export function parseInputCsv(text: string): InputRow[] {
  return parseCsv(text, ['id', 'name_or_smiles', 'class']).map((cells, n) => {
    const [id, nameOrSmiles, cls] = cells;
    if (!CLASSES.has(cls)) {
      throw new Error(`row ${n + 2}: unknown class "${cls}"`);
    }
    return { id, nameOrSmiles, saccharideClass: cls as InputRow['saccharideClass'] };
  });
}

export function parseLabelCsv(text: string): LabelRow[] {
  return parseCsv(text, ['id', 'atom_ref', 'nucleus', 'shift_ppm']).map((cells, n) => {
    const [id, atomRef, nucleus, shiftStr] = cells;
    if (nucleus !== 'C' && nucleus !== 'H') {
      throw new Error(`row ${n + 2}: nucleus must be C or H, got "${nucleus}"`);
    }
    const shiftPpm = Number(shiftStr);
    if (!Number.isFinite(shiftPpm)) {
      throw new Error(`row ${n + 2}: bad shift "${shiftStr}"`);
    }
    return { id, atomRef, nucleus, shiftPpm };
  });
}

/** A condensed glycan-name grammar covering the common D-pyranoses.
 *
 *   name     := unit (link unit)*
 *   unit     := anomer sugar          e.g. "aGlc", "bGal"
 *   link     := "(1-n)"               n in {2, 3, 4, 6}
 *   anomer   := "a" | "b"
 *
 * Examples: "bGlc", "bGal(1-4)aGlc", "aMan(1-3)bMan(1-4)bGlc".
 * Units are listed non-reducing end first, as is conventional; the last
 * unit is the reducing end. Inputs that do not match the grammar are
 * treated as SMILES passthrough if they look like SMILES.
 */

export interface SugarDef {
  /** hydroxyl orientation per ring position: true = axial (4C1 chair) */
  axial: { o2: boolean; o3: boolean; o4: boolean };
  smiles: { a: string; b: string };
}

/** Stereochemistry of the common D-pyranoses in the 4C1 chair. The two
 * anomeric SMILES differ only in the stereo tag of the anomeric carbon. */
export const SUGARS: Record<string, SugarDef> = {
  Glc: {
    axial: { o2: false, o3: false, o4: false },
    smiles: {
      a: 'OC[C@H]1O[C@H](O)[C@H](O)[C@@H](O)[C@@H]1O',
      b: 'OC[C@H]1O[C@@H](O)[C@H](O)[C@@H](O)[C@@H]1O',
    },
  },
  Gal: {
    axial: { o2: false, o3: false, o4: true },
    smiles: {
      a: 'OC[C@H]1O[C@H](O)[C@H](O)[C@@H](O)[C@H]1O',
      b: 'OC[C@H]1O[C@@H](O)[C@H](O)[C@@H](O)[C@H]1O',
    },
  },
  Man: {
    axial: { o2: true, o3: false, o4: false },
    smiles: {
      a: 'OC[C@H]1O[C@H](O)[C@@H](O)[C@@H](O)[C@@H]1O',
      b: 'OC[C@H]1O[C@@H](O)[C@@H](O)[C@@H](O)[C@@H]1O',
    },
  },
};

export interface GlycanUnit {
  sugar: string;
  anomer: 'a' | 'b';
}

export interface GlycanLink {
  /** unit index of the donor (its C1 provides the bond) */
  from: number;
  /** unit index of the acceptor */
  to: number;
  /** acceptor ring position, e.g. 4 for a (1-4) bond */
  position: 2 | 3 | 4 | 6;
}

export interface ParsedGlycan {
  units: GlycanUnit[];
  links: GlycanLink[];
}

const UNIT_RE = /^([ab])(Glc|Gal|Man)/;
const LINK_RE = /^\(1-([2346])\)/;

export class NameError extends Error {}

export function parseGlycanName(name: string): ParsedGlycan {
  let rest = name.trim();
  const units: GlycanUnit[] = [];
  const links: GlycanLink[] = [];
  for (;;) {
    const um = UNIT_RE.exec(rest);
    if (!um) {
      throw new NameError(`cannot parse glycan name at "${rest}" (in "${name}")`);
    }
    units.push({ sugar: um[2], anomer: um[1] as 'a' | 'b' });
    rest = rest.slice(um[0].length);
    if (rest.length === 0) break;
    const lm = LINK_RE.exec(rest);
    if (!lm) {
      throw new NameError(`expected "(1-n)" link at "${rest}" (in "${name}")`);
    }
    links.push({
      from: units.length - 1,
      to: units.length,
      position: Number(lm[1]) as 2 | 3 | 4 | 6,
    });
    rest = rest.slice(lm[0].length);
  }
  return { units, links };
}

/** Heuristic: condensed names never contain these SMILES-only characters. */
export function looksLikeSmiles(input: string): boolean {
  return /[\[\]@=#\\/]|^[A-Z][a-z]?\d/.test(input) && !UNIT_RE.test(input);
}

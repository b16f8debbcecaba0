/** Shared domain types for the dataset-preparation pipeline. */

export type Vec3 = [number, number, number];

export interface AtomSpec {
  /** atomic number */
  z: number;
  /** attached proton count */
  h: number;
  /** canonical name, e.g. "C1", "O5", for matching literature assignments */
  name: string;
  /** saccharide unit index this atom belongs to (0 = first-listed unit) */
  unit: number;
}

export interface BondSpec {
  i: number;
  j: number;
  order: 'single' | 'double';
}

/** A heavy-atom structure with one template geometry. */
export interface Structure {
  atoms: AtomSpec[];
  bonds: BondSpec[];
  /** template (chair) coordinates, Angstrom */
  template: Vec3[];
  smiles: string;
  /** indices of rotatable exocyclic bonds: [pivot atom, moving atom] */
  rotatable: Array<[number, number]>;
}

export interface Conformer {
  coords: Vec3[];
  energy: number;
}

export interface PrepSpec {
  nGenerate: number;
  nKeep: number;
  rmsdThreshold: number;
  seed: number;
}

export interface InputRow {
  id: string;
  nameOrSmiles: string;
  saccharideClass: 'mono' | 'di' | 'tri' | 'poly';
}

export interface LabelRow {
  id: string;
  /** canonical atom reference "unit:name", e.g. "0:C1" */
  atomRef: string;
  nucleus: 'C' | 'H';
  shiftPpm: number;
}

export function validateSpec(spec: PrepSpec): void {
  if (spec.nKeep > spec.nGenerate) {
    throw new Error(`nKeep (${spec.nKeep}) must not exceed nGenerate (${spec.nGenerate})`);
  }
  if (spec.rmsdThreshold <= 0) {
    throw new Error(`rmsdThreshold must be positive, got ${spec.rmsdThreshold}`);
  }
}

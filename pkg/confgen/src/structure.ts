/** Build heavy-atom 3D structures for pyranose units in the 4C1 chair.
 *
 * Atom naming follows carbohydrate convention: ring atoms C1..C5 plus the
 * ring oxygen O5, the exocyclic C6, hydroxyl oxygens O1..O4 and O6. Atoms
 * are emitted unit by unit (unit 0 = reducing end), within a unit in the
 * canonical order C1 C2 C3 C4 C5 C6 O5 O1 O2 O3 O4 O6 (bridging or absent
 * oxygens are skipped), so label references "unit:name" resolve stably.
 */

import type { AtomSpec, BondSpec, Structure, Vec3 } from './types.js';
import { add, normalize, scale, sub } from './geometry.js';
import { NameError, ParsedGlycan, SUGARS, parseGlycanName } from './nomenclature.js';

const RING_RADIUS = 1.45; // Angstrom, hexagon circumradius giving ~1.45 A edges
const CHAIR_PUCKER = 0.25; // alternating z displacement of ring atoms
const CO_BOND = 1.43;
const CC_BOND = 1.53;

interface UnitAtoms {
  /** name -> global atom index */
  index: Map<string, number>;
}

/** Ring positions around the chair: C1 C2 C3 C4 C5 O5, alternating pucker. */
function ringTemplate(): Vec3[] {
  const coords: Vec3[] = [];
  for (let k = 0; k < 6; k++) {
    const phi = (Math.PI / 3) * k;
    const z = (k % 2 === 0 ? 1 : -1) * CHAIR_PUCKER;
    coords.push([RING_RADIUS * Math.cos(phi), RING_RADIUS * Math.sin(phi), z]);
  }
  return coords;
}

/** Axial direction at ring atom k: straight along +-z, alternating with the
 * pucker. Equatorial: mostly outward in the ring plane, tilted the other way. */
function axialDir(k: number): Vec3 {
  return [0, 0, k % 2 === 0 ? 1 : -1];
}

function equatorialDir(ringCoords: Vec3[], k: number): Vec3 {
  const p = ringCoords[k];
  const outward = normalize([p[0], p[1], 0]);
  const zTilt = k % 2 === 0 ? -0.45 : 0.45;
  return normalize([outward[0], outward[1], zTilt]);
}

export interface BuiltUnit {
  atoms: UnitAtoms;
}

/** Build the full heavy-atom structure for a parsed glycan. */
export function buildStructure(parsed: ParsedGlycan): Structure {
  const atoms: AtomSpec[] = [];
  const bonds: BondSpec[] = [];
  const template: Vec3[] = [];
  const rotatable: Array<[number, number]> = [];
  const units: BuiltUnit[] = [];

  // Which acceptor oxygens are replaced by glycosidic bridges, and which
  // units donate their C1 (losing the anomeric hydroxyl).
  const bridged = new Map<number, Set<number>>(); // unit -> positions
  const donates = new Set<number>();
  for (const link of parsed.links) {
    if (!bridged.has(link.to)) bridged.set(link.to, new Set());
    bridged.get(link.to)!.add(link.position);
    donates.add(link.from);
  }

  for (let u = 0; u < parsed.units.length; u++) {
    const def = SUGARS[parsed.units[u].sugar];
    if (!def) throw new NameError(`unknown sugar "${parsed.units[u].sugar}"`);
    const anomer = parsed.units[u].anomer;
    const ring = ringTemplate();
    // Lay successive units out along x so torsion sampling starts untangled.
    const offset: Vec3 = [u * 5.2, (u % 2) * 1.2, 0];

    const index = new Map<string, number>();
    const place = (name: string, h: number, z: number, pos: Vec3): number => {
      const idx = atoms.length;
      atoms.push({ z, h, name, unit: u });
      template.push(add(pos, offset));
      index.set(name, idx);
      return idx;
    };

    // ring: C1..C5 at ring slots 0..4, O5 at slot 5
    const cNames = ['C1', 'C2', 'C3', 'C4', 'C5'];
    const ringH = [1, 1, 1, 1, 1];
    const cIdx: number[] = [];
    for (let k = 0; k < 5; k++) cIdx.push(place(cNames[k], ringH[k], 6, ring[k]));
    const o5 = place('O5', 0, 8, ring[5]);
    for (let k = 0; k < 4; k++) bonds.push({ i: cIdx[k], j: cIdx[k + 1], order: 'single' });
    bonds.push({ i: cIdx[4], j: o5, order: 'single' });
    bonds.push({ i: o5, j: cIdx[0], order: 'single' });

    // exocyclic C6 on C5 (axial-ish up position for D-sugars)
    const c6pos = add(ring[4], scale(normalize(add(axialDir(4), equatorialDir(ring, 4))), CC_BOND));
    const c6 = place('C6', 2, 6, c6pos);
    bonds.push({ i: cIdx[4], j: c6, order: 'single' });
    rotatable.push([cIdx[4], c6]);

    // hydroxyls; O1 orientation is set by the anomer, O2..O4 by the sugar
    const isBridged = (pos: number) => bridged.get(u)?.has(pos) ?? false;
    const hydroxyls: Array<[string, number, number, boolean]> = [
      ['O1', 1, 0, anomer === 'a'],
      ['O2', 2, 1, def.axial.o2],
      ['O3', 3, 2, def.axial.o3],
      ['O4', 4, 3, def.axial.o4],
    ];
    for (const [name, pos, ringSlot, isAxial] of hydroxyls) {
      if (isBridged(pos)) continue; // this oxygen comes from the donor bridge
      if (name === 'O1' && donates.has(u)) continue; // donor C1 carries the bridge
      const dir = isAxial ? axialDir(ringSlot) : equatorialDir(ring, ringSlot);
      const o = place(name, 1, 8, add(ring[ringSlot], scale(normalize(dir), CO_BOND)));
      bonds.push({ i: cIdx[ringSlot], j: o, order: 'single' });
    }
    // O6 on C6, unless a (1-6) bridge replaces it
    if (!isBridged(6)) {
      const o6 = place('O6', 1, 8, add(c6pos, scale(normalize(sub(c6pos, ring[4])), CO_BOND)));
      bonds.push({ i: c6, j: o6, order: 'single' });
      rotatable.push([c6, o6]);
    }

    units.push({ atoms: { index } });
  }

  // Glycosidic bridges: donor C1 - O(bridge) - acceptor C(position).
  for (const link of parsed.links) {
    const donor = units[link.from].atoms.index;
    const acceptor = units[link.to].atoms.index;
    const c1 = donor.get('C1')!;
    const accName = link.position === 6 ? 'C6' : `C${link.position}`;
    const acc = acceptor.get(accName)!;
    const midpoint = scale(add(template[c1], template[acc]), 0.5);
    const idx = atoms.length;
    atoms.push({ z: 8, h: 0, name: `O${link.position}`, unit: link.to });
    template.push(midpoint);
    bonds.push({ i: c1, j: idx, order: 'single' });
    bonds.push({ i: idx, j: acc, order: 'single' });
    rotatable.push([c1, idx]); // phi-like torsion
    rotatable.push([idx, acc]); // psi-like torsion
    units[link.to].atoms.index.set(`O${link.position}`, idx);
  }

  const name = parsed.units
    .map((un, i) => {
      const link = parsed.links.find((l) => l.from === i);
      const unit = un.anomer + un.sugar;
      return link ? `${unit}(1-${link.position})` : unit;
    })
    .join('');
  const smiles =
    parsed.units.length === 1
      ? SUGARS[parsed.units[0].sugar].smiles[parsed.units[0].anomer]
      : name; // condensed name stands in for a full oligosaccharide SMILES

  return { atoms, bonds, template, smiles, rotatable };
}

export function structureFromInput(nameOrSmiles: string): Structure {
  return buildStructure(parseGlycanName(nameOrSmiles));
}

/** Resolve a "unit:name" label reference to a global atom index. */
export function resolveAtomRef(structure: Structure, ref: string): number {
  const m = /^(\d+):([A-Za-z]\d+)$/.exec(ref);
  if (!m) throw new Error(`bad atom reference "${ref}" (expected "unit:name")`);
  const unit = Number(m[1]);
  const name = m[2];
  for (let i = 0; i < structure.atoms.length; i++) {
    const a = structure.atoms[i];
    if (a.unit === unit && a.name === name) return i;
  }
  throw new Error(`atom reference "${ref}" not found in structure`);
}

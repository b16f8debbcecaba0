/** Two-stage conformer selection.
 *
 * Stage 1 (diversity): greedy scan in input order; keep a conformer only if
 * its best-fit RMSD to every already-kept conformer is at least the
 * threshold. Stage 2 (energy): of the survivors, keep the nKeep lowest
 * energies. Both stages are deterministic.
 */

import type { Conformer } from './types.js';
import { rmsd } from './rmsd.js';

export function diversityFilter(conformers: Conformer[], threshold: number): Conformer[] {
  const kept: Conformer[] = [];
  for (const c of conformers) {
    if (kept.every((k) => rmsd(k.coords, c.coords) >= threshold)) {
      kept.push(c);
    }
  }
  return kept;
}

export function energyFilter(conformers: Conformer[], nKeep: number): Conformer[] {
  return conformers
    .map((c, i) => ({ c, i }))
    .sort((a, b) => a.c.energy - b.c.energy || a.i - b.i)
    .slice(0, nKeep)
    .map((x) => x.c);
}

export function selectConformers(
  conformers: Conformer[],
  threshold: number,
  nKeep: number,
): Conformer[] {
  return energyFilter(diversityFilter(conformers, threshold), nKeep);
}

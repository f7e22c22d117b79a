// Deterministic layered DAG layout: topological layers left to right,
// nodes within a layer ordered by id. Same plan, same picture.

export interface LayoutEdge {
  from: string;
  to: string;
}

export interface Position {
  layer: number;
  lane: number;
}

export function layeredLayout(nodeIds: string[], edges: LayoutEdge[]): Map<string, Position> {
  const known = new Set(nodeIds);
  const parents = new Map<string, string[]>();
  for (const id of nodeIds) parents.set(id, []);
  for (const edge of edges) {
    if (known.has(edge.from) && known.has(edge.to)) {
      parents.get(edge.to)!.push(edge.from);
    }
  }

  // layer = longest parent chain; resolves in dependency order
  const layer = new Map<string, number>();
  const resolve = (id: string, trail: Set<string>): number => {
    const cached = layer.get(id);
    if (cached !== undefined) return cached;
    if (trail.has(id)) return 0; // defensive: cycles flatten to layer 0
    trail.add(id);
    const ps = parents.get(id)!;
    const value = ps.length === 0 ? 0 : Math.max(...ps.map((p) => resolve(p, trail))) + 1;
    trail.delete(id);
    layer.set(id, value);
    return value;
  };
  for (const id of nodeIds) resolve(id, new Set());

  const byLayer = new Map<number, string[]>();
  for (const id of [...nodeIds].sort()) {
    const l = layer.get(id)!;
    if (!byLayer.has(l)) byLayer.set(l, []);
    byLayer.get(l)!.push(id);
  }

  const positions = new Map<string, Position>();
  for (const [l, ids] of byLayer) {
    ids.forEach((id, lane) => positions.set(id, { layer: l, lane }));
  }
  return positions;
}

// Deterministic force-directed layout, small and dependency-free. A fixed
// iteration budget keeps it reproducible for tests and stable on refresh.

import type { GraphView } from "./model.js";

export interface Point {
  x: number;
  y: number;
}

export function layoutGraph(
  view: GraphView,
  width: number,
  height: number,
  iterations = 120,
): Map<string, Point> {
  const positions = new Map<string, Point>();
  const n = view.nodes.length;
  if (n === 0) return positions;

  // seed on a circle in node order (deterministic)
  const cx = width / 2;
  const cy = height / 2;
  const radius = Math.min(width, height) * 0.35;
  view.nodes.forEach((node, i) => {
    const angle = (2 * Math.PI * i) / n;
    positions.set(node.bnId, {
      x: cx + radius * Math.cos(angle),
      y: cy + radius * Math.sin(angle),
    });
  });
  if (n === 1) {
    positions.set(view.nodes[0].bnId, { x: cx, y: cy });
    return positions;
  }

  const ideal = Math.min(width, height) / Math.max(2, Math.sqrt(n) + 1);
  const nodes = view.nodes.map((node) => node.bnId);
  const edges = view.edges
    .filter((e) => positions.has(e.source) && positions.has(e.target))
    .map((e) => [e.source, e.target] as const);

  for (let step = 0; step < iterations; step++) {
    const temperature = (1 - step / iterations) * ideal * 0.5;
    const force = new Map<string, Point>(nodes.map((id) => [id, { x: 0, y: 0 }]));

    for (let i = 0; i < nodes.length; i++) {
      for (let j = i + 1; j < nodes.length; j++) {
        const a = positions.get(nodes[i])!;
        const b = positions.get(nodes[j])!;
        let dx = a.x - b.x;
        let dy = a.y - b.y;
        const dist = Math.max(0.01, Math.hypot(dx, dy));
        const push = (ideal * ideal) / dist / dist;
        dx *= push;
        dy *= push;
        const fa = force.get(nodes[i])!;
        const fb = force.get(nodes[j])!;
        fa.x += dx;
        fa.y += dy;
        fb.x -= dx;
        fb.y -= dy;
      }
    }
    for (const [source, target] of edges) {
      const a = positions.get(source)!;
      const b = positions.get(target)!;
      const dx = b.x - a.x;
      const dy = b.y - a.y;
      const dist = Math.max(0.01, Math.hypot(dx, dy));
      const pull = (dist - ideal) / dist / 4;
      const fa = force.get(source)!;
      const fb = force.get(target)!;
      fa.x += dx * pull;
      fa.y += dy * pull;
      fb.x -= dx * pull;
      fb.y -= dy * pull;
    }

    for (const id of nodes) {
      const p = positions.get(id)!;
      const f = force.get(id)!;
      const magnitude = Math.max(0.01, Math.hypot(f.x, f.y));
      const cap = Math.min(magnitude, temperature);
      const x = p.x + (f.x / magnitude) * cap;
      const y = p.y + (f.y / magnitude) * cap;
      positions.set(id, {
        x: Math.min(width - 40, Math.max(40, x)),
        y: Math.min(height - 40, Math.max(40, y)),
      });
    }
  }
  return positions;
}

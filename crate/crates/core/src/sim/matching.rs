//! Per-tick passenger/vehicle assignment as a min-cost maximum flow:
//! source -> passenger -> vehicle zone -> sink, zone capacities equal to the
//! idle vehicles there. Cardinality is maximized first, then total pickup
//! time is minimized, then longer-waiting passengers are preferred.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::network::ZoneNetwork;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MatchRequest {
    pub passenger: u32,
    pub zone: usize,
    pub wait_s: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    pub passenger: u32,
    pub vehicle: u32,
    pub vehicle_zone: usize,
    pub pickup_s: f64,
}

/// A pair is admissible when the pickup takes at most `max_pickup` seconds
/// and the passenger's total wait would stay within `max_wait`. Within a
/// zone the lowest vehicle ids go to the longest-waiting passengers.
pub fn match_tick(
    waiting: &[MatchRequest],
    idle: &[(u32, usize)],
    net: &ZoneNetwork,
    max_pickup: f64,
    max_wait: f64,
) -> Vec<Assignment> {
    let tt = net.tt();
    let mut by_zone: BTreeMap<usize, Vec<u32>> = BTreeMap::new();
    for &(id, zone) in idle {
        by_zone.entry(zone).or_default().push(id);
    }
    for ids in by_zone.values_mut() {
        ids.sort_unstable();
    }
    let zones: Vec<usize> = by_zone.keys().copied().collect();

    // Rank 0 is the longest-waiting passenger; ties go to the lower id.
    let mut order: Vec<usize> = (0..waiting.len()).collect();
    order.sort_by(|&a, &b| {
        waiting[b].wait_s.total_cmp(&waiting[a].wait_s).then(waiting[a].passenger.cmp(&waiting[b].passenger))
    });
    let mut rank = vec![0usize; waiting.len()];
    for (r, &p) in order.iter().enumerate() {
        rank[p] = r;
    }

    let p_count = waiting.len();
    let weight = (p_count as i128) * (p_count as i128) + 1;
    let src = 0;
    let sink = p_count + zones.len() + 1;
    let mut g = FlowGraph::new(sink + 1);
    let mut pair_edges = Vec::new();
    for (p, req) in waiting.iter().enumerate() {
        let mut any = false;
        for (zi, &z) in zones.iter().enumerate() {
            let pickup = tt[[z, req.zone]];
            if pickup <= max_pickup && req.wait_s + pickup <= max_wait {
                let cost = (pickup * 1000.0).round() as i128 * weight + rank[p] as i128;
                let e = g.add_edge(1 + p, 1 + p_count + zi, 1, cost);
                pair_edges.push((e, p, zi));
                any = true;
            }
        }
        if any {
            g.add_edge(src, 1 + p, 1, 0);
        }
    }
    for (zi, z) in zones.iter().enumerate() {
        g.add_edge(1 + p_count + zi, sink, by_zone[z].len() as i64, 0);
    }
    g.min_cost_max_flow(src, sink);

    let mut per_zone: Vec<Vec<usize>> = vec![Vec::new(); zones.len()];
    for (e, p, zi) in pair_edges {
        if g.flow(e) > 0 {
            per_zone[zi].push(p);
        }
    }
    let mut out = Vec::new();
    for (zi, mut ps) in per_zone.into_iter().enumerate() {
        ps.sort_by_key(|&p| rank[p]);
        let z = zones[zi];
        for (p, &vehicle) in ps.into_iter().zip(&by_zone[&z]) {
            out.push(Assignment {
                passenger: waiting[p].passenger,
                vehicle,
                vehicle_zone: z,
                pickup_s: tt[[z, waiting[p].zone]],
            });
        }
    }
    out.sort_by_key(|a| a.passenger);
    out
}

struct Edge {
    to: usize,
    cap: i64,
    cost: i128,
}

struct FlowGraph {
    edges: Vec<Edge>,
    adj: Vec<Vec<usize>>,
}

impl FlowGraph {
    fn new(nodes: usize) -> Self {
        FlowGraph { edges: Vec::new(), adj: vec![Vec::new(); nodes] }
    }

    fn add_edge(&mut self, from: usize, to: usize, cap: i64, cost: i128) -> usize {
        let id = self.edges.len();
        self.edges.push(Edge { to, cap, cost });
        self.adj[from].push(id);
        self.edges.push(Edge { to: from, cap: 0, cost: -cost });
        self.adj[to].push(id + 1);
        id
    }

    fn flow(&self, edge: usize) -> i64 {
        self.edges[edge + 1].cap
    }

    /// Successive shortest paths with Dijkstra on reduced costs; all initial
    /// costs are nonnegative, so zero potentials are valid to start.
    fn min_cost_max_flow(&mut self, src: usize, sink: usize) {
        let n = self.adj.len();
        let mut potential = vec![0i128; n];
        loop {
            let mut dist = vec![i128::MAX; n];
            let mut via = vec![usize::MAX; n];
            dist[src] = 0;
            let mut heap = BinaryHeap::new();
            heap.push(Reverse((0i128, src)));
            while let Some(Reverse((d, u))) = heap.pop() {
                if d > dist[u] {
                    continue;
                }
                for &e in &self.adj[u] {
                    let edge = &self.edges[e];
                    if edge.cap <= 0 {
                        continue;
                    }
                    let nd = d + edge.cost + potential[u] - potential[edge.to];
                    if nd < dist[edge.to] {
                        dist[edge.to] = nd;
                        via[edge.to] = e;
                        heap.push(Reverse((nd, edge.to)));
                    }
                }
            }
            if dist[sink] == i128::MAX {
                return;
            }
            for v in 0..n {
                if dist[v] != i128::MAX {
                    potential[v] += dist[v];
                }
            }
            let mut push = i64::MAX;
            let mut v = sink;
            while v != src {
                let e = via[v];
                push = push.min(self.edges[e].cap);
                v = self.edges[e ^ 1].to;
            }
            let mut v = sink;
            while v != src {
                let e = via[v];
                self.edges[e].cap -= push;
                self.edges[e ^ 1].cap += push;
                v = self.edges[e ^ 1].to;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(ts: &[f64]) -> ZoneNetwork {
        // Zones on a line at `ts` seconds from zone 0, speed 1 m/s.
        let ids: Vec<u32> = (0..ts.len() as u32).collect();
        let c: Vec<[f64; 2]> = ts.iter().map(|&t| [t, 0.0]).collect();
        ZoneNetwork::from_centroids(ids, c, 1.0, None, 1).unwrap()
    }

    fn req(passenger: u32, zone: usize, wait_s: f64) -> MatchRequest {
        MatchRequest { passenger, zone, wait_s }
    }

    #[test]
    fn single_feasible_pair() {
        let net = line(&[0.0, 20.0]);
        let a = match_tick(&[req(7, 1, 0.0)], &[(3, 0)], &net, 30.0, 300.0);
        assert_eq!(a, vec![Assignment { passenger: 7, vehicle: 3, vehicle_zone: 0, pickup_s: 20.0 }]);
    }

    #[test]
    fn longer_wait_wins_a_tie() {
        let net = line(&[0.0]);
        let a = match_tick(&[req(1, 0, 30.0), req(2, 0, 90.0)], &[(5, 0)], &net, 30.0, 300.0);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].passenger, 2);
    }

    #[test]
    fn no_feasible_pair() {
        let net = line(&[0.0, 100.0]);
        assert!(match_tick(&[req(1, 1, 0.0)], &[(1, 0)], &net, 30.0, 300.0).is_empty());
        // Feasible distance but the wait budget is spent.
        let net = line(&[0.0, 20.0]);
        assert!(match_tick(&[req(1, 1, 290.0)], &[(1, 0)], &net, 30.0, 300.0).is_empty());
    }

    #[test]
    fn cardinality_before_pickup_time() {
        // Passenger 1 can use either zone, passenger 2 only zone 0; the
        // cheaper pick for 1 (zone 0) would strand 2.
        let net = line(&[0.0, 10.0, 35.0]);
        let a = match_tick(&[req(1, 1, 0.0), req(2, 0, 0.0)], &[(10, 0), (11, 2)], &net, 30.0, 300.0);
        assert_eq!(a.len(), 2);
        assert_eq!((a[0].passenger, a[0].vehicle), (1, 11));
        assert_eq!((a[1].passenger, a[1].vehicle), (2, 10));
    }

    #[test]
    fn lowest_ids_to_longest_waits() {
        let net = line(&[0.0]);
        let a = match_tick(&[req(1, 0, 0.0), req(2, 0, 60.0)], &[(9, 0), (4, 0), (6, 0)], &net, 30.0, 300.0);
        assert_eq!(a.iter().map(|a| (a.passenger, a.vehicle)).collect::<Vec<_>>(), vec![(1, 6), (2, 4)]);
    }
}

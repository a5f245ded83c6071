//! Alpha-expansion with label costs.
//!
//! For a fixed label α every event either keeps its label (source side of
//! the cut) or switches to α (sink side). Pairwise Potts terms are
//! decomposed into terminal links plus one directed edge. The label cost is
//! realized with one auxiliary node per label that the move could empty,
//! and one for α when it is not yet in use.

use log::debug;

use crate::graph::STGraph;
use crate::optim::energy::{energy_terms, EnergyParams, UnaryTables};
use crate::optim::maxflow::{min_cut, FlowNetwork, MinCut};
use crate::optim::pool::{Labeling, ModelPool};

const FIXED: usize = usize::MAX;

/// The cut problem of one expansion move.
pub struct ExpansionNetwork {
    pub network: FlowNetwork,
    /// Energy not represented by any cut edge.
    pub constant: f64,
    /// Network node of each event, or `usize::MAX` for events already at α.
    pub node_of_event: Vec<usize>,
    pub alpha: usize,
}

/// Adds `coef * x` (x = 1 on the sink side) to the network.
fn add_linear(network: &mut FlowNetwork, constant: &mut f64, node: usize, coef: f64) {
    if coef >= 0.0 {
        network.add_terminal(node, coef, 0.0);
    } else {
        *constant += coef;
        network.add_terminal(node, 0.0, -coef);
    }
}

impl ExpansionNetwork {
    pub fn build(
        labeling: &Labeling,
        unaries: &UnaryTables,
        graph: &STGraph,
        params: &EnergyParams,
        alpha: usize,
    ) -> Self {
        let labels = labeling.as_slice();
        let n = labels.len();
        let mut node_of_event = vec![FIXED; n];
        let mut count = 0;
        for (i, &l) in labels.iter().enumerate() {
            if l != alpha {
                node_of_event[i] = count;
                count += 1;
            }
        }
        let mut network = FlowNetwork::new(count);
        let mut constant = 0.0;

        for (i, &l) in labels.iter().enumerate() {
            let cost_alpha = unaries.cost(i, alpha) as f64;
            match node_of_event[i] {
                FIXED => constant += cost_alpha,
                v => network.add_terminal(v, cost_alpha, unaries.cost(i, l) as f64),
            }
        }

        let lp = params.lambda_p;
        for (i, j) in graph.edges() {
            let (li, lj) = (labels[i], labels[j]);
            let potts = |a: usize, b: usize| if a != b { lp } else { 0.0 };
            match (node_of_event[i], node_of_event[j]) {
                (FIXED, FIXED) => {}
                (v, FIXED) => network.add_terminal(v, 0.0, potts(li, alpha)),
                (FIXED, v) => network.add_terminal(v, 0.0, potts(lj, alpha)),
                (vi, vj) => {
                    let a = potts(li, lj);
                    let b = potts(li, alpha);
                    let c = potts(alpha, lj);
                    constant += a;
                    add_linear(&mut network, &mut constant, vi, c - a);
                    add_linear(&mut network, &mut constant, vj, -c);
                    let w = b + c - a;
                    if w > 0.0 {
                        network.add_edge(vi, vj, w, 0.0);
                    }
                }
            }
        }

        let h = params.lambda_m;
        let counts = labeling.counts(unaries.label_count());
        if counts[alpha] > 0 {
            constant += h;
        } else if h > 0.0 && count > 0 {
            let z = network.add_node();
            network.add_terminal(z, h, 0.0);
            for v in 0..count {
                network.add_edge(z, v, h, 0.0);
            }
        }
        if h > 0.0 {
            let mut members: Vec<Vec<usize>> = vec![Vec::new(); counts.len()];
            for (i, &l) in labels.iter().enumerate() {
                if l != alpha {
                    members[l].push(node_of_event[i]);
                }
            }
            for nodes in members.iter().filter(|m| !m.is_empty()) {
                let y = network.add_node();
                network.add_terminal(y, 0.0, h);
                for &v in nodes {
                    network.add_edge(v, y, h, 0.0);
                }
            }
        }

        Self {
            network,
            constant,
            node_of_event,
            alpha,
        }
    }

    /// Labeling produced by a cut.
    pub fn apply(&self, labeling: &Labeling, source_side: &[bool]) -> Labeling {
        let labels = labeling
            .as_slice()
            .iter()
            .zip(&self.node_of_event)
            .map(|(&l, &v)| if v != FIXED && !source_side[v] { self.alpha } else { l })
            .collect();
        Labeling::new(labels)
    }

    pub fn solve(&self) -> MinCut {
        min_cut(&self.network)
    }
}

/// Cycles α over the active labels in pool order, applying each expansion
/// move that strictly lowers the energy, until a complete cycle makes no
/// change.
pub fn alpha_expansion(
    labeling: &Labeling,
    pool: &ModelPool,
    unaries: &UnaryTables,
    graph: &STGraph,
    params: &EnergyParams,
) -> Labeling {
    let mut current = labeling.clone();
    let mut energy = energy_terms(&current, unaries, graph, params).total;
    let alphas: Vec<usize> = pool.active_labels().collect();
    loop {
        let mut changed = false;
        for &alpha in &alphas {
            let net = ExpansionNetwork::build(&current, unaries, graph, params, alpha);
            let cut = net.solve();
            let candidate = net.apply(&current, &cut.source_side);
            let e = energy_terms(&candidate, unaries, graph, params).total;
            if e < energy {
                debug!("expansion on label {alpha}: energy {energy} -> {e}");
                current = candidate;
                energy = e;
                changed = true;
            }
        }
        if !changed {
            return current;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::MotionModel;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pool(n: usize) -> ModelPool {
        ModelPool::new((0..n).map(|i| MotionModel::flow(i as f64, 0.0)).collect())
    }

    fn random_instance(rng: &mut ChaCha8Rng, n: usize, labels: usize) -> (UnaryTables, STGraph) {
        let tables = (0..labels)
            .map(|_| Some((0..n).map(|_| rng.gen_range(0..=255)).collect()))
            .collect();
        let mut adjacency = vec![Vec::new(); n];
        for i in 0..n {
            for j in i + 1..n {
                if rng.gen_bool(0.35) {
                    adjacency[i].push(j as u32);
                    adjacency[j].push(i as u32);
                }
            }
        }
        (UnaryTables::from_tables(tables), STGraph { adjacency })
    }

    fn all_labelings(n: usize, labels: usize) -> impl Iterator<Item = Labeling> {
        (0..labels.pow(n as u32)).map(move |mut code| {
            let mut v = Vec::with_capacity(n);
            for _ in 0..n {
                v.push(code % labels);
                code /= labels;
            }
            Labeling::new(v)
        })
    }

    #[test]
    fn optimum_is_left_unchanged() {
        let u = UnaryTables::from_tables(vec![Some(vec![0, 0]), Some(vec![100, 100])]);
        let g = STGraph {
            adjacency: vec![vec![1], vec![0]],
        };
        let start = Labeling::uniform(2, 0);
        let out = alpha_expansion(&start, &pool(2), &u, &g, &EnergyParams::default());
        assert_eq!(out, start);
    }

    #[test]
    fn within_twice_the_global_optimum() {
        let mut equal = 0;
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(2..=10);
            let labels = rng.gen_range(2..=3);
            let (u, g) = random_instance(&mut rng, n, labels);
            let params = EnergyParams::new(rng.gen_range(0.0..80.0f64).round(), rng.gen_range(0.0..300.0f64).round()).unwrap();
            let best = all_labelings(n, labels)
                .map(|l| energy_terms(&l, &u, &g, &params).total)
                .fold(f64::INFINITY, f64::min);
            let start = Labeling::uniform(n, 0);
            let start_e = energy_terms(&start, &u, &g, &params).total;
            let out = alpha_expansion(&start, &pool(labels), &u, &g, &params);
            let e = energy_terms(&out, &u, &g, &params).total;
            assert!(e <= start_e);
            assert!(e <= 2.0 * best, "seed {seed}: {e} vs optimum {best}");
            if e == best {
                equal += 1;
            }
        }
        println!("expansion reached the exhaustive optimum on {equal}/50 instances");
    }

    #[test]
    fn huge_label_cost_leaves_one_label() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (u, g) = random_instance(&mut rng, 10, 3);
        let params = EnergyParams::new(10.0, 255.0 * 10.0 * 3.0).unwrap();
        let start = Labeling::new((0..10).map(|i| i % 3).collect());
        let out = alpha_expansion(&start, &pool(3), &u, &g, &params);
        assert_eq!(out.used_label_count(3), 1);
    }

    #[derive(Debug, Clone)]
    struct Instance {
        seed: u64,
        n: usize,
        labels: usize,
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(120))]

        /// Every labeling reachable by one move costs exactly the cut of
        /// its own configuration (auxiliary nodes at their best side) plus
        /// the network constant.
        #[test]
        fn cut_energy_equals_total_energy(
            inst in (0u64..10_000, 1usize..=6, 2usize..=3).prop_map(|(seed, n, labels)| Instance { seed, n, labels }),
            alpha_pick in 0usize..3,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(inst.seed);
            let (u, g) = random_instance(&mut rng, inst.n, inst.labels);
            let params = EnergyParams::new(rng.gen_range(0.0..50.0f64).round(), rng.gen_range(0.0..500.0f64).round()).unwrap();
            let start = Labeling::new((0..inst.n).map(|_| rng.gen_range(0..inst.labels)).collect());
            let alpha = alpha_pick % inst.labels;
            let net = ExpansionNetwork::build(&start, &u, &g, &params, alpha);
            let vars = net.node_of_event.iter().filter(|&&v| v != FIXED).count();
            let aux = net.network.node_count() - vars;
            for mask in 0..1usize << vars {
                let mut best = f64::INFINITY;
                for aux_mask in 0..1usize << aux {
                    let side: Vec<bool> = (0..vars)
                        .map(|v| mask >> v & 1 == 0)
                        .chain((0..aux).map(|a| aux_mask >> a & 1 == 0))
                        .collect();
                    best = best.min(net.network.cut_cost(&side));
                }
                let side: Vec<bool> = (0..vars).map(|v| mask >> v & 1 == 0).collect();
                let induced = net.apply(&start, &side);
                let expected = energy_terms(&induced, &u, &g, &params).total;
                prop_assert!((net.constant + best - expected).abs() < 1e-9,
                    "cut {} + {} vs energy {}", net.constant, best, expected);
            }
        }
    }
}

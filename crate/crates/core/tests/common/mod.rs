#![allow(dead_code)]

use graphlog::graph::{build_graph, EdgeEntry, Graph, GraphFile, GraphSpec, VertexEntry};
use rand::Rng;
use std::collections::BTreeSet;

/// Random connected graph: a random recursive tree plus `extra` chords,
/// weights in (0, 2], measures in [0.5, 2].
pub fn random_graph<R: Rng>(rng: &mut R, n: usize, extra: usize) -> Graph {
    let mut pairs = BTreeSet::new();
    for i in 1..n {
        let j = rng.gen_range(0..i);
        pairs.insert((j, i));
    }
    if n > 2 {
        for _ in 0..extra {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a != b {
                pairs.insert((a.min(b), a.max(b)));
            }
        }
    }
    let vertices = (0..n)
        .map(|i| VertexEntry {
            id: format!("v{i}"),
            mu: Some(rng.gen_range(0.5..=2.0)),
        })
        .collect();
    let edges = pairs
        .into_iter()
        .map(|(a, b)| EdgeEntry {
            a: format!("v{a}"),
            b: format!("v{b}"),
            w: 2.0 * (1.0 - rng.gen::<f64>()),
        })
        .collect();
    build_graph(&GraphSpec::Explicit(GraphFile {
        mu_default: 1.0,
        vertices,
        edges,
    }))
    .expect("random graph is valid")
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

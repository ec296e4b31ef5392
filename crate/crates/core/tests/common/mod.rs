//! Random single-root branch graphs shared by the integration suites.
#![allow(dead_code)]

use graphfold::{Branch, GraphSpec, Partition};
use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Instance {
    pub spec: GraphSpec,
    pub partition: Partition,
}

fn hop(rng: &mut impl Rng) -> f64 {
    rng.random_range(-2.0..-0.1)
}

/// Random spanning tree over `nodes` plus a few extra edges.
fn connect_block(rng: &mut impl Rng, nodes: &[usize], edges: &mut Vec<(usize, usize, f64)>) {
    for (pos, &v) in nodes.iter().enumerate().skip(1) {
        let u = nodes[rng.random_range(0..pos)];
        edges.push((u, v, hop(rng)));
    }
    for a in 0..nodes.len() {
        for b in a + 1..nodes.len() {
            let (x, y) = (nodes[a], nodes[b]);
            let exists = edges.iter().any(|&(u, v, _)| (u, v) == (x, y) || (v, u) == (x, y));
            if !exists && rng.random_bool(0.25) {
                edges.push((x, y, hop(rng)));
            }
        }
    }
}

/// Center of at most 6 nodes and up to 3 branches of at most 5 sites, with
/// real hoppings and couplings in [-2, -0.1] and node labels shuffled.
pub fn random_instance(rng: &mut impl Rng) -> Instance {
    let n_c = rng.random_range(1..=6usize);
    let n_branches = rng.random_range(1..=3usize);
    let sizes: Vec<usize> = (0..n_branches).map(|_| rng.random_range(1..=5usize)).collect();
    let n = n_c + sizes.iter().sum::<usize>();
    let mut label: Vec<usize> = (0..n).collect();
    label.shuffle(rng);

    let mut edges: Vec<(usize, usize, f64)> = Vec::new();
    let mut onsites: Vec<(usize, f64)> = Vec::new();
    let center: Vec<usize> = (0..n_c).collect();
    connect_block(rng, &center, &mut edges);
    let mut branches_raw = Vec::new();
    let mut next = n_c;
    for &size in &sizes {
        let sites: Vec<usize> = (next..next + size).collect();
        next += size;
        connect_block(rng, &sites, &mut edges);
        let root = rng.random_range(0..n_c);
        let mut coupled = sites.clone();
        coupled.shuffle(rng);
        let count = rng.random_range(1..=size.min(2));
        for &s in &coupled[..count] {
            edges.push((root, s, hop(rng)));
        }
        branches_raw.push((sites, root));
    }
    for v in 0..n {
        if rng.random_bool(0.5) {
            onsites.push((v, rng.random_range(-1.0..1.0)));
        }
    }

    let mut spec = GraphSpec::new(n);
    for (i, j, t) in edges {
        spec.add_hopping(label[i], label[j], t);
    }
    for (i, v) in onsites {
        spec.add_onsite(label[i], v);
    }
    let branches = branches_raw
        .into_iter()
        .map(|(sites, root)| Branch::from_graph(&spec, sites.iter().map(|&s| label[s]).collect(), label[root]))
        .collect();
    let partition = Partition::new(center.iter().map(|&c| label[c]).collect(), branches);
    Instance { spec, partition }
}

pub fn seeded_instances(seed: u64, count: usize) -> Vec<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_instance(&mut rng)).collect()
}

/// Dense real Hamiltonian assembled directly from the hopping list.
pub fn dense_real(spec: &GraphSpec) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(spec.n_nodes, spec.n_nodes);
    for t in &spec.hoppings {
        h[(t.i, t.j)] += t.t.re;
        h[(t.j, t.i)] += t.t.re;
    }
    for o in &spec.onsites {
        h[(o.i, o.i)] += o.v.re;
    }
    h
}

pub fn submatrix(h: &DMatrix<f64>, rows: &[usize], cols: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), cols.len(), |r, c| h[(rows[r], cols[c])])
}

/// `H_c + H_cb (E - H_b)^-1 H_bc` by explicit inversion, one branch at a time.
/// `None` when some `E - H_b` is numerically singular.
pub fn explicit_effective(h: &DMatrix<f64>, p: &Partition, e: f64) -> Option<DMatrix<f64>> {
    let mut m = submatrix(h, &p.center, &p.center);
    for b in &p.branches {
        let hb = submatrix(h, &b.sites, &b.sites);
        let resolvent = (DMatrix::identity(b.sites.len(), b.sites.len()) * e - hb).try_inverse()?;
        if resolvent.amax() > 1e10 {
            return None;
        }
        let hcb = submatrix(h, &p.center, &b.sites);
        m += &hcb * resolvent * hcb.transpose();
    }
    Some(m)
}

pub fn restrict(f: &DVector<f64>, nodes: &[usize]) -> DVector<f64> {
    DVector::from_fn(nodes.len(), |i, _| f[nodes[i]])
}

//! Seeded random instances for property checks.
//!
//! Generators build `T` so that `TP = PT = P` holds by construction where a
//! family needs it, instead of rejection sampling pairs.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;

use crate::linalg::stationary_distribution;
use crate::operators::{MarkovOperator, MarkovProjection};
use crate::statespace::{make_simplex, StateSpace};

pub type CorpusRng = ChaCha8Rng;

pub fn rng(seed: u64) -> CorpusRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Positive chain, `P = T_π` at its stationary distribution.
    RankOne,
    /// Block-diagonal positive chain, `P` averages each block onto its
    /// stationary distribution.
    Block,
    /// Permutation with a uniform rank-one `P`; never ergodic.
    Permutation,
    /// Two closed classes, `P = T_π` with `π` a mixture of class stationaries.
    Reducible,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::RankOne => "rank-one",
            Family::Block => "block",
            Family::Permutation => "permutation",
            Family::Reducible => "reducible",
        }
    }

    /// Whether instances of this family are uniformly `P`-ergodic.
    pub fn ergodic(self) -> bool {
        matches!(self, Family::RankOne | Family::Block)
    }
}

#[derive(Debug, Clone)]
pub struct Instance {
    pub label: String,
    pub family: Family,
    pub t: MarkovOperator,
    pub p: MarkovProjection,
}

/// Column-stochastic matrix with i.i.d. `Exp(1)` entries, columns normalized.
pub fn random_chain(rng: &mut impl Rng, n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(Exp1));
    for mut c in m.column_iter_mut() {
        let s = c.sum();
        c /= s;
    }
    m
}

fn simplex(n: usize) -> Arc<StateSpace> {
    Arc::new(make_simplex(n).expect("positive dimension"))
}

fn stationary(m: &DMatrix<f64>) -> DVector<f64> {
    stationary_distribution(m).expect("positive chains have a stationary distribution")
}

pub fn rank_one_instance(rng: &mut impl Rng, n: usize) -> Instance {
    let m = random_chain(rng, n);
    let pi = stationary(&m);
    let space = simplex(n);
    Instance {
        label: format!("rank-one/{n}"),
        family: Family::RankOne,
        t: MarkovOperator::new(m, space.clone()).expect("stochastic by construction"),
        p: MarkovProjection::rank_one(space, pi).expect("stationary vector is a state"),
    }
}

/// A random partition of `0..n` into `k` nonempty blocks.
fn random_partition(rng: &mut impl Rng, n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut states: Vec<usize> = (0..n).collect();
    states.shuffle(rng);
    let mut blocks: Vec<Vec<usize>> = states[..k].iter().map(|&s| vec![s]).collect();
    for &s in &states[k..] {
        let b = rng.random_range(0..k);
        blocks[b].push(s);
    }
    for b in &mut blocks {
        b.sort_unstable();
    }
    blocks.sort();
    blocks
}

fn block_diagonal(rng: &mut impl Rng, n: usize, blocks: &[Vec<usize>]) -> (DMatrix<f64>, Vec<DVector<f64>>) {
    let mut m = DMatrix::zeros(n, n);
    let mut anchors = Vec::with_capacity(blocks.len());
    for b in blocks {
        let local = random_chain(rng, b.len());
        let pi = stationary(&local);
        let mut anchor = DVector::zeros(n);
        for (a, &i) in b.iter().enumerate() {
            anchor[i] = pi[a];
            for (c, &j) in b.iter().enumerate() {
                m[(i, j)] = local[(a, c)];
            }
        }
        anchors.push(anchor);
    }
    (m, anchors)
}

/// Needs `n ≥ 3`, so that at least one block is not a singleton and
/// `P ≠ I`.
pub fn block_instance(rng: &mut impl Rng, n: usize) -> Instance {
    let k = rng.random_range(2..=(n - 1).min(3));
    let blocks = random_partition(rng, n, k);
    let (m, anchors) = block_diagonal(rng, n, &blocks);
    let space = simplex(n);
    Instance {
        label: format!("block/{n}/{k}"),
        family: Family::Block,
        t: MarkovOperator::new(m, space.clone()).expect("stochastic by construction"),
        p: MarkovProjection::block_averaging(space, blocks, Some(anchors))
            .expect("anchors are block stationaries"),
    }
}

/// A random permutation other than the identity.
pub fn permutation_instance(rng: &mut impl Rng, n: usize) -> Instance {
    let mut perm: Vec<usize> = (0..n).collect();
    while perm.iter().enumerate().all(|(i, &j)| i == j) {
        perm.shuffle(rng);
    }
    let m = DMatrix::from_fn(n, n, |i, j| if perm[j] == i { 1.0 } else { 0.0 });
    let space = simplex(n);
    Instance {
        label: format!("permutation/{n}"),
        family: Family::Permutation,
        t: MarkovOperator::new(m, space.clone()).expect("permutations are stochastic"),
        p: MarkovProjection::rank_one(space, DVector::from_element(n, 1.0 / n as f64))
            .expect("uniform state"),
    }
}

/// Needs `n ≥ 2`.
pub fn reducible_instance(rng: &mut impl Rng, n: usize) -> Instance {
    let blocks = random_partition(rng, n, 2);
    let (m, anchors) = block_diagonal(rng, n, &blocks);
    // Mixture weights away from 1/4 and 3/4 keep every class visible to P.
    let w = rng.random_range(0.3..0.7);
    let pi = &anchors[0] * w + &anchors[1] * (1.0 - w);
    let space = simplex(n);
    Instance {
        label: format!("reducible/{n}"),
        family: Family::Reducible,
        t: MarkovOperator::new(m, space.clone()).expect("stochastic by construction"),
        p: MarkovProjection::rank_one(space, pi).expect("mixture of states"),
    }
}

pub fn instance(rng: &mut impl Rng, family: Family, n: usize) -> Instance {
    match family {
        Family::RankOne => rank_one_instance(rng, n),
        Family::Block => block_instance(rng, n),
        Family::Permutation => permutation_instance(rng, n),
        Family::Reducible => reducible_instance(rng, n),
    }
}

/// `count` instances per dimension, cycling through the ergodic families;
/// `with_negative` appends one permutation and one reducible instance per
/// dimension.
pub fn generate(seed: u64, count: usize, dims: &[usize], with_negative: bool) -> Vec<Instance> {
    let mut rng = rng(seed);
    let mut out = Vec::new();
    for &n in dims {
        for k in 0..count {
            let family = if n >= 3 && k % 2 == 1 {
                Family::Block
            } else {
                Family::RankOne
            };
            let mut inst = instance(&mut rng, family, n);
            inst.label = format!("{}#{k}", inst.label);
            out.push(inst);
        }
        if with_negative && n >= 2 {
            out.push(permutation_instance(&mut rng, n));
            out.push(reducible_instance(&mut rng, n));
        }
    }
    out
}

/// `count` instances per dimension drawn from all four families in a fixed
/// rotation: rank-one, block, rank-one, permutation, reducible. Block
/// instances fall back to rank-one below dimension 3, negative families to
/// rank-one in dimension 1.
pub fn mixed(seed: u64, count: usize, dims: &[usize]) -> Vec<Instance> {
    const ROTATION: [Family; 5] = [
        Family::RankOne,
        Family::Block,
        Family::RankOne,
        Family::Permutation,
        Family::Reducible,
    ];
    let mut rng = rng(seed);
    let mut out = Vec::with_capacity(count * dims.len());
    for &n in dims {
        for k in 0..count {
            let family = match ROTATION[k % ROTATION.len()] {
                Family::Block if n < 3 => Family::RankOne,
                Family::Permutation | Family::Reducible if n < 2 => Family::RankOne,
                f => f,
            };
            let mut inst = instance(&mut rng, family, n);
            inst.label = format!("{}#{k}", inst.label);
            out.push(inst);
        }
    }
    out
}

/// A reversible companion `S` with `SP = PS = P`: Metropolis–Hastings
/// against each block anchor (or the single rank-one target), driven by a
/// random symmetric proposal.
pub fn companion(rng: &mut impl Rng, p: &MarkovProjection) -> MarkovOperator {
    let n = p.dim();
    let mut blocks: Vec<(Vec<usize>, DVector<f64>)> = Vec::new();
    for (j, col) in p.matrix().column_iter().enumerate() {
        let y = col.into_owned();
        match blocks.iter_mut().find(|(_, a)| (a - &y).abs().max() <= 1e-12) {
            Some((b, _)) => b.push(j),
            None => blocks.push((vec![j], y)),
        }
    }
    let mut s = DMatrix::zeros(n, n);
    for (block, target) in &blocks {
        let k = block.len();
        for (a, &j) in block.iter().enumerate() {
            for &i in &block[a + 1..] {
                let proposal = rng.random::<f64>() / k as f64;
                let (pi, pj) = (target[i], target[j]);
                if pi > 0.0 && pj > 0.0 {
                    s[(i, j)] = proposal * (pi / pj).min(1.0);
                    s[(j, i)] = proposal * (pj / pi).min(1.0);
                }
            }
        }
        for &j in block {
            let out: f64 = block.iter().filter(|&&i| i != j).map(|&i| s[(i, j)]).sum();
            s[(j, j)] = 1.0 - out;
        }
    }
    MarkovOperator::new(s, p.space().clone()).expect("Metropolis kernels are stochastic")
}

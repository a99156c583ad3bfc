#![allow(dead_code)]

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use orderctx::behavior::make_pr_box_variant;
use orderctx::{behavior_from_assignment, enumerate_local_assignments, mix, Behavior, Scenario};

pub fn rng(seed: u64) -> ChaCha8Rng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

/// The 8 PR-box symmetries followed by the 16 local vertices.
pub fn vertices_2222() -> Vec<Behavior> {
    let mut out: Vec<Behavior> = (0..8)
        .map(|b| make_pr_box_variant(b & 1 != 0, b & 2 != 0, b & 4 != 0))
        .collect();
    out.extend(
        enumerate_local_assignments(&Scenario::binary(2))
            .unwrap()
            .iter()
            .map(behavior_from_assignment),
    );
    out
}

/// PR-box symmetries on every pair of parties with a uniform third party,
/// followed by the 64 local vertices.
pub fn vertices_3() -> Vec<Behavior> {
    let noise = Behavior::uniform(Scenario::binary(1));
    let mut out = Vec::new();
    // Party order of `pr ⊗ noise` is (pair0, pair1, third); permute into place.
    for perm in [[0, 1, 2], [0, 2, 1], [2, 0, 1]] {
        for b in 0..8 {
            let pr = make_pr_box_variant(b & 1 != 0, b & 2 != 0, b & 4 != 0);
            out.push(pr.product(&noise).unwrap().permute_parties(&perm).unwrap());
        }
    }
    out.extend(
        enumerate_local_assignments(&Scenario::binary(3))
            .unwrap()
            .iter()
            .map(behavior_from_assignment),
    );
    out
}

/// Random mixture of 1–`max_terms` vertices with exponential weights.
pub fn random_mixture(rng: &mut impl Rng, vertices: &[Behavior], max_terms: usize) -> Behavior {
    let k = rng.random_range(1..=max_terms);
    let picks: Vec<usize> = (0..k).map(|_| rng.random_range(0..vertices.len())).collect();
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
    let total: f64 = raw.iter().sum();
    let terms: Vec<(f64, &Behavior)> = raw
        .iter()
        .zip(&picks)
        .map(|(w, &i)| (w / total, &vertices[i]))
        .collect();
    mix(&terms).unwrap()
}

pub fn max_entry_diff(p: &Behavior, q: &Behavior) -> f64 {
    p.probs()
        .iter()
        .zip(q.probs())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}

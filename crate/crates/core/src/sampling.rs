//! Exact autoregressive sampling from the Born distribution.
//!
//! `prob(s_k | s_1..s_{k-1})` is the ratio of two projector marginals; on
//! trees they come from the doubled network without forming the state.

use std::collections::HashMap;

use rand::Rng;

use crate::error::{arg_err, Error, Result};
use crate::marginals::{marginal, LeafOp};
use crate::network::{SequenceState, TensorNetwork};
use crate::rng::{stream, Stream};

/// Distribution of the symbol at position `prefix.len()` given the prefix.
pub fn conditional_distribution(net: &TensorNetwork, prefix: &[usize]) -> Result<Vec<f64>> {
    net.check_state_model()?;
    let dims = net.position_dims();
    let k = prefix.len();
    if k >= dims.len() {
        return arg_err(format!("prefix of length {k} leaves no position to sample among {}", dims.len()));
    }
    if let Some(p) = (0..k).find(|&p| prefix[p] >= dims[p]) {
        return arg_err(format!("symbol {} at position {p} outside alphabet of size {}", prefix[p], dims[p]));
    }
    let ops: Vec<LeafOp> = (0..dims.len())
        .map(|p| match p.cmp(&k) {
            std::cmp::Ordering::Less => LeafOp::Project(prefix[p]),
            std::cmp::Ordering::Equal => LeafOp::Open,
            std::cmp::Ordering::Greater => LeafOp::Identity,
        })
        .collect();
    let mut joint = marginal(net, &ops)?;
    for x in joint.iter_mut() {
        *x = x.max(0.0);
    }
    let total: f64 = joint.iter().sum();
    if !(total > 0.0) {
        return Err(Error::Conditioning { prefix: prefix.to_vec() });
    }
    Ok(joint.into_iter().map(|x| x / total).collect())
}

/// Index of the first cumulative weight strictly above `u`.
fn inverse_cdf(probs: &[f64], u: f64) -> usize {
    let mut cumulative = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        cumulative += p;
        if u < cumulative {
            return k;
        }
    }
    // u landed past the rounded total: take the last symbol with mass.
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// `count` independent draws. Conditionals are cached by prefix within the
/// call; the draws themselves consume one uniform per position.
pub fn sample<R: Rng + ?Sized>(net: &TensorNetwork, count: usize, rng: &mut R) -> Result<Vec<SequenceState>> {
    net.check_state_model()?;
    let n = net.n_positions();
    let mut cache: HashMap<Vec<usize>, Vec<f64>> = HashMap::new();
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let mut seq = Vec::with_capacity(n);
        for _ in 0..n {
            let probs = match cache.get(&seq) {
                Some(p) => p,
                None => {
                    let p = conditional_distribution(net, &seq)?;
                    cache.entry(seq.clone()).or_insert(p)
                }
            };
            let u: f64 = rng.random();
            seq.push(inverse_cdf(probs, u));
        }
        out.push(SequenceState::new(seq));
    }
    Ok(out)
}

/// [`sample`] on the seed's sampling stream.
pub fn sample_seeded(net: &TensorNetwork, count: usize, seed: u64) -> Result<Vec<SequenceState>> {
    sample(net, count, &mut stream(seed, Stream::Sample))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_binary_tree, build_chain, build_mera, QuiverBuilder};
    use crate::model::{born_probability, model_distribution};
    use crate::network::{default_edge_dims, enumerate_sequences};
    use crate::tensor::DenseTensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn single(amps: &[f64]) -> TensorNetwork {
        let mut b = QuiverBuilder::new();
        let v = b.add_vertex();
        b.add_in_edge(v);
        b.add_out_edge(v);
        let t = DenseTensor::from_real(vec![amps.len(), 1], amps).unwrap();
        TensorNetwork::new(b.build().unwrap(), vec![1, amps.len()], vec![t]).unwrap()
    }

    fn random(q: crate::Quiver, seed: u64) -> TensorNetwork {
        let dims = default_edge_dims(&q, 2, &[4]).unwrap();
        TensorNetwork::random(q, dims, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
    }

    /// Deterministic chain placing all mass on `target`.
    fn deterministic(target: &[usize]) -> TensorNetwork {
        let q = build_chain(target.len()).unwrap();
        let dims: Vec<usize> =
            (0..q.n_edges()).map(|e| if q.edge(e).kind == crate::graph::EdgeKind::Out { 2 } else { 1 }).collect();
        let tensors = (0..q.n_vertices())
            .map(|v| {
                let shape: Vec<usize> = q.outgoing(v).iter().chain(q.incoming(v)).map(|&e| dims[e]).collect();
                let len: usize = shape.iter().product();
                let mut data = vec![0.0; len];
                data[target[v]] = 1.0;
                DenseTensor::from_real(shape, &data).unwrap()
            })
            .collect();
        TensorNetwork::new(q, dims, tensors).unwrap()
    }

    #[test]
    fn conditional_examples() {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let p = conditional_distribution(&single(&[h, h]), &[]).unwrap();
        assert!((p[0] - 0.5).abs() < 1e-15 && (p[1] - 0.5).abs() < 1e-15);

        let det = deterministic(&[1, 0, 1]);
        assert_eq!(conditional_distribution(&det, &[1]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(conditional_distribution(&det, &[0]), Err(Error::Conditioning { prefix: vec![0] }));
        assert!(conditional_distribution(&det, &[1, 0, 1]).is_err());
    }

    fn brute_conditional(net: &TensorNetwork, prefix: &[usize]) -> Vec<f64> {
        let dims = net.position_dims();
        let mut out = vec![0.0; dims[prefix.len()]];
        for s in enumerate_sequences(&dims) {
            if s.symbols[..prefix.len()] == *prefix {
                out[s.symbols[prefix.len()]] += born_probability(net, &s).unwrap();
            }
        }
        let total: f64 = out.iter().sum();
        out.iter().map(|x| x / total).collect()
    }

    #[test]
    fn conditionals_match_enumeration() {
        for net in [
            random(build_chain(6).unwrap(), 1),
            random(build_binary_tree(4).unwrap(), 2),
            random(build_mera(4).unwrap(), 3),
        ] {
            let n = net.n_positions();
            for k in 0..n {
                for prefix in enumerate_sequences(&vec![2; k]) {
                    let fast = conditional_distribution(&net, &prefix.symbols).unwrap();
                    let slow = brute_conditional(&net, &prefix.symbols);
                    assert!((fast.iter().sum::<f64>() - 1.0).abs() < 1e-10);
                    for (a, b) in fast.iter().zip(&slow) {
                        assert!((a - b).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn chain_rule_holds() {
        let net = random(build_chain(6).unwrap(), 4);
        for s in enumerate_sequences(&net.position_dims()) {
            let mut product = 1.0;
            for k in 0..6 {
                product *= conditional_distribution(&net, &s.symbols[..k]).unwrap()[s.symbols[k]];
            }
            assert!((product - born_probability(&net, &s).unwrap()).abs() < 1e-10);
        }
    }

    #[test]
    fn deterministic_model_always_draws_its_sequence() {
        let det = deterministic(&[0, 1, 1, 0]);
        let draws = sample_seeded(&det, 50, 3).unwrap();
        assert!(draws.iter().all(|s| s.symbols == vec![0, 1, 1, 0]));
    }

    #[test]
    fn sampling_is_deterministic_per_seed() {
        let net = random(build_binary_tree(4).unwrap(), 5);
        assert_eq!(sample_seeded(&net, 100, 9).unwrap(), sample_seeded(&net, 100, 9).unwrap());
        assert_ne!(sample_seeded(&net, 100, 9).unwrap(), sample_seeded(&net, 100, 10).unwrap());
        assert!(sample_seeded(&net, 0, 9).unwrap().is_empty());
    }

    #[test]
    fn uniform_frequencies() {
        let h = 0.5;
        let mut b = QuiverBuilder::new();
        let v = b.add_vertex();
        b.add_in_edge(v);
        b.add_out_edge(v);
        b.add_out_edge(v);
        let t = DenseTensor::from_real(vec![2, 2, 1], &[h, h, h, h]).unwrap();
        let net = TensorNetwork::new(b.build().unwrap(), vec![1, 2, 2], vec![t]).unwrap();
        let draws = sample_seeded(&net, 100_000, 1).unwrap();
        let mut counts = [0usize; 4];
        for d in &draws {
            counts[d.symbols[0] * 2 + d.symbols[1]] += 1;
        }
        for c in counts {
            assert!((c as f64 / 1e5 - 0.25).abs() < 0.01);
        }
    }

    #[test]
    fn empirical_matches_born_in_total_variation() {
        let net = random(build_binary_tree(4).unwrap(), 6);
        let exact = model_distribution(&net).unwrap();
        let draws = sample_seeded(&net, 200_000, 7).unwrap();
        let mut counts: HashMap<Vec<usize>, usize> = HashMap::new();
        for d in draws {
            *counts.entry(d.symbols).or_default() += 1;
        }
        let tv: f64 =
            exact.iter().map(|(s, p)| (p - *counts.get(s).unwrap_or(&0) as f64 / 2e5).abs()).sum::<f64>() / 2.0;
        assert!(tv < 0.01, "{tv}");
    }

    #[test]
    fn inverse_cdf_uses_strict_comparison() {
        assert_eq!(inverse_cdf(&[0.5, 0.5], 0.5), 1);
        assert_eq!(inverse_cdf(&[0.0, 1.0], 0.0), 1);
        assert_eq!(inverse_cdf(&[0.3, 0.7, 0.0], 0.9999999999999999), 1);
    }
}

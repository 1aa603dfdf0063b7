//! The Born-rule model over length-`n` sequences and its training objectives.
//!
//! All logarithms are natural (nats).

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::error::{arg_err, Error, Result};
use crate::network::{amplitude, enumerate_sequences, state, SequenceState, TensorNetwork};

/// Ordered alphabet. Tokens are raw bytes so that byte, character and word
/// vocabularies share one representation; `oov` marks the reserved
/// out-of-vocabulary symbol when there is one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SymbolSet {
    tokens: Vec<Vec<u8>>,
    oov: Option<usize>,
}

impl SymbolSet {
    pub fn new(tokens: Vec<Vec<u8>>, oov: Option<usize>) -> Result<Self> {
        if tokens.is_empty() {
            return arg_err("symbol set must not be empty");
        }
        let mut seen = std::collections::HashSet::new();
        for (k, t) in tokens.iter().enumerate() {
            if Some(k) != oov && !seen.insert(t) {
                return arg_err(format!("duplicate symbol {:?}", String::from_utf8_lossy(t)));
            }
        }
        if let Some(o) = oov {
            if o >= tokens.len() {
                return arg_err(format!("out-of-vocabulary index {o} outside {} symbols", tokens.len()));
            }
        }
        Ok(Self { tokens, oov })
    }

    pub fn from_strs(tokens: &[&str]) -> Result<Self> {
        Self::new(tokens.iter().map(|t| t.as_bytes().to_vec()).collect(), None)
    }

    /// Alphabet size `w`.
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[Vec<u8>] {
        &self.tokens
    }

    pub fn token(&self, index: usize) -> &[u8] {
        &self.tokens[index]
    }

    pub fn oov(&self) -> Option<usize> {
        self.oov
    }

    pub fn index_of(&self, token: &[u8]) -> Option<usize> {
        self.tokens.iter().enumerate().position(|(k, t)| Some(k) != self.oov && t == token)
    }
}

/// Training data: fixed-length sequences with positive multiplicities.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SampleMultiset {
    n: usize,
    entries: BTreeMap<Vec<usize>, u64>,
}

impl SampleMultiset {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return arg_err("sequence length must be positive");
        }
        Ok(Self { n, entries: BTreeMap::new() })
    }

    pub fn from_sequences<I>(n: usize, seqs: I) -> Result<Self>
    where
        I: IntoIterator<Item = Vec<usize>>,
    {
        let mut s = Self::new(n)?;
        for seq in seqs {
            s.add(seq, 1)?;
        }
        Ok(s)
    }

    pub fn add(&mut self, seq: Vec<usize>, multiplicity: u64) -> Result<()> {
        if seq.len() != self.n {
            return arg_err(format!("sequence of length {} in a multiset of length-{} sequences", seq.len(), self.n));
        }
        if multiplicity == 0 {
            return arg_err("multiplicities must be at least 1");
        }
        *self.entries.entry(seq).or_insert(0) += multiplicity;
        Ok(())
    }

    /// Sequence length.
    pub fn n(&self) -> usize {
        self.n
    }

    /// `|S|`, the sum of multiplicities.
    pub fn cardinality(&self) -> u64 {
        self.entries.values().sum()
    }

    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn multiplicity(&self, seq: &[usize]) -> u64 {
        self.entries.get(seq).copied().unwrap_or(0)
    }

    /// Distinct sequences in ascending order with their multiplicities.
    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, u64)> {
        self.entries.iter().map(|(s, &m)| (s, m))
    }

    /// Check that every sequence fits the network's positions and alphabets.
    pub fn check_against(&self, net: &TensorNetwork) -> Result<()> {
        if self.n != net.n_positions() {
            return arg_err(format!(
                "samples have length {} but the network has {} positions",
                self.n,
                net.n_positions()
            ));
        }
        let dims = net.position_dims();
        for (seq, _) in self.iter() {
            if let Some(k) = (0..self.n).find(|&k| seq[k] >= dims[k]) {
                return arg_err(format!(
                    "symbol {} at position {k} of {seq:?} outside alphabet of size {}",
                    seq[k], dims[k]
                ));
            }
        }
        Ok(())
    }
}

/// A probability distribution over sequences, stored on its support.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Distribution {
    probs: BTreeMap<Vec<usize>, f64>,
}

impl Distribution {
    pub fn from_pairs<I: IntoIterator<Item = (Vec<usize>, f64)>>(pairs: I) -> Result<Self> {
        let mut probs = BTreeMap::new();
        for (s, p) in pairs {
            if !(p >= 0.0) || !p.is_finite() {
                return arg_err(format!("invalid probability {p} for {s:?}"));
            }
            *probs.entry(s).or_insert(0.0) += p;
        }
        Ok(Self { probs })
    }

    pub fn get(&self, s: &[usize]) -> f64 {
        self.probs.get(s).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Vec<usize>, f64)> {
        self.probs.iter().map(|(s, &p)| (s, p))
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.probs.values().sum()
    }

    /// Shannon entropy with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self.probs.values().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
    }
}

/// `mu(s) = |<s|Psi>|^2`.
pub fn born_probability(net: &TensorNetwork, s: &SequenceState) -> Result<f64> {
    Ok(amplitude(net, s)?.norm_sqr())
}

/// The model's full distribution, by contracting the state once. Only for
/// enumerable sizes.
pub fn model_distribution(net: &TensorNetwork) -> Result<Distribution> {
    let psi = state(net)?;
    let seqs = enumerate_sequences(&net.position_dims());
    Distribution::from_pairs(seqs.into_iter().zip(psi.data()).map(|(s, a)| (s.symbols, a.norm_sqr())))
}

/// `m(s) / |S|`.
pub fn empirical_distribution(samples: &SampleMultiset) -> Result<Distribution> {
    let total = samples.cardinality();
    if total == 0 {
        return arg_err("empirical distribution of an empty sample");
    }
    Distribution::from_pairs(samples.iter().map(|(s, m)| (s.clone(), m as f64 / total as f64)))
}

/// Free energy `F(u|S) = -sum_s m(s) 2 Re log <s|Psi>`.
///
/// A sequence with zero amplitude makes the objective infinite; that is
/// reported as [`Error::InfiniteObjective`] naming the sequence.
pub fn log_likelihood(net: &TensorNetwork, samples: &SampleMultiset) -> Result<f64> {
    net.check_state_model()?;
    samples.check_against(net)?;
    let entries: Vec<(&Vec<usize>, u64)> = samples.iter().collect();
    let terms: Vec<Result<f64>> = entries
        .par_iter()
        .map(|(seq, m)| {
            let a = amplitude(net, &SequenceState::new(seq.to_vec()))?;
            if a.norm() == 0.0 {
                return Err(Error::InfiniteObjective { sequence: seq.to_vec() });
            }
            Ok(-(*m as f64) * 2.0 * a.ln().re)
        })
        .collect();
    // Fixed summation order regardless of worker count.
    terms.into_iter().sum()
}

/// `D(p||q) = sum_s p(s) log(p(s)/q(s))` with `0 log(0/q) = 0`.
pub fn kl_divergence(p: &Distribution, q: &Distribution) -> Result<f64> {
    kl_with(p, |s| Ok(q.get(s)))
}

/// `D(p||mu_u)` evaluating the model only on the support of `p`.
pub fn kl_to_model(p: &Distribution, net: &TensorNetwork) -> Result<f64> {
    kl_with(p, |s| born_probability(net, &SequenceState::new(s.to_vec())))
}

fn kl_with(p: &Distribution, q: impl Fn(&[usize]) -> Result<f64>) -> Result<f64> {
    let mut total = 0.0;
    for (s, ps) in p.iter() {
        if ps == 0.0 {
            continue;
        }
        let qs = q(s)?;
        if qs <= 0.0 {
            return Err(Error::InfiniteDivergence { sequence: s.clone() });
        }
        total += ps * (ps / qs).ln();
    }
    Ok(total.max(0.0))
}

//! Mutual information between positions and its decay with distance.
//!
//! `I(i, j) = D(p_ij || p_i p_j)` in nats. A curve `I(l)` averages over all
//! position pairs at distance `l`. Curves are fitted either by a power law
//! `c1 l^-alpha + c2` or by an exponential `c exp(-m l)`, both in log space.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{arg_err, Error, Result};
use crate::marginals::{marginal, LeafOp, TreePairs};
use crate::model::SampleMultiset;
use crate::network::TensorNetwork;

/// Values of `I` below this are treated as zero when fitting.
pub const FIT_FLOOR: f64 = 1e-12;
/// Tolerated negative float error before clipping to zero.
const NEGATIVE_SLACK: f64 = 1e-12;
/// Largest state the dense fallback will form.
const DENSE_LIMIT: usize = 1 << 22;

/// Mutual information of a joint laid out row-major as `[a, b]`.
pub fn mutual_information_of_joint(joint: &[f64], da: usize, db: usize) -> f64 {
    debug_assert_eq!(joint.len(), da * db);
    let total: f64 = joint.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    let mut pa = vec![0.0; da];
    let mut pb = vec![0.0; db];
    for a in 0..da {
        for b in 0..db {
            let p = joint[a * db + b].max(0.0) / total;
            pa[a] += p;
            pb[b] += p;
        }
    }
    let mut mi = 0.0;
    for a in 0..da {
        for b in 0..db {
            let p = joint[a * db + b].max(0.0) / total;
            if p > 0.0 {
                mi += p * (p / (pa[a] * pb[b])).ln();
            }
        }
    }
    assert!(mi >= -NEGATIVE_SLACK, "mutual information {mi} is negative beyond rounding");
    mi.max(0.0)
}

fn check_pair(n: usize, i: usize, j: usize) -> Result<()> {
    if i == j || i >= n || j >= n {
        return arg_err(format!("positions ({i}, {j}) must be distinct and below {n}"));
    }
    Ok(())
}

fn dense_guard(net: &TensorNetwork) -> Result<()> {
    let total = net.position_dims().iter().try_fold(1usize, |acc, &d| acc.checked_mul(d));
    match total {
        Some(t) if t <= DENSE_LIMIT => Ok(()),
        _ => Err(Error::UnsupportedTopology(format!(
            "{} graph with {} positions: exact marginals need a tree or a state of at most {DENSE_LIMIT} entries",
            net.quiver().kind().name(),
            net.n_positions()
        ))),
    }
}

/// Exact `I(i, j)` of the model.
pub fn pairwise_mutual_information_model(net: &TensorNetwork, i: usize, j: usize) -> Result<f64> {
    net.check_state_model()?;
    check_pair(net.n_positions(), i, j)?;
    let dims = net.position_dims();
    if net.quiver().is_tree() {
        let pairs = TreePairs::new(net);
        return Ok(mutual_information_of_joint(&pairs.pair(net, i, j), dims[i], dims[j]));
    }
    dense_guard(net)?;
    let ops: Vec<LeafOp> =
        (0..dims.len()).map(|p| if p == i || p == j { LeafOp::Open } else { LeafOp::Identity }).collect();
    let (lo, hi) = (i.min(j), i.max(j));
    Ok(mutual_information_of_joint(&marginal(net, &ops)?, dims[lo], dims[hi]))
}

/// Plug-in estimate with its first-order bias.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DataMutualInformation {
    pub value: f64,
    /// Expected upward bias of the plug-in estimator,
    /// `(K_ij - K_i - K_j + 1) / 2N` with `K` the observed support sizes.
    pub bias: f64,
    pub samples: u64,
}

fn pair_counts(samples: &SampleMultiset, i: usize, j: usize) -> (BTreeMap<(usize, usize), u64>, u64) {
    let mut counts = BTreeMap::new();
    for (s, m) in samples.iter() {
        *counts.entry((s[i], s[j])).or_insert(0) += m;
    }
    (counts, samples.cardinality())
}

fn plug_in(counts: &BTreeMap<(usize, usize), u64>, total: u64) -> (f64, usize, usize, usize) {
    let mut pa: BTreeMap<usize, u64> = BTreeMap::new();
    let mut pb: BTreeMap<usize, u64> = BTreeMap::new();
    for (&(a, b), &c) in counts {
        *pa.entry(a).or_insert(0) += c;
        *pb.entry(b).or_insert(0) += c;
    }
    let n = total as f64;
    let mut mi = 0.0;
    for (&(a, b), &c) in counts {
        if c > 0 {
            let p = c as f64 / n;
            mi += p * (c as f64 * n / (pa[&a] as f64 * pb[&b] as f64)).ln();
        }
    }
    (mi.max(0.0), counts.len(), pa.len(), pb.len())
}

/// Plug-in `I(i, j)` from empirical frequencies.
pub fn pairwise_mutual_information_data(samples: &SampleMultiset, i: usize, j: usize) -> Result<DataMutualInformation> {
    if samples.cardinality() < 2 {
        return arg_err(format!("mutual information needs at least 2 samples, got {}", samples.cardinality()));
    }
    check_pair(samples.n(), i, j)?;
    let (counts, total) = pair_counts(samples, i, j);
    let (value, kij, ki, kj) = plug_in(&counts, total);
    let bias = (kij as f64 - ki as f64 - kj as f64 + 1.0) / (2.0 * total as f64);
    Ok(DataMutualInformation { value, bias, samples: total })
}

/// Mean and standard deviation of the plug-in estimate over `reps`
/// resamples with replacement.
pub fn bootstrap_mutual_information<R: Rng + ?Sized>(
    samples: &SampleMultiset,
    i: usize,
    j: usize,
    reps: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    pairwise_mutual_information_data(samples, i, j)?;
    if reps < 2 {
        return arg_err("bootstrap needs at least 2 resamples");
    }
    let (counts, total) = pair_counts(samples, i, j);
    let cells: Vec<((usize, usize), u64)> = counts.into_iter().collect();
    let mut cumulative = Vec::with_capacity(cells.len());
    let mut acc = 0;
    for (_, c) in &cells {
        acc += c;
        cumulative.push(acc);
    }
    let values: Vec<f64> = (0..reps)
        .map(|_| {
            let mut resampled: BTreeMap<(usize, usize), u64> = BTreeMap::new();
            for _ in 0..total {
                let r = rng.random_range(0..total);
                let k = cumulative.partition_point(|&c| c <= r);
                *resampled.entry(cells[k].0).or_insert(0) += 1;
            }
            plug_in(&resampled, total).0
        })
        .collect();
    let mean = values.iter().sum::<f64>() / reps as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
    Ok((mean, var.sqrt()))
}

/// `I(l)` for `l = 1..=l_max`.
#[derive(Clone, Debug, PartialEq)]
pub struct DecayCurve {
    points: Vec<(usize, f64)>,
}

impl DecayCurve {
    pub fn new(points: Vec<(usize, f64)>) -> Result<Self> {
        if points.windows(2).any(|w| w[0].0 >= w[1].0) {
            return arg_err("curve distances must be strictly increasing");
        }
        if points.iter().any(|&(l, _)| l == 0) {
            return arg_err("curve distances must be positive");
        }
        let mut clipped = Vec::with_capacity(points.len());
        for (l, i) in points {
            if !i.is_finite() || i < -NEGATIVE_SLACK {
                return arg_err(format!("invalid mutual information {i} at distance {l}"));
            }
            clipped.push((l, i.max(0.0)));
        }
        Ok(Self { points: clipped })
    }

    pub fn points(&self) -> &[(usize, f64)] {
        &self.points
    }

    /// Pointwise mean of curves over the same distances.
    pub fn average(curves: &[DecayCurve]) -> Result<Self> {
        let Some(first) = curves.first() else { return arg_err("no curves to average") };
        if curves.iter().any(|c| {
            c.points.len() != first.points.len() || c.points.iter().zip(&first.points).any(|(a, b)| a.0 != b.0)
        }) {
            return arg_err("curves to average must share their distances");
        }
        let k = curves.len() as f64;
        Self::new(
            first
                .points
                .iter()
                .enumerate()
                .map(|(p, &(l, _))| (l, curves.iter().map(|c| c.points[p].1).sum::<f64>() / k))
                .collect(),
        )
    }
}

/// Where pairwise values come from.
#[derive(Clone, Copy, Debug)]
pub enum MiSource<'a> {
    Model(&'a TensorNetwork),
    Samples(&'a SampleMultiset),
}

/// Average `I` over all pairs `(p, p + l)` for each `l <= l_max`.
pub fn decay_curve(source: MiSource<'_>, l_max: usize) -> Result<DecayCurve> {
    let n = match source {
        MiSource::Model(net) => net.n_positions(),
        MiSource::Samples(s) => s.n(),
    };
    if l_max >= n || l_max == 0 {
        return arg_err(format!("l_max = {l_max} must lie in 1..{n}"));
    }
    let pair_value: Box<dyn Fn(usize, usize) -> Result<f64> + Sync> = match source {
        MiSource::Model(net) => {
            net.check_state_model()?;
            let dims = net.position_dims();
            if net.quiver().is_tree() {
                let pairs = TreePairs::new(net);
                Box::new(move |i, j| Ok(mutual_information_of_joint(&pairs.pair(net, i, j), dims[i], dims[j])))
            } else {
                dense_guard(net)?;
                let psi = crate::network::state(net)?;
                Box::new(move |i, j| {
                    let ops: Vec<LeafOp> = (0..dims.len())
                        .map(|p| if p == i || p == j { LeafOp::Open } else { LeafOp::Identity })
                        .collect();
                    let joint = crate::marginals::marginal_of_state(psi.data(), &dims, &ops);
                    Ok(mutual_information_of_joint(&joint, dims[i], dims[j]))
                })
            }
        }
        MiSource::Samples(s) => {
            if s.cardinality() < 2 {
                return arg_err("mutual information needs at least 2 samples");
            }
            Box::new(move |i, j| Ok(pairwise_mutual_information_data(s, i, j)?.value))
        }
    };
    let values: Vec<Result<f64>> = (1..=l_max)
        .into_par_iter()
        .map(|l| {
            let mut total = 0.0;
            for p in 0..n - l {
                total += pair_value(p, p + l)?;
            }
            Ok(total / (n - l) as f64)
        })
        .collect();
    let points = (1..=l_max).zip(values).map(|(l, v)| v.map(|v| (l, v))).collect::<Result<Vec<_>>>()?;
    DecayCurve::new(points)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DecayKind {
    Power,
    Exponential,
}

impl DecayKind {
    pub fn name(self) -> &'static str {
        match self {
            DecayKind::Power => "power",
            DecayKind::Exponential => "exponential",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DecayParams {
    /// `c1 l^-alpha + c2`
    Power { c1: f64, alpha: f64, c2: f64 },
    /// `c exp(-m l)`
    Exponential { c: f64, m: f64 },
}

impl DecayParams {
    pub fn eval(&self, l: f64) -> f64 {
        match *self {
            DecayParams::Power { c1, alpha, c2 } => c1 * l.powf(-alpha) + c2,
            DecayParams::Exponential { c, m } => c * (-m * l).exp(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayFit {
    pub kind: DecayKind,
    pub params: DecayParams,
    /// Sum of squared residuals of `log I`.
    pub residual: f64,
    /// `1 - SS_res / SS_tot` in `log I`.
    pub r_squared: f64,
    /// Why the fit cannot be trusted, if it cannot.
    pub degenerate: Option<String>,
}

impl DecayFit {
    pub fn is_degenerate(&self) -> bool {
        self.degenerate.is_some()
    }

    fn failed(kind: DecayKind, reason: String) -> Self {
        let params = match kind {
            DecayKind::Power => DecayParams::Power { c1: f64::NAN, alpha: f64::NAN, c2: f64::NAN },
            DecayKind::Exponential => DecayParams::Exponential { c: f64::NAN, m: f64::NAN },
        };
        Self { kind, params, residual: f64::NAN, r_squared: f64::NAN, degenerate: Some(reason) }
    }
}

/// Ordinary least squares `y = a + b x`; returns `(a, b)`.
fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let b = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    (my - b * mx, b)
}

fn log_residual(ls: &[f64], log_i: &[f64], params: &DecayParams) -> f64 {
    ls.iter()
        .zip(log_i)
        .map(|(&l, &y)| {
            let m = params.eval(l);
            if m > 0.0 {
                (y - m.ln()).powi(2)
            } else {
                f64::INFINITY
            }
        })
        .sum()
}

fn power_at(c2: f64, ls: &[f64], is: &[f64], log_i: &[f64]) -> (DecayParams, f64) {
    let x: Vec<f64> = ls.iter().map(|l| l.ln()).collect();
    let y: Vec<f64> = is.iter().map(|i| (i - c2).ln()).collect();
    let (a, b) = linear_fit(&x, &y);
    let params = DecayParams::Power { c1: a.exp(), alpha: -b, c2 };
    (params, log_residual(ls, log_i, &params))
}

/// Least-squares fit of `kind` to the points of `curve` above [`FIT_FLOOR`].
///
/// For the power law, `c2` is profiled over 100 grid points on `[0, min I)`,
/// the best grid cell is refined by golden-section search, and `(c1, alpha)`
/// come from the linear fit of `log(I - c2)` against `log l`.
pub fn fit_decay(curve: &DecayCurve, kind: DecayKind) -> Result<DecayFit> {
    let usable: Vec<(f64, f64)> =
        curve.points().iter().filter(|&&(_, i)| i > FIT_FLOOR).map(|&(l, i)| (l as f64, i)).collect();
    if usable.len() < 3 {
        return Err(Error::Fit(format!("{} points above {FIT_FLOOR:e}; at least 3 are needed", usable.len())));
    }
    let ls: Vec<f64> = usable.iter().map(|p| p.0).collect();
    let is: Vec<f64> = usable.iter().map(|p| p.1).collect();
    let log_i: Vec<f64> = is.iter().map(|i| i.ln()).collect();
    let mean = log_i.iter().sum::<f64>() / log_i.len() as f64;
    let ss_tot: f64 = log_i.iter().map(|y| (y - mean).powi(2)).sum();

    let (params, residual) = match kind {
        DecayKind::Exponential => {
            let (a, b) = linear_fit(&ls, &log_i);
            let params = DecayParams::Exponential { c: a.exp(), m: -b };
            (params, log_residual(&ls, &log_i, &params))
        }
        DecayKind::Power => {
            let min_i = is.iter().copied().fold(f64::INFINITY, f64::min);
            const GRID: usize = 100;
            let step = min_i / GRID as f64;
            let (best, _) = (0..GRID)
                .map(|k| (k, power_at(k as f64 * step, &ls, &is, &log_i).1))
                .fold((0, f64::INFINITY), |acc, (k, r)| if r < acc.1 { (k, r) } else { acc });
            let lo = best.saturating_sub(1) as f64 * step;
            let hi = ((best + 1) as f64 * step).min(min_i * (1.0 - 1e-12));
            let c2 = golden_section(lo, hi, |c| power_at(c, &ls, &is, &log_i).1);
            let candidates = [power_at(c2, &ls, &is, &log_i), power_at(best as f64 * step, &ls, &is, &log_i)];
            if candidates[0].1 <= candidates[1].1 {
                candidates[0]
            } else {
                candidates[1]
            }
        }
    };
    let r_squared = if ss_tot > 0.0 { 1.0 - residual / ss_tot } else { f64::NAN };
    let rate = match params {
        DecayParams::Power { alpha, .. } => alpha,
        DecayParams::Exponential { m, .. } => m,
    };
    let degenerate = if !(ss_tot > 1e-24) {
        Some("curve is constant in log space; the decay rate is unidentifiable".to_string())
    } else if !(rate > 1e-9) || !rate.is_finite() {
        Some(format!("fitted decay rate {rate:e} is not positive"))
    } else if !residual.is_finite() {
        Some("residual is not finite".to_string())
    } else {
        None
    };
    Ok(DecayFit { kind, params, residual, r_squared, degenerate })
}

/// [`fit_decay`] with fitting failures reported as degenerate fits.
pub fn fit_or_degenerate(curve: &DecayCurve, kind: DecayKind) -> DecayFit {
    fit_decay(curve, kind).unwrap_or_else(|e| DecayFit::failed(kind, e.to_string()))
}

fn golden_section(mut a: f64, mut b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - ratio * (b - a);
    let mut d = a + ratio * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..100 {
        if (b - a).abs() <= 1e-15 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - ratio * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + ratio * (b - a);
            fd = f(d);
        }
    }
    (a + b) / 2.0
}

/// One model's curve, both fits and the preferred form.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelDecay {
    pub label: String,
    pub curve: DecayCurve,
    pub power: DecayFit,
    pub exponential: DecayFit,
}

impl ModelDecay {
    pub fn from_curve(label: impl Into<String>, curve: DecayCurve) -> Self {
        let power = fit_or_degenerate(&curve, DecayKind::Power);
        let exponential = fit_or_degenerate(&curve, DecayKind::Exponential);
        Self { label: label.into(), curve, power, exponential }
    }

    /// `r2(exponential) - r2(power)`; positive favours exponential decay.
    pub fn exponential_advantage(&self) -> f64 {
        self.exponential.r_squared - self.power.r_squared
    }

    /// The form with the higher `r^2`, when both fits are usable.
    pub fn better(&self) -> Option<DecayKind> {
        if self.power.is_degenerate() || self.exponential.is_degenerate() {
            return None;
        }
        Some(if self.exponential_advantage() > 0.0 { DecayKind::Exponential } else { DecayKind::Power })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayComparison {
    pub models: Vec<ModelDecay>,
}

impl DecayComparison {
    /// Plain-text table of curves and fits.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:>4}", "l");
        for m in &self.models {
            let _ = write!(out, "  {:>14}", m.label);
        }
        out.push('\n');
        let len = self.models.iter().map(|m| m.curve.points().len()).max().unwrap_or(0);
        for k in 0..len {
            let l = self.models.iter().find_map(|m| m.curve.points().get(k).map(|p| p.0)).unwrap_or(0);
            let _ = write!(out, "{l:>4}");
            for m in &self.models {
                match m.curve.points().get(k) {
                    Some(&(_, i)) => {
                        let _ = write!(out, "  {i:>14.6e}");
                    }
                    None => {
                        let _ = write!(out, "  {:>14}", "");
                    }
                }
            }
            out.push('\n');
        }
        out.push('\n');
        for m in &self.models {
            for fit in [&m.power, &m.exponential] {
                let _ = writeln!(out, "{} {:<11} {}", m.label, fit.kind.name(), describe_fit(fit));
            }
            let verdict = m.better().map_or("undetermined", DecayKind::name);
            let _ = writeln!(
                out,
                "{} better fit: {verdict} (exponential r2 - power r2 = {:.6})",
                m.label,
                m.exponential_advantage()
            );
        }
        out
    }

    /// `key=value` lines for machine reading.
    pub fn to_key_values(&self) -> String {
        let mut out = String::new();
        for m in &self.models {
            let p = &m.label;
            let values: Vec<String> = m.curve.points().iter().map(|(_, i)| format!("{i:e}")).collect();
            let _ = writeln!(out, "{p}.lmax={}", m.curve.points().last().map_or(0, |x| x.0));
            let _ = writeln!(out, "{p}.curve={}", values.join(","));
            for fit in [&m.power, &m.exponential] {
                let k = format!("{p}.{}", fit.kind.name());
                match fit.params {
                    DecayParams::Power { c1, alpha, c2 } => {
                        let _ = writeln!(out, "{k}.c1={c1:e}\n{k}.alpha={alpha:e}\n{k}.c2={c2:e}");
                    }
                    DecayParams::Exponential { c, m } => {
                        let _ = writeln!(out, "{k}.c={c:e}\n{k}.m={m:e}");
                    }
                }
                let _ = writeln!(out, "{k}.residual={:e}\n{k}.r_squared={:e}", fit.residual, fit.r_squared);
                let _ = writeln!(out, "{k}.degenerate={}", fit.degenerate.is_some());
            }
            let _ = writeln!(out, "{p}.delta_r_squared={:e}", m.exponential_advantage());
            let _ = writeln!(out, "{p}.better={}", m.better().map_or("undetermined", DecayKind::name));
        }
        out
    }
}

fn describe_fit(fit: &DecayFit) -> String {
    let params = match fit.params {
        DecayParams::Power { c1, alpha, c2 } => format!("c1={c1:.6e} alpha={alpha:.6} c2={c2:.6e}"),
        DecayParams::Exponential { c, m } => format!("c={c:.6e} m={m:.6}"),
    };
    match &fit.degenerate {
        Some(reason) => format!("{params} r2={:.6} DEGENERATE: {reason}", fit.r_squared),
        None => format!("{params} r2={:.6}", fit.r_squared),
    }
}

/// Curves and fits of two models of equal length and alphabet.
pub fn compare_decay(net_a: &TensorNetwork, net_b: &TensorNetwork, l_max: usize) -> Result<DecayComparison> {
    if net_a.position_dims() != net_b.position_dims() {
        return arg_err(format!(
            "models differ in positions or alphabets: {:?} vs {:?}",
            net_a.position_dims(),
            net_b.position_dims()
        ));
    }
    let a = decay_curve(MiSource::Model(net_a), l_max)?;
    let b = decay_curve(MiSource::Model(net_b), l_max)?;
    Ok(DecayComparison {
        models: vec![
            ModelDecay::from_curve(net_a.quiver().kind().name(), a),
            ModelDecay::from_curve(net_b.quiver().kind().name(), b),
        ],
    })
}

/// Mean curve over `draws` networks produced by `make(k)`, `k = 0..draws`.
pub fn ensemble_decay_curve<F>(draws: usize, l_max: usize, make: F) -> Result<DecayCurve>
where
    F: Fn(usize) -> Result<TensorNetwork> + Sync,
{
    if draws == 0 {
        return arg_err("ensemble needs at least one draw");
    }
    let curves: Vec<Result<DecayCurve>> =
        (0..draws).into_par_iter().map(|k| decay_curve(MiSource::Model(&make(k)?), l_max)).collect();
    DecayCurve::average(&curves.into_iter().collect::<Result<Vec<_>>>()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_binary_tree, build_chain, build_mera, QuiverBuilder};
    use crate::network::{default_edge_dims, enumerate_sequences, state};
    use crate::tensor::DenseTensor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random(q: crate::Quiver, cap: usize, seed: u64) -> TensorNetwork {
        let dims = default_edge_dims(&q, 2, &[cap]).unwrap();
        TensorNetwork::random(q, dims, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
    }

    /// Chain whose sites are joined by dimension-1 bonds.
    fn product_state(n: usize) -> TensorNetwork {
        let q = build_chain(n).unwrap();
        let dims: Vec<usize> =
            (0..q.n_edges()).map(|e| if q.edge(e).kind == crate::graph::EdgeKind::Out { 2 } else { 1 }).collect();
        TensorNetwork::random(q, dims, &mut ChaCha20Rng::seed_from_u64(1)).unwrap()
    }

    fn bell() -> TensorNetwork {
        let mut b = QuiverBuilder::new();
        let v = b.add_vertex();
        b.add_in_edge(v);
        b.add_out_edge(v);
        b.add_out_edge(v);
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let t = DenseTensor::from_real(vec![2, 2, 1], &[h, 0.0, 0.0, h]).unwrap();
        TensorNetwork::new(b.build().unwrap(), vec![1, 2, 2], vec![t]).unwrap()
    }

    fn brute_mi(net: &TensorNetwork, i: usize, j: usize) -> f64 {
        let psi = state(net).unwrap();
        let dims = net.position_dims();
        let mut joint = vec![0.0; dims[i] * dims[j]];
        for (s, a) in enumerate_sequences(&dims).iter().zip(psi.data()) {
            joint[s.symbols[i] * dims[j] + s.symbols[j]] += a.norm_sqr();
        }
        let pi: Vec<f64> = (0..dims[i]).map(|a| (0..dims[j]).map(|b| joint[a * dims[j] + b]).sum()).collect();
        let pj: Vec<f64> = (0..dims[j]).map(|b| (0..dims[i]).map(|a| joint[a * dims[j] + b]).sum()).collect();
        let mut mi = 0.0;
        for a in 0..dims[i] {
            for b in 0..dims[j] {
                let p = joint[a * dims[j] + b];
                if p > 0.0 {
                    mi += p * (p / (pi[a] * pj[b])).ln();
                }
            }
        }
        mi
    }

    #[test]
    fn model_mi_examples() {
        let prod = product_state(4);
        for i in 0..4 {
            for j in 0..4 {
                if i != j {
                    assert!(pairwise_mutual_information_model(&prod, i, j).unwrap() < 1e-12);
                }
            }
        }
        assert!((pairwise_mutual_information_model(&bell(), 0, 1).unwrap() - 2f64.ln()).abs() < 1e-14);
        assert!(pairwise_mutual_information_model(&bell(), 1, 1).is_err());
        assert!(pairwise_mutual_information_model(&bell(), 0, 2).is_err());
    }

    #[test]
    fn model_mi_matches_enumeration() {
        for net in [
            random(build_binary_tree(8).unwrap(), 4, 2),
            random(build_chain(8).unwrap(), 4, 3),
            random(build_mera(8).unwrap(), 4, 4),
        ] {
            for i in 0..8 {
                for j in 0..8 {
                    if i != j {
                        let fast = pairwise_mutual_information_model(&net, i, j).unwrap();
                        assert!((fast - brute_mi(&net, i, j)).abs() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn data_mi_examples() {
        let same = SampleMultiset::from_sequences(3, vec![vec![1, 0, 1]; 10]).unwrap();
        assert_eq!(pairwise_mutual_information_data(&same, 0, 2).unwrap().value, 0.0);
        assert!(pairwise_mutual_information_data(&SampleMultiset::new(3).unwrap(), 0, 1).is_err());

        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut s = SampleMultiset::new(2).unwrap();
        for _ in 0..100_000 {
            s.add(vec![rng.random_range(0..2), rng.random_range(0..2)], 1).unwrap();
        }
        let est = pairwise_mutual_information_data(&s, 0, 1).unwrap();
        assert!(est.value < 1e-3);
        assert!((est.bias - 1.0 / 200_000.0).abs() < 1e-12);
    }

    #[test]
    fn data_mi_within_bootstrap_band_of_known_joint() {
        // p(0,0)=0.4, p(0,1)=0.1, p(1,0)=0.1, p(1,1)=0.4
        let joint = [0.4, 0.1, 0.1, 0.4];
        let exact = mutual_information_of_joint(&joint, 2, 2);
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let mut s = SampleMultiset::new(2).unwrap();
        for _ in 0..20_000 {
            let u: f64 = rng.random();
            let cell = if u < 0.4 {
                0
            } else if u < 0.5 {
                1
            } else if u < 0.6 {
                2
            } else {
                3
            };
            s.add(vec![cell / 2, cell % 2], 1).unwrap();
        }
        let est = pairwise_mutual_information_data(&s, 0, 1).unwrap().value;
        let (_, sd) = bootstrap_mutual_information(&s, 0, 1, 200, &mut rng).unwrap();
        assert!((est - exact).abs() < 3.0 * sd, "est {est} exact {exact} sd {sd}");
    }

    #[test]
    fn curve_examples() {
        let prod = product_state(8);
        let c = decay_curve(MiSource::Model(&prod), 7).unwrap();
        assert!(c.points().iter().all(|&(_, i)| i < 1e-12));
        assert!(decay_curve(MiSource::Model(&prod), 8).is_err());

        let chain = random(build_chain(32).unwrap(), 4, 7);
        let c = decay_curve(MiSource::Model(&chain), 31).unwrap();
        assert_eq!(c.points().len(), 31);
        let tree = random(build_binary_tree(32).unwrap(), 8, 8);
        let c = decay_curve(MiSource::Model(&tree), 31).unwrap();
        assert!(c.points().iter().all(|&(_, i)| i >= 0.0 && i.is_finite()));
    }

    #[test]
    fn curve_averages_all_pairs() {
        let net = random(build_binary_tree(8).unwrap(), 4, 9);
        let c = decay_curve(MiSource::Model(&net), 3).unwrap();
        let l3: f64 = (0..5).map(|p| brute_mi(&net, p, p + 3)).sum::<f64>() / 5.0;
        assert!((c.points()[2].1 - l3).abs() < 1e-10);
    }

    fn synthetic(f: impl Fn(f64) -> f64, n: usize) -> DecayCurve {
        DecayCurve::new((1..=n).map(|l| (l, f(l as f64))).collect()).unwrap()
    }

    #[test]
    fn power_fit_round_trip() {
        let curve = synthetic(|l| 2.0 * l.powf(-0.37) + 0.01, 50);
        let fit = fit_decay(&curve, DecayKind::Power).unwrap();
        let DecayParams::Power { c1, alpha, c2 } = fit.params else { panic!() };
        assert!((alpha - 0.37).abs() < 0.01 * 0.37, "{alpha}");
        assert!((c1 - 2.0).abs() < 0.02 && (c2 - 0.01).abs() < 1e-3, "{c1} {c2}");
        assert!(fit.degenerate.is_none());
    }

    #[test]
    fn exponential_fit_round_trip_beats_power() {
        let curve = synthetic(|l| (-0.5 * l).exp(), 30);
        let exp = fit_decay(&curve, DecayKind::Exponential).unwrap();
        let DecayParams::Exponential { c, m } = exp.params else { panic!() };
        assert!((m - 0.5).abs() < 0.005 && (c - 1.0).abs() < 0.01);
        let pow = fit_decay(&curve, DecayKind::Power).unwrap();
        assert!(exp.r_squared > pow.r_squared);
    }

    #[test]
    fn degenerate_fits_are_flagged() {
        let flat = synthetic(|_| 0.3, 10);
        assert!(fit_decay(&flat, DecayKind::Power).unwrap().is_degenerate());
        let zero = synthetic(|_| 0.0, 10);
        assert!(matches!(fit_decay(&zero, DecayKind::Exponential), Err(Error::Fit(_))));
        assert!(fit_or_degenerate(&zero, DecayKind::Power).is_degenerate());
    }

    #[test]
    fn comparison_examples() {
        let net = random(build_binary_tree(8).unwrap(), 4, 10);
        let report = compare_decay(&net, &net, 6).unwrap();
        assert_eq!(report.models[0].curve, report.models[1].curve);

        let prod = product_state(8);
        let report = compare_decay(&prod, &prod, 6).unwrap();
        assert!(report.models.iter().all(|m| m.power.is_degenerate() && m.exponential.is_degenerate()));
        assert!(report.to_key_values().contains("chain.better=undetermined"));

        let other = random(build_binary_tree(4).unwrap(), 4, 11);
        assert!(compare_decay(&net, &other, 3).is_err());
    }

    #[test]
    fn ensemble_average_is_pointwise_mean() {
        let make = |k: usize| Ok(random(build_chain(6).unwrap(), 2, 100 + k as u64));
        let avg = ensemble_decay_curve(3, 4, make).unwrap();
        let curves: Vec<DecayCurve> =
            (0..3).map(|k| decay_curve(MiSource::Model(&make(k).unwrap()), 4).unwrap()).collect();
        for p in 0..4 {
            let mean = curves.iter().map(|c| c.points()[p].1).sum::<f64>() / 3.0;
            assert!((avg.points()[p].1 - mean).abs() < 1e-15);
        }
    }
}

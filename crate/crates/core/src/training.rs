//! Maximum-likelihood training by Riemannian descent on the isometry manifold.
//!
//! Gradients follow the Wirtinger convention: for the real objective
//! `F = -2 Re log A`, the array returned per vertex is `dF/d conj(U)`, so a
//! real variation `xi` changes `F` by `2 Re <G, xi>` to first order.

use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::error::{arg_err, Error, Result};
use crate::graph::{topological_layers, EdgeKind, VertexId};
use crate::manifold::{retract, tangent_project, TangentVector, VertexArrays};
use crate::model::SampleMultiset;
use crate::network::{tree_messages, vertex_labeled, Labeled, SequenceState, TensorNetwork};
use crate::rng::{stream, Stream};
use crate::tensor::DenseTensor;
use crate::C64;

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const ONE: C64 = C64 { re: 1.0, im: 0.0 };

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub shuffle: bool,
    /// Checkpoint callback period in steps; 0 disables checkpoints.
    pub checkpoint_every: usize,
    pub isometry_tol: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            steps: 1000,
            batch_size: 16,
            seed: 0,
            shuffle: true,
            checkpoint_every: 0,
            isometry_tol: 1e-8,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) || !self.learning_rate.is_finite() {
            return arg_err(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return arg_err("batch size must be at least 1");
        }
        if !(self.isometry_tol > 0.0) {
            return arg_err(format!("isometry tolerance must be positive, got {}", self.isometry_tol));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord {
    /// Number of completed steps.
    pub step: usize,
    /// `F(u|S) / |S|` over the full training set after this step.
    pub loss: f64,
    pub wall_seconds: f64,
    pub max_isometry_violation: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossTrace {
    pub records: Vec<TraceRecord>,
}

impl LossTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn losses(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.loss).collect()
    }

    /// CSV with header `step,loss,max_isometry_violation`. Wall time is left
    /// out so that equal runs give equal files.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,loss,max_isometry_violation\n");
        for r in &self.records {
            out.push_str(&format!("{},{:e},{:e}\n", r.step, r.loss, r.max_isometry_violation));
        }
        out
    }
}

/// `dF/d conj(U_v)` for `F = -2 Re log <s|Psi>`, one array per vertex.
///
/// Trees use one upward and one downward sweep of vector messages. Other
/// graphs contract prefix and suffix products of the network in topological
/// order and join them around each vertex.
pub fn gradient(net: &TensorNetwork, s: &SequenceState) -> Result<VertexArrays> {
    net.check_state_model()?;
    net.check_sequence(s)?;
    let (amp, env) = if net.quiver().is_tree() { tree_environments(net, s) } else { dag_environments(net, s)? };
    if amp.norm() == 0.0 {
        return Err(Error::SingularGradient { sequence: s.symbols.clone() });
    }
    let scale = -amp.inv();
    Ok(env
        .into_iter()
        .map(|t| {
            let data = t.data().iter().map(|&z| (z * scale).conj()).collect();
            DenseTensor::from_parts(t.shape().to_vec(), data)
        })
        .collect())
}

/// `F(u|s)` together with its gradient.
pub fn value_and_gradient(net: &TensorNetwork, s: &SequenceState) -> Result<(f64, VertexArrays)> {
    let g = gradient(net, s)?;
    let amp = crate::network::amplitude(net, s)?;
    Ok((-2.0 * amp.ln().re, g))
}

/// `dF` along `xi`: `2 Re <G, xi>`.
pub fn directional_derivative(net: &TensorNetwork, s: &SequenceState, xi: &[DenseTensor]) -> Result<f64> {
    let g = gradient(net, s)?;
    if xi.len() != g.len() {
        return arg_err(format!("{} direction arrays for {} vertices", xi.len(), g.len()));
    }
    let mut total = 0.0;
    for (a, b) in g.iter().zip(xi) {
        total += 2.0 * a.inner(b)?.re;
    }
    Ok(total)
}

/// Amplitude and `dA/dU_v` for a tree.
fn tree_environments(net: &TensorNetwork, s: &SequenceState) -> (C64, Vec<DenseTensor>) {
    let q = net.quiver();
    let msgs = tree_messages(net, s);
    let mut down: Vec<Vec<C64>> = vec![Vec::new(); q.n_edges()];
    down[q.in_edges()[0]] = vec![ONE];
    let layering = topological_layers(q).expect("validated quiver");
    let mut env = vec![DenseTensor::scalar(ZERO); q.n_vertices()];
    for &v in layering.layers.iter().flatten() {
        let shape = net.vertex_shape(v);
        let outs = q.outgoing(v);
        let d_in = &down[q.incoming(v)[0]];
        let vectors: Vec<&[C64]> = outs.iter().map(|&e| msgs.up[e].as_slice()).collect();

        // W[o..] = sum_i T[o.., i] down[i]
        let d = *shape.last().expect("vertex has an in axis");
        let w: Vec<C64> =
            net.tensor(v).data().chunks(d).map(|row| row.iter().zip(d_in).map(|(a, b)| a * b).sum()).collect();
        let out_shape = &shape[..shape.len() - 1];
        let child_down = contract_all_but_one(&w, out_shape, &vectors);

        let mut factors: Vec<&[C64]> = vectors.clone();
        factors.push(d_in);
        env[v] = DenseTensor::from_parts(shape.clone(), outer_all(&factors));
        for (k, &e) in outs.iter().enumerate() {
            if q.edge(e).kind == EdgeKind::Internal {
                down[e] = child_down[k].clone();
            }
        }
    }
    (msgs.amplitude, env)
}

/// For each axis `k`, contract every other axis of `w` with its vector.
fn contract_all_but_one(w: &[C64], shape: &[usize], vectors: &[&[C64]]) -> Vec<Vec<C64>> {
    let mut out: Vec<Vec<C64>> = shape.iter().map(|&d| vec![ZERO; d]).collect();
    let mut idx = vec![0usize; shape.len()];
    for &x in w {
        if x != ZERO {
            for k in 0..shape.len() {
                let mut c = x;
                for (l, vec) in vectors.iter().enumerate() {
                    if l != k {
                        c *= vec[idx[l]];
                    }
                }
                out[k][idx[k]] += c;
            }
        }
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < shape[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

fn outer_all(factors: &[&[C64]]) -> Vec<C64> {
    let mut acc = vec![ONE];
    for f in factors {
        acc = acc.iter().flat_map(|&a| f.iter().map(move |&b| a * b)).collect();
    }
    acc
}

/// Amplitude and `dA/dU_v` for a general DAG.
fn dag_environments(net: &TensorNetwork, s: &SequenceState) -> Result<(C64, Vec<DenseTensor>)> {
    let q = net.quiver();
    let layering = topological_layers(q)?;
    let order: Vec<VertexId> = layering.layers.iter().flatten().copied().collect();
    let position: Vec<usize> = {
        let mut p = vec![0; q.n_edges()];
        for (k, &e) in q.out_edges().iter().enumerate() {
            p[e] = k;
        }
        p
    };
    // Boundary vectors: <s_k| on out edges, 1 on in edges.
    let boundary = |v: VertexId| -> Result<Labeled> {
        let mut acc = Labeled::unit();
        for &e in q.outgoing(v).iter().chain(q.incoming(v)) {
            let d = net.edge_dim(e);
            let vec = match q.edge(e).kind {
                EdgeKind::Out => {
                    let mut b = vec![ZERO; d];
                    b[s.symbols[position[e]]] = ONE;
                    b
                }
                EdgeKind::In => vec![ONE; d],
                EdgeKind::Internal => continue,
            };
            acc = acc.join(&Labeled { tensor: DenseTensor::from_parts(vec![d], vec), labels: vec![e] })?;
        }
        Ok(acc)
    };
    let pieces: Vec<Labeled> =
        order.iter().map(|&v| vertex_labeled(net, v).join(&boundary(v)?)).collect::<Result<_>>()?;
    let n = pieces.len();
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(Labeled::unit());
    for p in &pieces {
        let next = prefix.last().expect("nonempty").join(p)?;
        prefix.push(next);
    }
    let mut suffix = vec![Labeled::unit(); n + 1];
    for k in (0..n).rev() {
        suffix[k] = pieces[k].join(&suffix[k + 1])?;
    }
    let amp = prefix[n].tensor.data()[0];
    let mut env = vec![DenseTensor::scalar(ZERO); q.n_vertices()];
    for (k, &v) in order.iter().enumerate() {
        let around = prefix[k].join(&suffix[k + 1])?.join(&boundary(v)?)?;
        let axes: Vec<_> = q.outgoing(v).iter().chain(q.incoming(v)).copied().collect();
        env[v] = around.arranged(&axes)?;
    }
    Ok((amp, env))
}

/// Multiplicity-weighted mean gradient and mean `F` over a batch, summed in
/// batch order.
pub fn batch_gradient(net: &TensorNetwork, batch: &[(SequenceState, u64)]) -> Result<(f64, VertexArrays)> {
    if batch.is_empty() {
        return arg_err("empty batch");
    }
    let parts: Vec<Result<(f64, VertexArrays)>> = batch.par_iter().map(|(s, _)| value_and_gradient(net, s)).collect();
    let total: u64 = batch.iter().map(|(_, m)| m).sum();
    if total == 0 {
        return arg_err("batch multiplicities sum to zero");
    }
    let mut acc: Vec<Vec<C64>> = net.tensors().iter().map(|t| vec![ZERO; t.len()]).collect();
    let mut loss = 0.0;
    for ((_, m), part) in batch.iter().zip(parts) {
        let (f, g) = part?;
        let w = *m as f64;
        loss += w * f;
        for (a, t) in acc.iter_mut().zip(&g) {
            for (x, y) in a.iter_mut().zip(t.data()) {
                *x += y * w;
            }
        }
    }
    let inv = 1.0 / total as f64;
    let mean = acc
        .into_iter()
        .enumerate()
        .map(|(v, a)| DenseTensor::from_parts(net.vertex_shape(v), a.into_iter().map(|z| z * inv).collect()))
        .collect();
    Ok((loss * inv, mean))
}

/// `retract(net, tangent_project(net, -mean gradient), eta)`.
pub fn sgd_step(net: &TensorNetwork, batch: &[(SequenceState, u64)], eta: f64) -> Result<TensorNetwork> {
    let (_, g) = batch_gradient(net, batch)?;
    descend(net, &g, eta)
}

fn descend(net: &TensorNetwork, g: &[DenseTensor], eta: f64) -> Result<TensorNetwork> {
    let neg: Vec<DenseTensor> = g.iter().map(|t| t.scale(C64::new(-1.0, 0.0))).collect();
    let xi: TangentVector = tangent_project(net, &neg)?;
    retract(net, &xi, eta)
}

/// Mean per-sequence objective `F(u|S) / |S|`.
pub fn mean_loss(net: &TensorNetwork, samples: &SampleMultiset) -> Result<f64> {
    Ok(crate::model::log_likelihood(net, samples)? / samples.cardinality() as f64)
}

/// Train without checkpoints.
pub fn train(net: &TensorNetwork, samples: &SampleMultiset, cfg: &TrainConfig) -> Result<(TensorNetwork, LossTrace)> {
    train_with_checkpoints(net, samples, cfg, |_, _| Ok(()))
}

/// Mini-batch descent over the multiset, each sequence repeated by its
/// multiplicity. Batches are consecutive slices of an epoch order that is
/// reshuffled from the seed's shuffle stream at every epoch when
/// `cfg.shuffle` is set. `checkpoint(step, net)` runs every
/// `cfg.checkpoint_every` steps.
pub fn train_with_checkpoints<F>(
    net: &TensorNetwork,
    samples: &SampleMultiset,
    cfg: &TrainConfig,
    mut checkpoint: F,
) -> Result<(TensorNetwork, LossTrace)>
where
    F: FnMut(usize, &TensorNetwork) -> Result<()>,
{
    cfg.validate()?;
    net.check_state_model()?;
    samples.check_against(net)?;
    if samples.is_empty() {
        return Err(Error::EmptyMultiset("no training sequences".into()));
    }
    let mut current = net.clone();
    let mut trace = LossTrace::default();
    if cfg.steps == 0 {
        return Ok((current, trace));
    }

    let items: Vec<&Vec<usize>> = samples.iter().flat_map(|(s, m)| std::iter::repeat_n(s, m as usize)).collect();
    let mut order: Vec<usize> = (0..items.len()).collect();
    let mut rng = stream(cfg.seed, Stream::Shuffle);
    let mut cursor = order.len();
    let start = Instant::now();

    for step in 1..=cfg.steps {
        let mut picked: Vec<usize> = Vec::with_capacity(cfg.batch_size);
        while picked.len() < cfg.batch_size.min(items.len()) {
            if cursor == order.len() {
                if cfg.shuffle {
                    order.shuffle(&mut rng);
                }
                cursor = 0;
            }
            picked.push(order[cursor]);
            cursor += 1;
        }
        let batch = group(&items, &picked);
        let (_, g) = batch_gradient(&current, &batch)?;
        current = descend(&current, &g, cfg.learning_rate)?;

        let violation = current.max_isometry_violation();
        if violation > cfg.isometry_tol {
            return Err(Error::Precondition(format!(
                "isometry violation {violation:e} exceeds tolerance {:e} after step {step}",
                cfg.isometry_tol
            )));
        }
        trace.records.push(TraceRecord {
            step,
            loss: mean_loss(&current, samples)?,
            wall_seconds: start.elapsed().as_secs_f64(),
            max_isometry_violation: violation,
        });
        if cfg.checkpoint_every > 0 && step % cfg.checkpoint_every == 0 {
            checkpoint(step, &current)?;
        }
    }
    Ok((current, trace))
}

/// Merge repeated sequences of a batch, keeping first-occurrence order.
fn group(items: &[&Vec<usize>], picked: &[usize]) -> Vec<(SequenceState, u64)> {
    let mut out: Vec<(SequenceState, u64)> = Vec::new();
    for &i in picked {
        match out.iter_mut().find(|(s, _)| &s.symbols == items[i]) {
            Some((_, m)) => *m += 1,
            None => out.push((SequenceState::new(items[i].clone()), 1)),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_binary_tree, build_chain, build_mera, QuiverBuilder};
    use crate::manifold::{apply_gauge, random_gauge};
    use crate::model::log_likelihood;
    use crate::network::{amplitude, default_edge_dims};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn random_net(q: crate::Quiver, seed: u64) -> TensorNetwork {
        let dims = default_edge_dims(&q, 2, &[4]).unwrap();
        TensorNetwork::random(q, dims, &mut rng(seed)).unwrap()
    }

    fn random_seq(n: usize, r: &mut ChaCha20Rng) -> SequenceState {
        SequenceState::new((0..n).map(|_| r.random_range(0..2)).collect())
    }

    fn loss(net: &TensorNetwork, s: &SequenceState) -> f64 {
        -2.0 * amplitude(net, s).unwrap().ln().re
    }

    fn random_direction(net: &TensorNetwork, r: &mut ChaCha20Rng) -> TangentVector {
        let g: Vec<DenseTensor> = (0..net.quiver().n_vertices())
            .map(|v| {
                let shape = net.vertex_shape(v);
                let len = shape.iter().product();
                DenseTensor::new(
                    shape,
                    (0..len).map(|_| C64::new(r.sample(StandardNormal), r.sample(StandardNormal))).collect(),
                )
                .unwrap()
            })
            .collect();
        tangent_project(net, &g).unwrap()
    }

    /// Central difference along the straight line `U + t xi`; `F` extends to
    /// non-isometric tensors, and the line is tangent at `t = 0`.
    fn finite_difference(net: &TensorNetwork, s: &SequenceState, xi: &[DenseTensor], h: f64) -> f64 {
        let shifted = |t: f64| {
            let tensors =
                net.tensors().iter().zip(xi).map(|(u, x)| u.add(&x.scale(C64::new(t, 0.0))).unwrap()).collect();
            loss(&net.with_tensors_unchecked(tensors), s)
        };
        (shifted(h) - shifted(-h)) / (2.0 * h)
    }

    fn check_fd(net: &TensorNetwork, seed: u64) {
        let mut r = rng(seed);
        for _ in 0..20 {
            let s = random_seq(net.n_positions(), &mut r);
            let xi = random_direction(net, &mut r);
            let exact = directional_derivative(net, &s, xi.components()).unwrap();
            let fd = finite_difference(net, &s, xi.components(), 1e-5);
            let rel = (exact - fd).abs() / exact.abs().max(1e-8);
            assert!(rel < 1e-5, "exact {exact} fd {fd} rel {rel}");
        }
    }

    #[test]
    fn gradient_matches_finite_differences_on_all_topologies() {
        check_fd(&random_net(build_binary_tree(8).unwrap(), 1), 2);
        check_fd(&random_net(build_chain(6).unwrap(), 3), 4);
        check_fd(&random_net(build_mera(8).unwrap(), 5), 6);
    }

    #[test]
    fn tree_and_dag_environments_agree() {
        let net = random_net(build_binary_tree(8).unwrap(), 7);
        let s = random_seq(8, &mut rng(8));
        let (a1, e1) = tree_environments(&net, &s);
        let (a2, e2) = dag_environments(&net, &s).unwrap();
        assert!((a1 - a2).norm() < 1e-13);
        for (x, y) in e1.iter().zip(&e2) {
            assert!(x.max_abs_diff(y) < 1e-13);
        }
    }

    fn single_vertex(theta: f64) -> TensorNetwork {
        let mut b = QuiverBuilder::new();
        let v = b.add_vertex();
        b.add_in_edge(v);
        b.add_out_edge(v);
        let t = DenseTensor::from_real(vec![2, 1], &[theta.cos(), theta.sin()]).unwrap();
        TensorNetwork::new(b.build().unwrap(), vec![1, 2], vec![t]).unwrap()
    }

    #[test]
    fn analytic_one_parameter_family() {
        let theta = 0.3;
        let net = single_vertex(theta);
        let s = SequenceState::new(vec![0]);
        // d/dtheta U = (-sin, cos)
        let dir = DenseTensor::from_real(vec![2, 1], &[-theta.sin(), theta.cos()]).unwrap();
        let exact = directional_derivative(&net, &s, &[dir]).unwrap();
        assert!((exact - 2.0 * theta.tan()).abs() < 1e-12);
        let h = 1e-5;
        let fd = (-2.0 * (theta + h).cos().abs().ln() + 2.0 * (theta - h).cos().abs().ln()) / (2.0 * h);
        assert!((exact - fd).abs() < 1e-6);
    }

    #[test]
    fn gradient_vanishes_at_certain_sequence() {
        let net = single_vertex(0.0);
        let g = gradient(&net, &SequenceState::new(vec![0])).unwrap();
        let xi = tangent_project(&net, &g).unwrap();
        assert!(xi.components()[0].frobenius_norm() < 1e-8);
        assert_eq!(gradient(&net, &SequenceState::new(vec![1])), Err(Error::SingularGradient { sequence: vec![1] }));
    }

    #[test]
    fn step_properties() {
        let net = single_vertex(0.7);
        let batch = vec![(SequenceState::new(vec![0]), 1)];
        let same = sgd_step(&net, &batch, 0.0).unwrap();
        assert!(same.tensor(0).max_abs_diff(net.tensor(0)) < 1e-12);
        let next = sgd_step(&net, &batch, 1e-2).unwrap();
        assert!(loss(&next, &batch[0].0) < loss(&net, &batch[0].0));

        let tree = random_net(build_binary_tree(8).unwrap(), 9);
        let mut r = rng(10);
        let batch: Vec<_> = (0..5).map(|_| (random_seq(8, &mut r), r.random_range(1..3))).collect();
        let next = sgd_step(&tree, &batch, 0.1).unwrap();
        assert!(next.max_isometry_violation() < 1e-10);
        assert!(sgd_step(&tree, &[], 0.1).is_err());
    }

    #[test]
    fn full_batch_descent_is_monotone_for_small_steps() {
        let net = single_vertex(1.2);
        let mut s = SampleMultiset::new(1).unwrap();
        s.add(vec![0], 3).unwrap();
        s.add(vec![1], 1).unwrap();
        let cfg = TrainConfig { learning_rate: 0.05, steps: 200, batch_size: 4, shuffle: false, ..Default::default() };
        let (_, trace) = train(&net, &s, &cfg).unwrap();
        let losses = trace.losses();
        assert!(losses.windows(2).all(|w| w[1] <= w[0] + 1e-14));
        // Optimum is the empirical distribution: F/|S| = H(0.75, 0.25).
        let h = -(0.75f64 * 0.75f64.ln() + 0.25 * 0.25f64.ln());
        assert!((losses.last().unwrap() - h).abs() < 1e-6);
    }

    #[test]
    fn training_is_deterministic_and_respects_zero_steps() {
        let net = random_net(build_binary_tree(4).unwrap(), 11);
        let mut r = rng(12);
        let s = SampleMultiset::from_sequences(4, (0..30).map(|_| random_seq(4, &mut r).symbols)).unwrap();
        let cfg = TrainConfig { steps: 30, batch_size: 4, seed: 5, ..Default::default() };
        let (a, ta) = train(&net, &s, &cfg).unwrap();
        let (b, tb) = train(&net, &s, &cfg).unwrap();
        assert_eq!(ta.to_csv(), tb.to_csv());
        assert_eq!(a.tensors(), b.tensors());
        assert!(ta.records.windows(2).all(|w| w[0].step < w[1].step));

        let (same, empty) = train(&net, &s, &TrainConfig { steps: 0, ..cfg.clone() }).unwrap();
        assert!(empty.is_empty());
        assert_eq!(same.tensors(), net.tensors());

        let wrong = SampleMultiset::from_sequences(3, [vec![0, 0, 0]]).unwrap();
        assert!(matches!(train(&net, &wrong, &cfg), Err(Error::Argument(_))));
    }

    #[test]
    fn checkpoints_fire_on_schedule() {
        let net = random_net(build_binary_tree(4).unwrap(), 13);
        let s = SampleMultiset::from_sequences(4, [vec![0, 1, 0, 1], vec![1, 1, 0, 0]]).unwrap();
        let cfg = TrainConfig { steps: 10, batch_size: 2, checkpoint_every: 3, ..Default::default() };
        let mut seen = Vec::new();
        train_with_checkpoints(&net, &s, &cfg, |step, n| {
            assert!(n.max_isometry_violation() <= cfg.isometry_tol);
            seen.push(step);
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, vec![3, 6, 9]);
    }

    #[test]
    fn objective_is_gauge_invariant_before_and_after_steps() {
        let net = random_net(build_binary_tree(8).unwrap(), 14);
        let mut r = rng(15);
        let s = SampleMultiset::from_sequences(8, (0..20).map(|_| random_seq(8, &mut r).symbols)).unwrap();
        let cfg = TrainConfig { steps: 5, batch_size: 4, ..Default::default() };
        let (trained, _) = train(&net, &s, &cfg).unwrap();
        for (k, n) in [net, trained].iter().enumerate() {
            let gauged = apply_gauge(n, &random_gauge(n, &mut rng(16 + k as u64))).unwrap();
            let d = log_likelihood(n, &s).unwrap() - log_likelihood(&gauged, &s).unwrap();
            assert!(d.abs() < 1e-10, "{d}");
        }
    }
}

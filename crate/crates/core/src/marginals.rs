//! Marginals of the Born distribution by contracting the network with its
//! own adjoint (ket and bra), with an operator inserted on each observable.
//!
//! On trees the doubled network is evaluated leaf to root, one operator per
//! edge, without ever forming the state. Other graphs fall back to the full
//! state.

use std::collections::HashMap;

use crate::error::Result;
use crate::graph::{topological_layers, EdgeId, VertexId};
use crate::network::{state, TensorNetwork};
use crate::tensor::{apply_on_axis, CMatrix};
use crate::C64;

/// Operator placed on one observable.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum LeafOp {
    /// Summed over.
    Identity,
    /// Fixed to one symbol.
    Project(usize),
    /// Kept as an index of the returned joint distribution.
    Open,
}

/// Joint probabilities of the open positions (row-major, ascending
/// position) with projected positions fixed and all others summed out.
pub(crate) fn marginal(net: &TensorNetwork, ops: &[LeafOp]) -> Result<Vec<f64>> {
    net.check_state_model()?;
    if net.quiver().is_tree() {
        Ok(tree_marginal(net, ops))
    } else {
        dense_marginal(net, ops)
    }
}

struct Message {
    /// Open positions covered, in the order their indices are laid out.
    open: Vec<usize>,
    /// One operator per assignment of the open positions.
    mats: Vec<CMatrix>,
    identity: bool,
}

fn projector(d: usize, s: usize) -> CMatrix {
    let mut m = CMatrix::zeros(d, d);
    m[(s, s)] = C64::new(1.0, 0.0);
    m
}

/// `U^dagger (A_1 x .. x A_m) U` for vertex `v` given one operator per
/// outgoing edge (`None` = identity).
fn pull_back(net: &TensorNetwork, v: VertexId, ops: &[Option<&CMatrix>]) -> CMatrix {
    let shape = net.vertex_shape(v);
    let mut data = net.tensor(v).data().to_vec();
    for (axis, op) in ops.iter().enumerate() {
        if let Some(m) = op {
            data = apply_on_axis(&data, &shape, axis, m);
        }
    }
    let u = net.vertex_matrix(v);
    let x = CMatrix::from_row_slice(u.nrows(), u.ncols(), &data);
    u.adjoint() * x
}

pub(crate) fn tree_marginal(net: &TensorNetwork, ops: &[LeafOp]) -> Vec<f64> {
    let q = net.quiver();
    let mut msgs: HashMap<EdgeId, Message> = HashMap::new();
    for (pos, &e) in q.out_edges().iter().enumerate() {
        let d = net.edge_dim(e);
        let msg = match ops[pos] {
            LeafOp::Identity => Message { open: vec![], mats: vec![CMatrix::identity(d, d)], identity: true },
            LeafOp::Project(s) => Message { open: vec![], mats: vec![projector(d, s)], identity: false },
            LeafOp::Open => {
                Message { open: vec![pos], mats: (0..d).map(|s| projector(d, s)).collect(), identity: false }
            }
        };
        msgs.insert(e, msg);
    }
    let layering = topological_layers(q).expect("validated quiver");
    let order: Vec<VertexId> = layering.layers.iter().flatten().copied().collect();
    for &v in order.iter().rev() {
        let children: Vec<Message> = q.outgoing(v).iter().map(|e| msgs.remove(e).expect("child message")).collect();
        let open: Vec<usize> = children.iter().flat_map(|m| m.open.iter().copied()).collect();
        let counts: Vec<usize> = children.iter().map(|m| m.mats.len()).collect();
        let total: usize = counts.iter().product();
        let mut mats = Vec::with_capacity(total);
        let mut idx = vec![0usize; children.len()];
        for _ in 0..total {
            let ops: Vec<Option<&CMatrix>> =
                children.iter().zip(&idx).map(|(m, &i)| if m.identity { None } else { Some(&m.mats[i]) }).collect();
            mats.push(pull_back(net, v, &ops));
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < counts[k] {
                    break;
                }
                idx[k] = 0;
            }
        }
        msgs.insert(q.incoming(v)[0], Message { open, mats, identity: false });
    }
    let root = msgs.remove(&q.in_edges()[0]).expect("root message");
    let values: Vec<f64> = root.mats.iter().map(|m| m[(0, 0)].re).collect();
    reorder_open(net, &root.open, values)
}

/// Permute a joint laid out in `open` order into ascending position order.
fn reorder_open(net: &TensorNetwork, open: &[usize], values: Vec<f64>) -> Vec<f64> {
    if open.windows(2).all(|w| w[0] < w[1]) {
        return values;
    }
    let dims = net.position_dims();
    let mut sorted = open.to_vec();
    sorted.sort_unstable();
    let src_dims: Vec<usize> = open.iter().map(|&p| dims[p]).collect();
    let dst_dims: Vec<usize> = sorted.iter().map(|&p| dims[p]).collect();
    let mut out = vec![0.0; values.len()];
    let mut idx = vec![0usize; open.len()];
    for &value in values.iter() {
        let mut flat = 0;
        for (k, &p) in sorted.iter().enumerate() {
            let src_axis = open.iter().position(|&o| o == p).expect("open position");
            flat = flat * dst_dims[k] + idx[src_axis];
        }
        out[flat] = value;
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < src_dims[k] {
                break;
            }
            idx[k] = 0;
        }
    }
    out
}

pub(crate) fn dense_marginal(net: &TensorNetwork, ops: &[LeafOp]) -> Result<Vec<f64>> {
    let psi = state(net)?;
    Ok(marginal_of_state(psi.data(), &net.position_dims(), ops))
}

/// Marginalize `|psi|^2` given as a row-major tensor over `dims`.
pub(crate) fn marginal_of_state(psi: &[C64], dims: &[usize], ops: &[LeafOp]) -> Vec<f64> {
    let open: Vec<usize> = (0..dims.len()).filter(|&p| ops[p] == LeafOp::Open).collect();
    let size: usize = open.iter().map(|&p| dims[p]).product();
    let mut out = vec![0.0; size];
    let mut idx = vec![0usize; dims.len()];
    'outer: for amp in psi {
        let keep = ops.iter().zip(&idx).all(|(op, &i)| match op {
            LeafOp::Project(s) => *s == i,
            _ => true,
        });
        if keep {
            let mut flat = 0;
            for &p in &open {
                flat = flat * dims[p] + idx[p];
            }
            out[flat] += amp.norm_sqr();
        }
        for k in (0..idx.len()).rev() {
            idx[k] += 1;
            if idx[k] < dims[k] {
                continue 'outer;
            }
            idx[k] = 0;
        }
    }
    out
}

/// Precomputed environments of a tree for fast two-site marginals.
///
/// `below[e]` is the doubled subtree under edge `e` with identities on all
/// observables; `joint[v]` is the reduced density on the outgoing edges of
/// `v`; `paths[p]` lists, for observable `p`, the edges from its out edge up
/// to the root together with the subtree operator carrying `p` open.
pub(crate) struct TreePairs {
    below: Vec<CMatrix>,
    joint: Vec<CMatrix>,
    paths: Vec<Vec<(EdgeId, Vec<CMatrix>)>>,
    dims: Vec<usize>,
}

impl TreePairs {
    pub fn new(net: &TensorNetwork) -> Self {
        let q = net.quiver();
        assert!(q.is_tree(), "pair environments need a tree");
        let layering = topological_layers(q).expect("validated quiver");
        let order: Vec<VertexId> = layering.layers.iter().flatten().copied().collect();

        let mut below: Vec<CMatrix> =
            (0..q.n_edges()).map(|e| CMatrix::identity(net.edge_dim(e), net.edge_dim(e))).collect();
        for &v in order.iter().rev() {
            let ops: Vec<Option<&CMatrix>> = q.outgoing(v).iter().map(|&e| Some(&below[e])).collect();
            let m = pull_back(net, v, &ops);
            below[q.incoming(v)[0]] = m;
        }

        // Top-down reduced densities.
        let mut rho: Vec<Option<CMatrix>> = vec![None; q.n_edges()];
        let root_in = q.in_edges()[0];
        rho[root_in] = Some(CMatrix::from_element(1, 1, C64::new(1.0, 0.0)));
        let mut joint = vec![CMatrix::zeros(0, 0); q.n_vertices()];
        for &v in &order {
            let u = net.vertex_matrix(v);
            let j = &u * rho[q.incoming(v)[0]].as_ref().expect("parent density") * u.adjoint();
            let outs = q.outgoing(v);
            let out_dims: Vec<usize> = outs.iter().map(|&e| net.edge_dim(e)).collect();
            for (k, &e) in outs.iter().enumerate() {
                rho[e] = Some(partial_density(&j, &out_dims, k, |l| &below[outs[l]]));
            }
            joint[v] = j;
        }

        let dims = net.position_dims();
        let mut paths = Vec::with_capacity(q.n_positions());
        for (p, &leaf) in q.out_edges().iter().enumerate() {
            let mut current: Vec<CMatrix> = (0..dims[p]).map(|s| projector(dims[p], s)).collect();
            let mut edge = leaf;
            let mut path = vec![(edge, current.clone())];
            while let Some(v) = q.edge(edge).source {
                let outs = q.outgoing(v);
                current = current
                    .iter()
                    .map(|m| {
                        let ops: Vec<Option<&CMatrix>> =
                            outs.iter().map(|&e| if e == edge { Some(m) } else { Some(&below[e]) }).collect();
                        pull_back(net, v, &ops)
                    })
                    .collect();
                edge = q.incoming(v)[0];
                path.push((edge, current.clone()));
            }
            paths.push(path);
        }
        Self { below, joint, paths, dims }
    }

    /// Single-site marginal of position `p`.
    #[cfg(test)]
    pub fn site(&self, p: usize) -> Vec<f64> {
        let (_, root) = self.paths[p].last().expect("nonempty path");
        root.iter().map(|m| m[(0, 0)].re).collect()
    }

    /// Joint of positions `i != j`, row-major `[s_i, s_j]`.
    pub fn pair(&self, net: &TensorNetwork, i: usize, j: usize) -> Vec<f64> {
        let q = net.quiver();
        let path_j: HashMap<EdgeId, usize> = self.paths[j].iter().enumerate().map(|(k, (e, _))| (*e, k)).collect();
        let (meet_i, meet_j) = self.paths[i]
            .iter()
            .enumerate()
            .find_map(|(k, (e, _))| path_j.get(e).map(|&kj| (k, kj)))
            .expect("paths share the root edge");
        let (edge_a, ops_a) = &self.paths[i][meet_i - 1];
        let (edge_b, ops_b) = &self.paths[j][meet_j - 1];
        let v = q.edge(*edge_a).source.expect("internal vertex");
        let outs = q.outgoing(v);
        let joint = &self.joint[v];
        let mut out = vec![0.0; self.dims[i] * self.dims[j]];
        for (si, a) in ops_a.iter().enumerate() {
            for (sj, b) in ops_b.iter().enumerate() {
                let factors: Vec<&CMatrix> = outs
                    .iter()
                    .map(|&e| {
                        if e == *edge_a {
                            a
                        } else if e == *edge_b {
                            b
                        } else {
                            &self.below[e]
                        }
                    })
                    .collect();
                let k = kron_all(&factors);
                out[si * self.dims[j] + sj] = trace_product(joint, &k);
            }
        }
        out
    }
}

fn kron_all(factors: &[&CMatrix]) -> CMatrix {
    let mut acc = CMatrix::from_element(1, 1, C64::new(1.0, 0.0));
    for f in factors {
        acc = acc.kronecker(f);
    }
    acc
}

/// `Re tr(A B)`.
fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut t = C64::new(0.0, 0.0);
    for x in 0..n {
        for y in 0..n {
            t += a[(x, y)] * b[(y, x)];
        }
    }
    t.re
}

/// Density on factor `k` of a joint operator on `prod dims`, closing every
/// other factor `l` against `env(l)`: `tr(rho_k M) = tr(J (.. x M x ..))`.
fn partial_density<'a>(j: &CMatrix, dims: &[usize], k: usize, env: impl Fn(usize) -> &'a CMatrix) -> CMatrix {
    let factors: Vec<CMatrix> =
        (0..dims.len()).map(|l| if l == k { CMatrix::identity(dims[l], dims[l]) } else { env(l).clone() }).collect();
    let refs: Vec<&CMatrix> = factors.iter().collect();
    let closing = kron_all(&refs);
    // (J * closing) restricted to matching indices on the other factors.
    let product = j * closing;
    let d = dims[k];
    let inner: usize = dims[k + 1..].iter().product();
    let outer: usize = dims[..k].iter().product();
    let mut rho = CMatrix::zeros(d, d);
    for a in 0..d {
        for b in 0..d {
            let mut s = C64::new(0.0, 0.0);
            for o in 0..outer {
                for i in 0..inner {
                    let x = (o * d + a) * inner + i;
                    let y = (o * d + b) * inner + i;
                    s += product[(x, y)];
                }
            }
            rho[(a, b)] = s;
        }
    }
    rho
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{build_binary_tree, build_chain, build_mera};
    use crate::network::default_edge_dims;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn random_net(q: crate::Quiver, cap: usize, seed: u64) -> TensorNetwork {
        let dims = default_edge_dims(&q, 2, &[cap]).unwrap();
        TensorNetwork::random(q, dims, &mut ChaCha20Rng::seed_from_u64(seed)).unwrap()
    }

    #[test]
    fn tree_marginals_match_dense() {
        for q in [build_binary_tree(8).unwrap(), build_chain(6).unwrap()] {
            let net = random_net(q, 3, 4);
            let n = net.n_positions();
            let patterns: Vec<Vec<LeafOp>> = vec![
                vec![LeafOp::Identity; n],
                (0..n).map(|p| if p == 1 { LeafOp::Open } else { LeafOp::Identity }).collect(),
                (0..n).map(|p| if p == n - 1 || p == 0 { LeafOp::Open } else { LeafOp::Identity }).collect(),
                (0..n)
                    .map(|p| match p {
                        0 => LeafOp::Project(1),
                        2 => LeafOp::Open,
                        3 => LeafOp::Project(0),
                        _ => LeafOp::Identity,
                    })
                    .collect(),
                (0..n).map(|p| if p % 2 == 0 { LeafOp::Open } else { LeafOp::Project(1) }).collect(),
            ];
            for ops in patterns {
                let fast = tree_marginal(&net, &ops);
                let slow = dense_marginal(&net, &ops).unwrap();
                assert_eq!(fast.len(), slow.len());
                for (a, b) in fast.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-12, "{ops:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn pair_environments_match_dense() {
        for q in [build_binary_tree(8).unwrap(), build_chain(7).unwrap()] {
            let net = random_net(q, 4, 8);
            let pairs = TreePairs::new(&net);
            let n = net.n_positions();
            for i in 0..n {
                let site = pairs.site(i);
                let mut ops = vec![LeafOp::Identity; n];
                ops[i] = LeafOp::Open;
                let slow = dense_marginal(&net, &ops).unwrap();
                assert!(site.iter().zip(&slow).all(|(a, b)| (a - b).abs() < 1e-12));
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let fast = pairs.pair(&net, i, j);
                    let mut ops = vec![LeafOp::Identity; n];
                    ops[i] = LeafOp::Open;
                    ops[j] = LeafOp::Open;
                    let mut slow = dense_marginal(&net, &ops).unwrap();
                    if i > j {
                        slow = vec![slow[0], slow[2], slow[1], slow[3]];
                    }
                    for (a, b) in fast.iter().zip(&slow) {
                        assert!((a - b).abs() < 1e-12, "({i},{j}): {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn mera_uses_dense_path() {
        let net = random_net(build_mera(4).unwrap(), 2, 1);
        let total: f64 = marginal(&net, &[LeafOp::Open; 4]).unwrap().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}

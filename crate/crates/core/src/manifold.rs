//! Geometry of the parameter space: products of Stiefel manifolds, one per
//! vertex, modulo the unitary gauge group acting on internal and in edges.

use nalgebra::DMatrix;
use rand::Rng;

use crate::error::{arg_err, Error, Result};
use crate::graph::{EdgeId, EdgeKind, VertexId};
use crate::network::TensorNetwork;
use crate::tensor::{apply_on_axis, polar_factor, random_isometry, CMatrix, DenseTensor};
use crate::C64;

/// Per-vertex arrays in each vertex tensor's shape; the raw output of
/// [`crate::training::gradient`].
pub type VertexArrays = Vec<DenseTensor>;

/// A tangent vector at a point of the isometry manifold: per vertex,
/// `U^dagger xi + xi^dagger U = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TangentVector {
    components: Vec<DenseTensor>,
}

impl TangentVector {
    pub fn components(&self) -> &[DenseTensor] {
        &self.components
    }

    pub fn into_components(self) -> Vec<DenseTensor> {
        self.components
    }

    /// Largest entry of `U^dagger xi + xi^dagger U` over all vertices.
    pub fn tangency_violation(&self, net: &TensorNetwork) -> f64 {
        (0..net.quiver().n_vertices())
            .map(|v| {
                let u = net.vertex_matrix(v);
                let x = component_matrix(net, v, &self.components[v]);
                let s = u.adjoint() * &x + x.adjoint() * &u;
                s.iter().map(|z| z.norm()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// Real inner product `sum_v Re <a_v, b_v>`.
    pub fn real_inner(&self, other: &[DenseTensor]) -> f64 {
        self.components
            .iter()
            .zip(other)
            .map(|(a, b)| a.data().iter().zip(b.data()).map(|(x, y)| (x.conj() * y).re).sum::<f64>())
            .sum()
    }
}

fn component_matrix(net: &TensorNetwork, v: VertexId, t: &DenseTensor) -> CMatrix {
    let u = net.vertex_matrix(v);
    CMatrix::from_row_slice(u.nrows(), u.ncols(), t.data())
}

fn check_arrays(net: &TensorNetwork, arrays: &[DenseTensor]) -> Result<()> {
    let nv = net.quiver().n_vertices();
    if arrays.len() != nv {
        return arg_err(format!("{} arrays for {nv} vertices", arrays.len()));
    }
    for (v, a) in arrays.iter().enumerate() {
        let shape = net.vertex_shape(v);
        if a.shape() != shape.as_slice() {
            return arg_err(format!("array for vertex {v} has shape {:?}, expected {shape:?}", a.shape()));
        }
    }
    Ok(())
}

/// Stiefel projection `xi = G - U herm(U^dagger G)` per vertex.
pub fn tangent_project(net: &TensorNetwork, g: &[DenseTensor]) -> Result<TangentVector> {
    check_arrays(net, g)?;
    let components = (0..net.quiver().n_vertices())
        .map(|v| {
            let u = net.vertex_matrix(v);
            let gm = component_matrix(net, v, &g[v]);
            let a = u.adjoint() * &gm;
            let herm = (&a + a.adjoint()) * C64::new(0.5, 0.0);
            let xi = gm - &u * herm;
            DenseTensor::from_parts(g[v].shape().to_vec(), row_major(&xi))
        })
        .collect();
    Ok(TangentVector { components })
}

fn row_major(m: &CMatrix) -> Vec<C64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        for c in 0..m.ncols() {
            out.push(m[(r, c)]);
        }
    }
    out
}

/// Euler step followed by polar retraction: `polar(U + step xi)` per vertex.
pub fn retract(net: &TensorNetwork, xi: &TangentVector, step: f64) -> Result<TensorNetwork> {
    check_arrays(net, &xi.components)?;
    if !step.is_finite() {
        return arg_err(format!("step {step} is not finite"));
    }
    let tensors = (0..net.quiver().n_vertices())
        .map(|v| {
            let u = net.vertex_matrix(v);
            let x = component_matrix(net, v, &xi.components[v]);
            let q = polar_factor(&(u + x * C64::new(step, 0.0)))?;
            Ok(DenseTensor::from_parts(net.vertex_shape(v), row_major(&q)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(net.with_tensors_unchecked(tensors))
}

/// Complex dimension of the moduli space of a tree:
/// `sum_v (in_v * out_v - in_v^2)`, a sum of Grassmannian dimensions.
pub fn moduli_dimension(net: &TensorNetwork) -> Result<usize> {
    let q = net.quiver();
    if !q.is_tree() {
        return Err(Error::UnsupportedTopology(format!(
            "the moduli dimension formula holds for trees with one in edge; this {} graph is not one",
            q.kind().name()
        )));
    }
    Ok((0..q.n_vertices())
        .map(|v| {
            let (out_dim, in_dim) = io_dims(net, v);
            in_dim * out_dim - in_dim * in_dim
        })
        .sum())
}

fn io_dims(net: &TensorNetwork, v: VertexId) -> (usize, usize) {
    let q = net.quiver();
    let out_dim = q.outgoing(v).iter().map(|&e| net.edge_dim(e)).product();
    let in_dim = q.incoming(v).iter().map(|&e| net.edge_dim(e)).product();
    (out_dim, in_dim)
}

/// Edges carrying a gauge freedom: internal and in edges.
fn gauge_edges(net: &TensorNetwork) -> Vec<EdgeId> {
    let q = net.quiver();
    (0..q.n_edges()).filter(|&e| q.edge(e).kind != EdgeKind::Out).collect()
}

/// Axis of edge `e` in the tensor of vertex `v`.
fn axis_of(net: &TensorNetwork, v: VertexId, e: EdgeId) -> usize {
    let q = net.quiver();
    if let Some(k) = q.outgoing(v).iter().position(|&x| x == e) {
        k
    } else {
        q.outgoing(v).len() + q.incoming(v).iter().position(|&x| x == e).expect("edge incident to vertex")
    }
}

/// Act with one unitary per gauge edge (`None` = identity): `g` on the
/// source's axis and `conj(g)` on the target's, so every internal
/// contraction is unchanged. A gauge on an in edge rotates the input, which
/// for a state model is a global phase.
pub fn apply_gauge(net: &TensorNetwork, gauge: &[Option<CMatrix>]) -> Result<TensorNetwork> {
    let q = net.quiver();
    if gauge.len() != q.n_edges() {
        return arg_err(format!("{} gauge entries for {} edges", gauge.len(), q.n_edges()));
    }
    let mut data: Vec<Vec<C64>> = net.tensors().iter().map(|t| t.data().to_vec()).collect();
    for (e, g) in gauge.iter().enumerate() {
        let Some(g) = g else { continue };
        let d = net.edge_dim(e);
        if g.nrows() != d || g.ncols() != d {
            return arg_err(format!("gauge on edge {e} is {}x{}, edge dimension {d}", g.nrows(), g.ncols()));
        }
        let edge = q.edge(e);
        if edge.kind == EdgeKind::Out {
            return arg_err(format!("edge {e} is an out edge and carries no gauge"));
        }
        if let Some(s) = edge.source {
            data[s] = apply_on_axis(&data[s], &net.vertex_shape(s), axis_of(net, s, e), g);
        }
        if let Some(t) = edge.target {
            data[t] = apply_on_axis(&data[t], &net.vertex_shape(t), axis_of(net, t, e), &g.map(|z| z.conj()));
        }
    }
    let tensors = data.into_iter().enumerate().map(|(v, d)| DenseTensor::from_parts(net.vertex_shape(v), d)).collect();
    net.with_tensors(tensors)
}

/// Haar-random unitaries on every gauge edge.
pub fn random_gauge<R: Rng + ?Sized>(net: &TensorNetwork, rng: &mut R) -> Vec<Option<CMatrix>> {
    let gauge_set = gauge_edges(net);
    (0..net.quiver().n_edges())
        .map(|e| {
            gauge_set.contains(&e).then(|| {
                let d = net.edge_dim(e);
                random_isometry(d, d, rng).expect("square isometry").as_matrix(1).expect("rank-2 tensor")
            })
        })
        .collect()
}

/// Basis of the anti-Hermitian `d x d` matrices, `d^2` elements.
fn anti_hermitian_basis(d: usize) -> Vec<CMatrix> {
    let mut basis = Vec::with_capacity(d * d);
    let i = C64::new(0.0, 1.0);
    for a in 0..d {
        let mut m = CMatrix::zeros(d, d);
        m[(a, a)] = i;
        basis.push(m);
        for b in a + 1..d {
            let mut re = CMatrix::zeros(d, d);
            re[(a, b)] = C64::new(1.0, 0.0);
            re[(b, a)] = C64::new(-1.0, 0.0);
            basis.push(re);
            let mut im = CMatrix::zeros(d, d);
            im[(a, b)] = i;
            im[(b, a)] = i;
            basis.push(im);
        }
    }
    basis
}

/// Numerical rank of the differential of the gauge action, taken at a
/// randomly gauge-transformed copy of `net` (the rank is constant along
/// orbits). Singular values above `1e-8` times the largest count.
pub fn gauge_orbit_rank<R: Rng + ?Sized>(net: &TensorNetwork, rng: &mut R) -> usize {
    let q = net.quiver();
    let point = apply_gauge(net, &random_gauge(net, rng)).unwrap_or_else(|_| net.clone());
    let offsets: Vec<usize> = point
        .tensors()
        .iter()
        .scan(0, |acc, t| {
            let start = *acc;
            *acc += t.len();
            Some(start)
        })
        .collect();
    let n_params: usize = point.tensors().iter().map(|t| t.len()).sum();

    let mut columns: Vec<Vec<f64>> = Vec::new();
    for e in gauge_edges(&point) {
        let edge = q.edge(e);
        for x in anti_hermitian_basis(point.edge_dim(e)) {
            let mut col = vec![0.0; 2 * n_params];
            let mut write = |v: VertexId, m: &CMatrix| {
                let t = point.tensor(v);
                let moved = apply_on_axis(t.data(), t.shape(), axis_of(&point, v, e), m);
                for (k, z) in moved.iter().enumerate() {
                    col[2 * (offsets[v] + k)] += z.re;
                    col[2 * (offsets[v] + k) + 1] += z.im;
                }
            };
            if let Some(s) = edge.source {
                write(s, &x);
            }
            if let Some(t) = edge.target {
                write(t, &x.map(|z| z.conj()));
            }
            columns.push(col);
        }
    }
    if columns.is_empty() {
        return 0;
    }
    let m = DMatrix::from_fn(2 * n_params, columns.len(), |r, c| columns[c][r]);
    let sv = m.singular_values();
    let largest = sv.iter().copied().fold(0.0, f64::max);
    if largest == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > 1e-8 * largest).count()
}

use isotn::corpus::{
    detokenize, escape_token, read_vocab, tokenize, unescape_token, window_count, windows, write_vocab, Scheme,
};
use isotn::graph::{build_binary_tree, build_chain};
use isotn::manifold::tangent_project;
use isotn::model::{born_probability, SymbolSet};
use isotn::network::{default_edge_dims, enumerate_sequences};
use isotn::rng::{stream, Stream};
use isotn::tensor::{contract, is_isometry, random_isometry, CMatrix, IndexSplit};
use isotn::{DenseTensor, TensorNetwork, C64};
use proptest::prelude::*;

fn tensor(shape: Vec<usize>, values: &[(f64, f64)]) -> DenseTensor {
    let len = shape.iter().product();
    DenseTensor::new(shape, values.iter().cycle().take(len).map(|&(re, im)| C64::new(re, im)).collect()).unwrap()
}

fn values() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), 1..40)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn permute_moves_entries(shape in prop::collection::vec(1..4usize, 1..5), vals in values(), seed in any::<u64>()) {
        let t = tensor(shape.clone(), &vals);
        let mut perm: Vec<usize> = (0..shape.len()).collect();
        let k = (seed as usize) % perm.len();
        perm.rotate_left(k);
        let p = t.permute(&perm).unwrap();
        for idx in enumerate_sequences(&shape) {
            let moved: Vec<usize> = perm.iter().map(|&a| idx.symbols[a]).collect();
            prop_assert_eq!(p.get(&moved).unwrap(), t.get(&idx.symbols).unwrap());
        }
        let mut inverse = vec![0; perm.len()];
        for (k, &a) in perm.iter().enumerate() {
            inverse[a] = k;
        }
        prop_assert_eq!(p.permute(&inverse).unwrap(), t);
    }

    #[test]
    fn contraction_is_matrix_product(r in 1..5usize, m in 1..5usize, c in 1..5usize, a in values(), b in values()) {
        let ta = tensor(vec![r, m], &a);
        let tb = tensor(vec![m, c], &b);
        let got = contract(&ta, &tb, &[(1, 0)]).unwrap();
        let expected = CMatrix::from_row_slice(r, m, ta.data()) * CMatrix::from_row_slice(m, c, tb.data());
        prop_assert_eq!(got.shape(), &[r, c]);
        for i in 0..r {
            for j in 0..c {
                prop_assert!((got.get(&[i, j]).unwrap() - expected[(i, j)]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn random_isometries_are_isometric(inner in 1..6usize, extra in 0..6usize, seed in any::<u64>()) {
        let u = random_isometry(inner, inner + extra, &mut stream(seed, Stream::Init)).unwrap();
        prop_assert!(is_isometry(&u, &IndexSplit::trailing(2, 1).unwrap(), 1e-10).unwrap());
    }

    #[test]
    fn born_probabilities_sum_to_one(n in 1..7usize, w in 2..4usize, cap in 1..5usize, tree in any::<bool>(), seed in any::<u64>()) {
        let q = if tree { build_binary_tree(1 << (n % 4)).unwrap() } else { build_chain(n).unwrap() };
        let dims = default_edge_dims(&q, w, &[cap]).unwrap();
        let net = TensorNetwork::random(q, dims, &mut stream(seed, Stream::Init)).unwrap();
        let total: f64 = enumerate_sequences(&net.position_dims()).iter().map(|s| born_probability(&net, s).unwrap()).sum();
        prop_assert!((total - 1.0).abs() < 1e-10);
    }

    #[test]
    fn tangent_projection_is_idempotent(n in 2..6usize, seed in any::<u64>()) {
        let q = build_chain(n).unwrap();
        let dims = default_edge_dims(&q, 2, &[3]).unwrap();
        let net = TensorNetwork::random(q.clone(), dims.clone(), &mut stream(seed, Stream::Init)).unwrap();
        let other = TensorNetwork::random(q, dims, &mut stream(seed, Stream::Gauge)).unwrap();
        let xi = tangent_project(&net, other.tensors()).unwrap();
        prop_assert!(xi.tangency_violation(&net) < 1e-12);
        let again = tangent_project(&net, xi.components()).unwrap();
        for (a, b) in again.components().iter().zip(xi.components()) {
            prop_assert!(a.max_abs_diff(b) < 1e-12);
        }
    }

    #[test]
    fn window_counts_agree(tokens in prop::collection::vec(0..3usize, 0..60), n in 1..6usize, stride in 1..4usize) {
        let expected = if tokens.len() < n { 0 } else { (tokens.len() - n) / stride + 1 };
        prop_assert_eq!(window_count(tokens.len(), n, stride), expected);
        match windows(&tokens, n, stride) {
            Ok(set) => prop_assert_eq!(set.cardinality(), expected as u64),
            Err(_) => prop_assert_eq!(expected, 0),
        }
    }

    #[test]
    fn tokens_survive_escaping(token in prop::collection::vec(any::<u8>(), 1..12)) {
        let line = escape_token(&token);
        prop_assert!(!line.contains('\n'));
        prop_assert_eq!(unescape_token(&line).unwrap(), token);
    }

    #[test]
    fn vocab_files_round_trip(tokens in prop::collection::btree_set(prop::collection::vec(any::<u8>(), 1..6), 1..10)) {
        let symbols = SymbolSet::new(tokens.into_iter().collect(), None).unwrap();
        prop_assert_eq!(read_vocab(&write_vocab(&symbols)).unwrap(), symbols);
    }

    #[test]
    fn text_round_trips_through_indices(text in "[a-e ]{0,40}") {
        let symbols = SymbolSet::from_strs(&["a", "b", "c", "d", "e", " "]).unwrap();
        let ids = tokenize(text.as_bytes(), Scheme::Chars, &symbols).unwrap();
        prop_assert_eq!(ids.len(), text.len());
        prop_assert_eq!(detokenize(&ids, Scheme::Chars, &symbols).unwrap(), text.as_bytes());
    }
}

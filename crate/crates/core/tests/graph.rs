use anongcn::graph::{eigendecompose, synth_graph, SbmSpec, SynthSpec};
use anongcn::{Edge, Graph, LaplacianKind, Masks, Matrix, SpectralBasis};
use proptest::prelude::*;

fn naive_product(a: &Matrix, b: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(a.rows(), b.cols());
    for i in 0..a.rows() {
        for j in 0..b.cols() {
            out[(i, j)] = (0..a.cols()).map(|k| a[(i, k)] * b[(k, j)]).sum();
        }
    }
    out
}

fn symmetric(n: usize, entries: &[f64]) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    let mut it = entries.iter().cycle();
    for i in 0..n {
        for j in i..n {
            let v = *it.next().unwrap();
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

fn random_graph(n: usize, bits: &[bool]) -> Graph {
    let mut edges = Vec::new();
    let mut it = bits.iter().cycle();
    for i in 0..n {
        for j in i + 1..n {
            if *it.next().unwrap() {
                edges.push(Edge::new(i, j));
            }
        }
    }
    Graph::new(Matrix::ones(n, 1), edges, None, Masks::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigendecomposition_reconstructs(n in 1usize..=64, entries in prop::collection::vec(-5.0f64..5.0, 64)) {
        let m = symmetric(n, &entries);
        let basis = eigendecompose(&m).unwrap();
        let lambda = Matrix::diag(basis.eigenvalues());
        let rebuilt = naive_product(&naive_product(basis.vectors(), &lambda), &basis.vectors().transpose());
        prop_assert!(rebuilt.max_abs_diff(&m) < 1e-8);
        prop_assert!(basis.orthogonality_error() < 1e-8);
        prop_assert!(basis.eigenvalues().windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn adjacency_is_symmetric_with_degree_row_sums(n in 2usize..24, bits in prop::collection::vec(any::<bool>(), 1..300)) {
        let g = random_graph(n, &bits);
        let a = g.adjacency();
        prop_assert_eq!(a.asymmetry(), Some(0.0));
        for (s, d) in a.row_sums().iter().zip(g.degrees()) {
            prop_assert_eq!(*s, d);
        }
        for i in 0..n {
            prop_assert_eq!(a[(i, i)], 0.0);
        }
    }

    #[test]
    fn basis_invariants_hold_for_both_laplacians(n in 2usize..20, bits in prop::collection::vec(any::<bool>(), 1..200)) {
        let g = random_graph(n, &bits);
        for kind in [LaplacianKind::Combinatorial, LaplacianKind::SymmetricNormalized] {
            let basis = SpectralBasis::of_graph(&g, kind).unwrap();
            prop_assert!(basis.orthogonality_error() < 1e-8);
            prop_assert!(basis.residual(&g.laplacian(kind)).unwrap() < 1e-6);
            if kind == LaplacianKind::Combinatorial {
                prop_assert!(basis.eigenvalues()[0].abs() < 1e-8);
                prop_assert!(basis.eigenvalues().iter().all(|&l| l >= -1e-8));
            }
        }
    }
}

#[test]
fn sign_convention_is_first_nonzero_positive() {
    let g = synth_graph(&SynthSpec::Barbell(4)).unwrap();
    let basis = SpectralBasis::of_graph(&g, LaplacianKind::Combinatorial).unwrap();
    for l in 0..basis.n() {
        let col = basis.vectors().column(l);
        let first = col.iter().find(|x| x.abs() > 1e-12).unwrap();
        assert!(*first > 0.0);
    }
}

#[test]
fn generated_graphs_have_symmetric_adjacency() {
    for spec in [
        SynthSpec::Ring(9),
        SynthSpec::Barbell(5),
        SynthSpec::Sbm(SbmSpec::new(vec![6, 7, 8], 0.6, 0.1, 4)),
    ] {
        let g = synth_graph(&spec).unwrap();
        let a = g.adjacency();
        assert_eq!(a.asymmetry(), Some(0.0));
        assert_eq!(a.row_sums(), g.degrees());
    }
}

#[test]
fn native_file_round_trip() {
    let g = synth_graph(&SynthSpec::Sbm(SbmSpec::new(vec![4, 4], 0.7, 0.1, 2))).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    g.save(&path).unwrap();
    assert_eq!(Graph::load(&path).unwrap(), g);
}

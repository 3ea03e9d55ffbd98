use foelner_core::linalg::qf;
use foelner_core::projlib::{join, join_all, overlap_norm, JOIN_TOL};
use foelner_core::*;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn nat(n: usize) -> Vec<BasisIndex> {
    (0..n as u64).map(BasisIndex::Nat).collect()
}

fn orthonormal(n: usize, r: usize, entries: &[(f64, f64)]) -> DMatrix<C<f64>> {
    qf(DMatrix::from_fn(n, r, |i, j| {
        let (re, im) = entries[(i * r + j) % entries.len()];
        C::new(re, im)
    }))
}

fn gram_error(v: &DMatrix<C<f64>>) -> f64 {
    let g = v.adjoint() * v;
    (g - DMatrix::identity(v.ncols(), v.ncols())).norm()
}

fn frame_of(p: &Projection64) -> DMatrix<C<f64>> {
    p.to_frame().columns().clone()
}

fn entries(len: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64), len)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn disjoint_coordinate_ranks_add(a in prop::collection::btree_set(0u64..200, 1..20), b in prop::collection::btree_set(0u64..200, 1..20)) {
        let b: Vec<u64> = b.into_iter().filter(|x| !a.contains(x)).collect();
        prop_assume!(!b.is_empty());
        let p = Projection64::coordinate(a.iter().map(|x| BasisIndex::Nat(*x))).unwrap();
        let q = Projection64::coordinate(b.iter().map(|x| BasisIndex::Nat(*x))).unwrap();
        let j = join(&p, &q, JOIN_TOL).unwrap();
        prop_assert_eq!(j.projection.rank(), p.rank() + q.rank());
        prop_assert!(overlap_norm(&p, &q) == 0.0);
    }

    #[test]
    fn orthogonal_frame_ranks_add((n, r, v) in (4usize..12).prop_flat_map(|n| (Just(n), 2..n)).prop_flat_map(|(n, r)| (Just(n), Just(r), entries(n * r))), split in 1usize..11) {
        let split = split.min(r - 1);
        let full = orthonormal(n, r, &v);
        let p = Projection64::frame(nat(n), full.columns(0, split).into_owned()).unwrap();
        let q = Projection64::frame(nat(n), full.columns(split, r - split).into_owned()).unwrap();
        prop_assert!(overlap_norm(&p, &q) < 1e-12);
        let j = join(&p, &q, JOIN_TOL).unwrap();
        prop_assert_eq!(j.projection.rank(), r);
        prop_assert!(!j.ambiguous);
    }

    #[test]
    fn constructed_frames_are_orthonormal((n, r, v) in (2usize..10).prop_flat_map(|n| (Just(n), 1..=n)).prop_flat_map(|(n, r)| (Just(n), Just(r), entries(n * r))), w in entries(40)) {
        let p = Projection64::frame(nat(n), orthonormal(n, r, &v)).unwrap();
        prop_assert!(gram_error(&frame_of(&p)) < 1e-10);
        let q = Projection64::frame(nat(n), orthonormal(n, 1.max(r / 2), &w)).unwrap();
        let j = join(&p, &q, JOIN_TOL).unwrap();
        prop_assert!(gram_error(&frame_of(&j.projection)) < 1e-10);
        let t = p.tensor(&q);
        prop_assert!(gram_error(&frame_of(&t)) < 1e-10);
        prop_assert_eq!(t.rank(), p.rank() * q.rank());
        prop_assert!((t.hs_norm() - (t.rank() as f64).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn join_dominates_both_and_is_minimal(
        (n, r1, r2, v, w) in (3usize..10)
            .prop_flat_map(|n| (Just(n), 1..n, 1..n))
            .prop_flat_map(|(n, r1, r2)| (Just(n), Just(r1), Just(r2), entries(n * r1), entries(n * r2))),
    ) {
        let p = Projection64::frame(nat(n), orthonormal(n, r1, &v)).unwrap();
        let q = Projection64::frame(nat(n), orthonormal(n, r2, &w)).unwrap();
        let j = join(&p, &q, JOIN_TOL).unwrap();
        prop_assert!(j.projection.dominates(&p, 1e-9));
        prop_assert!(j.projection.dominates(&q, 1e-9));
        // generic subspaces span min(n, r1 + r2) dimensions
        prop_assert!(j.projection.rank() <= (r1 + r2).min(n));
        prop_assert!(j.projection.rank() >= r1.max(r2));
        let all = join_all(&[p.clone(), q.clone(), p.clone()], JOIN_TOL).unwrap();
        prop_assert_eq!(all.projection.rank(), j.projection.rank());
    }

    #[test]
    fn coordinate_join_is_set_union(a in prop::collection::btree_set(0u64..50, 1..15), b in prop::collection::btree_set(0u64..50, 1..15)) {
        let p = Projection64::coordinate(a.iter().map(|x| BasisIndex::Nat(*x))).unwrap();
        let q = Projection64::coordinate(b.iter().map(|x| BasisIndex::Nat(*x))).unwrap();
        let j = join(&p, &q, JOIN_TOL).unwrap().projection;
        let union: std::collections::BTreeSet<BasisIndex> = a.union(&b).map(|x| BasisIndex::Nat(*x)).collect();
        prop_assert_eq!(j, Projection::Coordinate(union));
    }
}

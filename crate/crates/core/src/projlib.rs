//! Finite-rank orthogonal projections: coordinate subsets kept symbolic, and
//! orthonormal frames inside an explicit window.

use std::collections::{BTreeSet, HashMap};

use nalgebra::ComplexField;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::basis::{index_from_json, index_to_json, BasisIndex, IndexSort};
use crate::error::{Error, Result};
use crate::linalg::{orthonormal_span, spectral_norm};
use crate::opmodel::ScalarDoc;
use crate::scalar::{cplx, frame_tol, lit, one, to_f64, Real, C};

/// Default singular-value cutoff for joins.
pub const JOIN_TOL: f64 = 1e-10;

/// Orthonormal columns over an ordered window of basis labels.
#[derive(Clone, Debug, PartialEq)]
pub struct Frame<T: Real> {
    window: Vec<BasisIndex>,
    columns: DMatrix<C<T>>,
}

impl<T: Real> Frame<T> {
    /// Validates `V*V = I` within the frame tolerance and a duplicate-free window.
    pub fn new(window: Vec<BasisIndex>, columns: DMatrix<C<T>>) -> Result<Self> {
        if columns.nrows() != window.len() {
            return Err(Error::validation(
                "columns",
                format!("{} rows for a window of {}", columns.nrows(), window.len()),
            ));
        }
        crate::opmodel::position_map(&window)?;
        let gram = columns.adjoint() * &columns;
        let tol = frame_tol::<T>();
        let r = columns.ncols();
        for a in 0..r {
            for b in 0..r {
                let want = if a == b { one() } else { C::new(T::zero(), T::zero()) };
                if (gram[(a, b)] - want).modulus() > tol {
                    return Err(Error::validation(
                        "columns",
                        format!("columns are not orthonormal (Gram entry ({a},{b}))"),
                    ));
                }
            }
        }
        Ok(Frame { window, columns })
    }

    pub(crate) fn new_unchecked(window: Vec<BasisIndex>, columns: DMatrix<C<T>>) -> Self {
        Frame { window, columns }
    }

    pub fn window(&self) -> &[BasisIndex] {
        &self.window
    }

    pub fn columns(&self) -> &DMatrix<C<T>> {
        &self.columns
    }

    pub fn rank(&self) -> usize {
        self.columns.ncols()
    }
}

/// A finite-rank orthogonal projection.
#[derive(Clone, Debug, PartialEq)]
pub enum Projection<T: Real> {
    /// Projection onto the span of the listed basis vectors.
    Coordinate(BTreeSet<BasisIndex>),
    /// Projection `VV*` for an orthonormal frame `V`.
    Frame(Frame<T>),
}

impl<T: Real> Projection<T> {
    /// Coordinate projection; an empty index set is rejected.
    pub fn coordinate<I: IntoIterator<Item = BasisIndex>>(indices: I) -> Result<Self> {
        let set: BTreeSet<BasisIndex> = indices.into_iter().collect();
        if set.is_empty() {
            return Err(Error::ZeroProjection);
        }
        Ok(Projection::Coordinate(set))
    }

    /// The zero projection, only for callers that explicitly opt in.
    pub fn zero() -> Self {
        Projection::Coordinate(BTreeSet::new())
    }

    /// Projection onto the first `rank` basis vectors in canonical order.
    pub fn interval(sort: &IndexSort, rank: usize) -> Result<Self> {
        Self::coordinate(sort.prefix(rank)?)
    }

    pub fn frame(window: Vec<BasisIndex>, columns: DMatrix<C<T>>) -> Result<Self> {
        Ok(Projection::Frame(Frame::new(window, columns)?))
    }

    pub fn rank(&self) -> usize {
        match self {
            Projection::Coordinate(s) => s.len(),
            Projection::Frame(f) => f.rank(),
        }
    }

    pub fn is_zero(&self) -> bool {
        self.rank() == 0
    }

    /// ‖P‖₂ = √rank.
    pub fn hs_norm(&self) -> T {
        lit::<T>(self.rank() as f64).sqrt()
    }

    /// Labels the projection is supported on (frame windows in order).
    pub fn support(&self) -> Vec<BasisIndex> {
        match self {
            Projection::Coordinate(s) => s.iter().cloned().collect(),
            Projection::Frame(f) => f.window.clone(),
        }
    }

    pub fn check_sort(&self, sort: &IndexSort) -> Result<()> {
        match self {
            Projection::Coordinate(s) => s.iter().try_for_each(|i| sort.check(i)),
            Projection::Frame(f) => f.window.iter().try_for_each(|i| sort.check(i)),
        }
    }

    pub fn to_frame(&self) -> Frame<T> {
        match self {
            Projection::Frame(f) => f.clone(),
            Projection::Coordinate(s) => {
                let n = s.len();
                Frame::new_unchecked(s.iter().cloned().collect(), DMatrix::identity(n, n))
            }
        }
    }

    /// Columns of the frame embedded into `window` (which must contain the support).
    pub fn columns_on(&self, window: &[BasisIndex]) -> Result<DMatrix<C<T>>> {
        let pos: HashMap<&BasisIndex, usize> = window.iter().enumerate().map(|(a, i)| (i, a)).collect();
        let f = self.to_frame();
        let mut out = DMatrix::zeros(window.len(), f.rank());
        for (row, idx) in f.window.iter().enumerate() {
            let &a = pos
                .get(idx)
                .ok_or_else(|| Error::InvalidWindow(format!("window misses support index {idx}")))?;
            for c in 0..f.rank() {
                out[(a, c)] = f.columns[(row, c)];
            }
        }
        Ok(out)
    }

    /// Dense matrix of the projection on `window`.
    pub fn matrix_on(&self, window: &[BasisIndex]) -> Result<DMatrix<C<T>>> {
        let v = self.columns_on(window)?;
        Ok(&v * v.adjoint())
    }

    /// Embeds into the chosen summand of a direct sum.
    pub fn lift(&self, right: bool) -> Self {
        let wrap = |i: &BasisIndex| {
            if right {
                BasisIndex::right(i.clone())
            } else {
                BasisIndex::left(i.clone())
            }
        };
        match self {
            Projection::Coordinate(s) => Projection::Coordinate(s.iter().map(wrap).collect()),
            Projection::Frame(f) => Projection::Frame(Frame::new_unchecked(
                f.window.iter().map(wrap).collect(),
                f.columns.clone(),
            )),
        }
    }

    /// `P ⊗ Q`.
    pub fn tensor(&self, other: &Self) -> Self {
        match (self, other) {
            (Projection::Coordinate(a), Projection::Coordinate(b)) => Projection::Coordinate(
                a.iter()
                    .flat_map(|x| b.iter().map(move |y| BasisIndex::tensor(x.clone(), y.clone())))
                    .collect(),
            ),
            _ => {
                let (fa, fb) = (self.to_frame(), other.to_frame());
                let window = fa
                    .window
                    .iter()
                    .flat_map(|x| fb.window.iter().map(move |y| BasisIndex::tensor(x.clone(), y.clone())))
                    .collect();
                Projection::Frame(Frame::new_unchecked(window, fa.columns.kronecker(&fb.columns)))
            }
        }
    }

    /// Whether `self ≥ other` as forms, i.e. ‖(1−P)Q‖ ≤ tol.
    pub fn dominates(&self, other: &Self, tol: T) -> bool {
        if let (Projection::Coordinate(a), Projection::Coordinate(b)) = (self, other) {
            return b.is_subset(a);
        }
        let window = union_window(self, other);
        let (vp, vq) = match (self.columns_on(&window), other.columns_on(&window)) {
            (Ok(p), Ok(q)) => (p, q),
            _ => return false,
        };
        let residual = &vq - &vp * (vp.adjoint() * &vq);
        spectral_norm(&residual) <= tol
    }
}

/// Support of `p` followed by the labels of `q` not already present.
pub fn union_window<T: Real>(p: &Projection<T>, q: &Projection<T>) -> Vec<BasisIndex> {
    let mut window = p.support();
    let seen: BTreeSet<BasisIndex> = window.iter().cloned().collect();
    window.extend(q.support().into_iter().filter(|i| !seen.contains(i)));
    window
}

/// Result of a join.
#[derive(Clone, Debug, PartialEq)]
pub struct JoinResult<T: Real> {
    pub projection: Projection<T>,
    /// Some singular value of the stacked frame fell near the cutoff, so the
    /// numerical rank is ambiguous.
    pub ambiguous: bool,
}

/// `P ∨ Q`: projection onto the closure of `Ran P + Ran Q`.
pub fn join<T: Real>(p: &Projection<T>, q: &Projection<T>, tol: T) -> Result<JoinResult<T>> {
    if tol <= T::zero() {
        return Err(Error::Precondition("join tolerance must be positive".into()));
    }
    if let (Projection::Coordinate(a), Projection::Coordinate(b)) = (p, q) {
        return Ok(JoinResult {
            projection: Projection::Coordinate(a.union(b).cloned().collect()),
            ambiguous: false,
        });
    }
    join_all(&[p.clone(), q.clone()], tol)
}

/// Join of a whole family, computed in one orthonormalization.
pub fn join_all<T: Real>(family: &[Projection<T>], tol: T) -> Result<JoinResult<T>> {
    if family.iter().all(|p| matches!(p, Projection::Coordinate(_))) {
        let set = family
            .iter()
            .flat_map(|p| match p {
                Projection::Coordinate(s) => s.iter().cloned().collect::<Vec<_>>(),
                Projection::Frame(_) => unreachable!(),
            })
            .collect();
        return Ok(JoinResult { projection: Projection::Coordinate(set), ambiguous: false });
    }
    let mut window: Vec<BasisIndex> = Vec::new();
    let mut seen = BTreeSet::new();
    for p in family {
        for i in p.support() {
            if seen.insert(i.clone()) {
                window.push(i);
            }
        }
    }
    let total: usize = family.iter().map(Projection::rank).sum();
    let mut stacked = DMatrix::zeros(window.len(), total);
    let mut c0 = 0;
    for p in family {
        let cols = p.columns_on(&window)?;
        stacked.view_mut((0, c0), (window.len(), cols.ncols())).copy_from(&cols);
        c0 += cols.ncols();
    }
    let (basis, sv) = orthonormal_span(&stacked, tol);
    let lo = tol * lit(0.01);
    let hi = tol * lit(100.0);
    let ambiguous = sv.iter().any(|s| *s > lo && *s < hi);
    Ok(JoinResult {
        projection: Projection::Frame(Frame::new_unchecked(window, basis)),
        ambiguous,
    })
}

/// ‖PQ‖ (operator norm).
pub fn overlap_norm<T: Real>(p: &Projection<T>, q: &Projection<T>) -> T {
    if let (Projection::Coordinate(a), Projection::Coordinate(b)) = (p, q) {
        return if a.is_disjoint(b) || a.is_empty() || b.is_empty() {
            T::zero()
        } else {
            T::one()
        };
    }
    let window = union_window(p, q);
    let vp = p.columns_on(&window).expect("union window covers both supports");
    let vq = q.columns_on(&window).expect("union window covers both supports");
    spectral_norm(&(vp.adjoint() * vq))
}

/// ‖P − Q‖₂ = √(rank P + rank Q − 2‖V_P* V_Q‖₂²).
pub fn hs_distance<T: Real>(p: &Projection<T>, q: &Projection<T>) -> T {
    if let (Projection::Coordinate(a), Projection::Coordinate(b)) = (p, q) {
        return lit::<T>(a.symmetric_difference(b).count() as f64).sqrt();
    }
    let window = union_window(p, q);
    let vp = p.columns_on(&window).expect("union window covers both supports");
    let vq = q.columns_on(&window).expect("union window covers both supports");
    let cross = (vp.adjoint() * vq).norm_squared();
    let sq = lit::<T>((p.rank() + q.rank()) as f64) - cross - cross;
    sq.max(T::zero()).sqrt()
}

/// JSON projection description; labels are interpreted against an operator's sort.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProjectionDoc {
    Coordinate { indices: Vec<Value> },
    /// Each inner array of `columns` is one column over `window`.
    Frame { window: Vec<Value>, columns: Vec<Vec<ScalarDoc>> },
    /// Inclusive range `from..=to` on ℕ₀, ℤ or a finite index set.
    Interval { from: i64, to: i64 },
    /// Box `[0, n)²` on ℕ₀² (or the product of intervals on a tensor of ℕ₀'s).
    Box { n: u64 },
}

impl ProjectionDoc {
    pub fn resolve<T: Real>(&self, sort: &IndexSort) -> Result<Projection<T>> {
        match self {
            ProjectionDoc::Coordinate { indices } => {
                let idx = indices
                    .iter()
                    .enumerate()
                    .map(|(k, v)| index_from_json(v, sort, &format!("indices[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                Projection::coordinate(idx)
            }
            ProjectionDoc::Frame { window, columns } => {
                let window = window
                    .iter()
                    .enumerate()
                    .map(|(k, v)| index_from_json(v, sort, &format!("window[{k}]")))
                    .collect::<Result<Vec<_>>>()?;
                if columns.is_empty() {
                    return Err(Error::ZeroProjection);
                }
                let mut m = DMatrix::zeros(window.len(), columns.len());
                for (c, col) in columns.iter().enumerate() {
                    if col.len() != window.len() {
                        return Err(Error::validation(
                            format!("columns[{c}]"),
                            format!("expected {} entries", window.len()),
                        ));
                    }
                    for (r, x) in col.iter().enumerate() {
                        let (re, im) = x.parts();
                        m[(r, c)] = cplx(re, im);
                    }
                }
                Projection::frame(window, m)
            }
            ProjectionDoc::Interval { from, to } => {
                if to < from {
                    return Err(Error::validation("to", "interval end precedes start"));
                }
                let idx: Vec<BasisIndex> = match sort {
                    IndexSort::Nat | IndexSort::Fin(_) => {
                        if *from < 0 {
                            return Err(Error::validation("from", "must be non-negative on this sort"));
                        }
                        (*from..=*to).map(|k| BasisIndex::Nat(k as u64)).collect()
                    }
                    IndexSort::Int => (*from..=*to).map(BasisIndex::Int).collect(),
                    _ => {
                        return Err(Error::Unsupported(format!("interval projections on sort {sort}")))
                    }
                };
                for i in &idx {
                    sort.check(i)?;
                }
                Projection::coordinate(idx)
            }
            ProjectionDoc::Box { n } => match sort {
                IndexSort::Nat2 => Projection::coordinate(
                    (0..*n).flat_map(|a| (0..*n).map(move |b| BasisIndex::Pair(a, b))),
                ),
                IndexSort::Tensor(a, b)
                    if matches!(**a, IndexSort::Nat) && matches!(**b, IndexSort::Nat) =>
                {
                    Projection::coordinate((0..*n).flat_map(|x| {
                        (0..*n).map(move |y| BasisIndex::tensor(BasisIndex::Nat(x), BasisIndex::Nat(y)))
                    }))
                }
                _ => Err(Error::Unsupported(format!("box projections on sort {sort}"))),
            },
        }
    }

    pub fn from_projection<T: Real>(p: &Projection<T>) -> Self {
        match p {
            Projection::Coordinate(s) => ProjectionDoc::Coordinate {
                indices: s.iter().map(index_to_json).collect(),
            },
            Projection::Frame(f) => ProjectionDoc::Frame {
                window: f.window.iter().map(index_to_json).collect(),
                columns: (0..f.rank())
                    .map(|c| {
                        f.columns
                            .column(c)
                            .iter()
                            .map(|z| {
                                ScalarDoc::Complex(crate::opmodel::ComplexDoc {
                                    re: to_f64(z.re),
                                    im: to_f64(z.im),
                                })
                            })
                            .collect()
                    })
                    .collect(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_frame, singular_values};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nat(v: &[u64]) -> Projection<f64> {
        Projection::coordinate(v.iter().map(|i| BasisIndex::Nat(*i))).unwrap()
    }

    fn window(n: u64) -> Vec<BasisIndex> {
        (0..n).map(BasisIndex::Nat).collect()
    }

    #[test]
    fn coordinate_rank_and_norm() {
        let p = Projection::<f64>::interval(&IndexSort::Nat, 10).unwrap();
        assert_eq!(p.rank(), 10);
        assert!((p.hs_norm() - 10f64.sqrt()).abs() < 1e-15);
        let b = Projection::<f64>::interval(&IndexSort::Nat2, 9).unwrap();
        assert_eq!(b.rank(), 9);
        let words = Projection::<f64>::coordinate(crate::basis::word_ball(2, 2)).unwrap();
        assert_eq!(words.rank(), 7);
        assert_eq!(Projection::<f64>::coordinate(vec![]), Err(Error::ZeroProjection));
        assert!(Projection::<f64>::zero().is_zero());
    }

    #[test]
    fn coordinate_join() {
        let j = join(&nat(&[0, 1]), &nat(&[1, 2]), 1e-10).unwrap();
        assert_eq!(j.projection, nat(&[0, 1, 2]));
        let p = nat(&[3, 5]);
        assert_eq!(join(&p, &p, 1e-10).unwrap().projection, p);
    }

    #[test]
    fn generic_frames_join_to_rank_four() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let w = window(6);
        let a = Projection::frame(w.clone(), random_frame(&mut rng, 6, 2)).unwrap();
        let b = Projection::frame(w.clone(), random_frame(&mut rng, 6, 2)).unwrap();
        let j = join(&a, &b, 1e-10).unwrap();
        assert_eq!(j.projection.rank(), 4);
        assert!(!j.ambiguous);
        // singular-value oracle on the stacked columns
        let mut stacked = DMatrix::zeros(6, 4);
        stacked.view_mut((0, 0), (6, 2)).copy_from(&a.columns_on(&w).unwrap());
        stacked.view_mut((0, 2), (6, 2)).copy_from(&b.columns_on(&w).unwrap());
        let numerical_rank = singular_values(stacked).into_iter().filter(|s| *s > 1e-10).count();
        assert_eq!(numerical_rank, 4);
        assert!(j.projection.dominates(&a, 1e-10));
        assert!(j.projection.dominates(&b, 1e-10));
        let f = j.projection.to_frame();
        let gram = f.columns().adjoint() * f.columns();
        assert!((gram - DMatrix::identity(4, 4)).norm() < 1e-10);
    }

    #[test]
    fn overlap_and_distance() {
        assert_eq!(overlap_norm(&nat(&[0, 1]), &nat(&[2, 3])), 0.0);
        let p = nat(&[0, 1]);
        assert_eq!(overlap_norm(&p, &p), 1.0);
        assert_eq!(hs_distance(&p, &p), 0.0);
        assert!((hs_distance(&nat(&[0]), &nat(&[1])) - 2f64.sqrt()).abs() < 1e-15);

        // rank-one frames: ‖uu* vv*‖ = |⟨u,v⟩|
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let w = window(5);
        let u = random_frame::<f64, _>(&mut rng, 5, 1);
        let v = random_frame::<f64, _>(&mut rng, 5, 1);
        let inner = (u.adjoint() * &v)[(0, 0)].modulus();
        let pu = Projection::frame(w.clone(), u).unwrap();
        let pv = Projection::frame(w.clone(), v).unwrap();
        assert!((overlap_norm(&pu, &pv) - inner).abs() < 1e-12);
        // dense oracle for the HS distance
        let dense = pu.matrix_on(&w).unwrap() - pv.matrix_on(&w).unwrap();
        assert!((hs_distance(&pu, &pv) - dense.norm()).abs() < 1e-12);
    }

    #[test]
    fn join_is_close_to_p_in_hs() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let w = window(8);
        for _ in 0..20 {
            let p = Projection::frame(w.clone(), random_frame(&mut rng, 8, 3)).unwrap();
            let q = Projection::frame(w.clone(), random_frame(&mut rng, 8, 2)).unwrap();
            let r = join(&p, &q, 1e-10).unwrap().projection;
            assert!(hs_distance(&r, &p) <= q.hs_norm() + 1e-10);
        }
    }

    #[test]
    fn frame_validation() {
        let w = window(2);
        let bad = DMatrix::from_element(2, 1, C::new(1.0, 0.0));
        assert!(Projection::<f64>::frame(w, bad).is_err());
    }

    #[test]
    fn docs_resolve() {
        let iv: ProjectionDoc = serde_json::from_str(r#"{"type":"interval","from":0,"to":63}"#).unwrap();
        assert_eq!(iv.resolve::<f64>(&IndexSort::Nat).unwrap().rank(), 64);
        let bx: ProjectionDoc = serde_json::from_str(r#"{"type":"box","n":8}"#).unwrap();
        assert_eq!(bx.resolve::<f64>(&IndexSort::Nat2).unwrap().rank(), 64);
        let fr: ProjectionDoc = serde_json::from_str(
            r#"{"type":"frame","window":[0,1],"columns":[[0.6,{"re":0,"im":0.8}]]}"#,
        )
        .unwrap();
        let p = fr.resolve::<f64>(&IndexSort::Nat).unwrap();
        assert_eq!(p.rank(), 1);
        let back = ProjectionDoc::from_projection(&p);
        assert_eq!(back.resolve::<f64>(&IndexSort::Nat).unwrap(), p);
        let words: ProjectionDoc =
            serde_json::from_str(r#"{"type":"coordinate","indices":["","1","21"]}"#).unwrap();
        assert_eq!(words.resolve::<f64>(&IndexSort::Word(2)).unwrap().rank(), 3);
    }
}

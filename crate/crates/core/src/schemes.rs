//! Constructions of (proper) Følner sequences: canonical interval and box
//! truncations, tensor and direct-sum lifts, the greedy nested construction
//! and the constant-rank merge.

use std::fmt;

use nalgebra::ComplexField;
use serde::{Deserialize, Serialize};

use crate::basis::{BasisIndex, IndexSort};
use crate::defect::{commutator_norms, hs_defect};
use crate::error::{Error, Result};
use crate::opmodel::{Operator, ToeplitzSymbol};
use crate::projlib::{join, join_all, overlap_norm, Projection};
use crate::scalar::{lit, to_f64, Real};

/// Slack allowed when comparing a measured defect with a certified bound.
pub const CERT_SLACK: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Interval,
    Tensor,
    DirectSum,
    Greedy,
    Merge,
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Interval => "interval",
            Scheme::Tensor => "tensor",
            Scheme::DirectSum => "direct_sum",
            Scheme::Greedy => "greedy",
            Scheme::Merge => "merge",
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SequenceRecord<T: Real> {
    pub step: usize,
    pub projection: Projection<T>,
    pub rank: usize,
    pub hs_defect: T,
    pub op_defect: Option<T>,
    pub scheme: Scheme,
    pub certified_bound: Option<T>,
}

fn check_certificate<T: Real>(step: usize, measured: T, bound: Option<T>) -> Result<()> {
    if let Some(b) = bound {
        if measured > b + lit(CERT_SLACK) {
            return Err(Error::CertificateViolation {
                step,
                measured: to_f64(measured),
                bound: to_f64(b),
            });
        }
    }
    Ok(())
}

/// Terms of the analytic bound for box truncations of a Toeplitz operator on
/// 𝕋², with `b_N = ⌈√N⌉`. `a1`, `a2` bound `N⁻²‖(1−P_N)T P_N‖₂²`; the mirror
/// terms are the same quantities for the adjoint symbol and bound
/// `N⁻²‖P_N T (1−P_N)‖₂²`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BoxProofTerms<T: Real> {
    pub b_n: u64,
    pub a1: T,
    pub a2: T,
    pub a1_mirror: T,
    pub a2_mirror: T,
}

impl<T: Real> BoxProofTerms<T> {
    pub fn total(&self) -> T {
        self.a1 + self.a2 + self.a1_mirror + self.a2_mirror
    }
}

/// Smallest integer `b` with `b² ≥ n`.
pub fn ceil_sqrt(n: u64) -> u64 {
    let mut b = (n as f64).sqrt() as u64;
    while b * b < n {
        b += 1;
    }
    while b > 0 && (b - 1) * (b - 1) >= n {
        b -= 1;
    }
    b
}

fn box_pair<T: Real>(symbol: &ToeplitzSymbol<T>, n: u64, b: u64) -> (T, T) {
    let mass = symbol.l2_mass();
    let tail = |axis: usize| {
        symbol
            .coeffs
            .iter()
            .filter(|(k, _)| {
                let s = if axis == 0 { k.0 } else { k.1 };
                s > b as i64
            })
            .fold(T::zero(), |acc, (_, a)| acc + a.modulus_squared())
    };
    let shared = lit::<T>(b as f64 / n as f64) * mass;
    (tail(0) + shared, tail(1) + shared)
}

pub fn box_proof_terms<T: Real>(symbol: &ToeplitzSymbol<T>, n: u64) -> BoxProofTerms<T> {
    let b_n = ceil_sqrt(n);
    let (a1, a2) = box_pair(symbol, n, b_n);
    let (a1_mirror, a2_mirror) = box_pair(&symbol.reflected(), n, b_n);
    BoxProofTerms { b_n, a1, a2, a1_mirror, a2_mirror }
}

/// Certified upper bound on φ for the canonical prefix of the given rank,
/// when one of the closed-form arguments applies.
pub fn interval_certificate<T: Real>(op: &Operator<T>, rank: usize) -> Option<T> {
    let n = lit::<T>(rank as f64);
    let root2 = lit::<T>(2.0).sqrt();
    match op {
        Operator::Identity => Some(T::zero()),
        Operator::UnilateralShift | Operator::BilateralShift => Some(root2 / n.sqrt()),
        Operator::WeightedShift { weights, .. } => {
            let sup = weights.iter().fold(T::zero(), |a, w| a.max(w.abs()));
            Some(root2 * sup / n.sqrt())
        }
        Operator::Toeplitz(s) if s.dim == 1 => {
            let c = s.coeffs.iter().fold(T::zero(), |acc, (k, a)| {
                acc + lit::<T>(k.0.unsigned_abs() as f64).sqrt() * a.modulus()
            });
            Some(root2 * c / n.sqrt())
        }
        Operator::Toeplitz(s) => {
            let side = (rank as f64).sqrt().round() as u64;
            (side * side == rank as u64).then(|| box_proof_terms(s, side).total().sqrt())
        }
        Operator::AcuteWedge(w) => {
            let count = lit::<T>(w.boundary_count(rank as u64) as f64);
            let sup = w.entry_sup();
            Some((lit::<T>(2.0) * sup * sup * count / n).sqrt())
        }
        Operator::Affine { lambda, inner, .. } => {
            interval_certificate(inner, rank).map(|c| c * lambda.modulus())
        }
        Operator::Adjoint(inner) => interval_certificate(inner, rank),
        _ => None,
    }
}

fn nondecreasing(ranks: &[usize]) -> Result<()> {
    if ranks.is_empty() {
        return Err(Error::Precondition("rank list is empty".into()));
    }
    if ranks[0] == 0 {
        return Err(Error::ZeroProjection);
    }
    if ranks.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Precondition("ranks must be nondecreasing".into()));
    }
    Ok(())
}

/// Canonical prefix projections of the requested ranks (intervals on ℕ₀ and
/// ℤ, boxes on ℕ₀² when the rank is a square, depth balls on words when the
/// rank is a ball size), with exact HS and operator-norm defects.
pub fn interval_sequence<T: Real>(op: &Operator<T>, ranks: &[usize]) -> Result<Vec<SequenceRecord<T>>> {
    nondecreasing(ranks)?;
    let sort = op.sort();
    let mut out = Vec::with_capacity(ranks.len());
    for (step, &r) in ranks.iter().enumerate() {
        let p = Projection::interval(&sort, r)?;
        let norms = commutator_norms(op, &p)?;
        let hs = norms.hs / lit::<T>(r as f64).sqrt();
        let cert = interval_certificate(op, r);
        check_certificate(step, hs, cert)?;
        out.push(SequenceRecord {
            step,
            projection: p,
            rank: r,
            hs_defect: hs,
            op_defect: Some(norms.op),
            scheme: Scheme::Interval,
            certified_bound: cert,
        });
    }
    Ok(out)
}

/// `P_n ⊗ Q_n` for a tensor product operator, each step checked against the
/// majorant φ(A,P_n)‖B‖ + ‖A‖φ(B,Q_n).
pub fn tensor_sequence<T: Real>(
    op: &Operator<T>,
    left: &[SequenceRecord<T>],
    right: &[SequenceRecord<T>],
) -> Result<Vec<SequenceRecord<T>>> {
    let Operator::Tensor(a, b) = op else {
        return Err(Error::Precondition("tensor_sequence needs a tensor product operator".into()));
    };
    if left.is_empty() || right.is_empty() {
        return Err(Error::Precondition("tensor_sequence needs nonempty sequences".into()));
    }
    if left.len() != right.len() {
        return Err(Error::Precondition(format!(
            "sequences differ in length ({} vs {})",
            left.len(),
            right.len()
        )));
    }
    let (na, nb) = (a.norm_bound(), b.norm_bound());
    let mut out = Vec::with_capacity(left.len());
    for (step, (l, r)) in left.iter().zip(right).enumerate() {
        l.projection.check_sort(&a.sort())?;
        r.projection.check_sort(&b.sort())?;
        let pa = hs_defect(a, &l.projection)?.value;
        let pb = hs_defect(b, &r.projection)?.value;
        let majorant = pa * nb + na * pb;
        let p = l.projection.tensor(&r.projection);
        let norms = commutator_norms(op, &p)?;
        let hs = norms.hs / p.hs_norm();
        check_certificate(step, hs, Some(majorant))?;
        out.push(SequenceRecord {
            step,
            rank: p.rank(),
            projection: p,
            hs_defect: hs,
            op_defect: Some(norms.op),
            scheme: Scheme::Tensor,
            certified_bound: Some(majorant),
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

/// Embeds each `P` of a sequence for one summand as `P ⊕ 0` (or `0 ⊕ P`).
pub fn lift_direct_sum<T: Real>(
    op: &Operator<T>,
    seq: &[SequenceRecord<T>],
    side: Side,
) -> Result<Vec<SequenceRecord<T>>> {
    let Operator::DirectSum(a, b) = op else {
        return Err(Error::Precondition("lift_direct_sum needs a direct sum operator".into()));
    };
    let summand = if side == Side::Left { a } else { b };
    let mut out = Vec::with_capacity(seq.len());
    for rec in seq {
        rec.projection.check_sort(&summand.sort())?;
        let own = hs_defect(summand, &rec.projection)?.value;
        let p = rec.projection.lift(side == Side::Right);
        let norms = commutator_norms(op, &p)?;
        let hs = norms.hs / p.hs_norm();
        if (hs - own).abs() > lit(1e-12) {
            return Err(Error::CertificateViolation {
                step: rec.step,
                measured: to_f64(hs),
                bound: to_f64(own),
            });
        }
        out.push(SequenceRecord {
            step: rec.step,
            rank: p.rank(),
            projection: p,
            hs_defect: hs,
            op_defect: Some(norms.op),
            scheme: Scheme::DirectSum,
            certified_bound: rec.certified_bound,
        });
    }
    Ok(out)
}

/// max over the set of φ(T,P).
pub fn max_defect<T: Real>(ops: &[Operator<T>], p: &Projection<T>) -> Result<T> {
    let mut worst = T::zero();
    for op in ops {
        worst = worst.max(hs_defect(op, p)?.value);
    }
    Ok(worst)
}

/// Given `Q` and `ε`, produces `R ≥ Q` with max φ(T,R) < ε, or gives up.
pub trait ExtensionOracle<T: Real>: Sync {
    fn name(&self) -> &'static str;

    fn extend(&self, ops: &[Operator<T>], start: &Projection<T>, epsilon: T) -> Result<Option<Projection<T>>>;
}

/// Returns the start projection when it already meets the target.
#[derive(Clone, Copy, Debug, Default)]
pub struct TrivialExtender;

impl<T: Real> ExtensionOracle<T> for TrivialExtender {
    fn name(&self) -> &'static str {
        "trivial"
    }

    fn extend(&self, ops: &[Operator<T>], start: &Projection<T>, epsilon: T) -> Result<Option<Projection<T>>> {
        Ok((max_defect(ops, start)? < epsilon).then(|| start.clone()))
    }
}

/// Enlarges to the shortest canonical prefix covering the start and meeting
/// the target: doubling, then bisection.
#[derive(Clone, Copy, Debug)]
pub struct IntervalExtender {
    pub max_rank: usize,
}

impl Default for IntervalExtender {
    fn default() -> Self {
        IntervalExtender { max_rank: 1 << 20 }
    }
}

/// Length of the shortest canonical prefix containing `support`.
fn covering_prefix(sort: &IndexSort, support: &[BasisIndex], limit: usize) -> Option<usize> {
    if support.is_empty() {
        return Some(1);
    }
    let mut r = support.len().max(1);
    loop {
        let r_cap = sort.capacity().map_or(r, |c| r.min(c));
        let prefix = sort.prefix(r_cap).ok()?;
        let pos: std::collections::HashMap<&BasisIndex, usize> =
            prefix.iter().enumerate().map(|(p, i)| (i, p)).collect();
        if let Some(last) = support.iter().map(|i| pos.get(i).copied()).collect::<Option<Vec<_>>>() {
            return last.into_iter().max().map(|m| m + 1);
        }
        if r_cap >= limit || Some(r_cap) == sort.capacity() {
            return None;
        }
        r = (2 * r).min(limit);
    }
}

impl<T: Real> ExtensionOracle<T> for IntervalExtender {
    fn name(&self) -> &'static str {
        "interval"
    }

    fn extend(&self, ops: &[Operator<T>], start: &Projection<T>, epsilon: T) -> Result<Option<Projection<T>>> {
        let Some(first) = ops.first() else {
            return Err(Error::Precondition("empty operator set".into()));
        };
        let sort = first.sort();
        let limit = sort.capacity().map_or(self.max_rank, |c| c.min(self.max_rank));
        let Some(lo) = covering_prefix(&sort, &start.support(), limit) else {
            return Ok(None);
        };
        let value = |r: usize| -> Result<T> { max_defect(ops, &Projection::interval(&sort, r)?) };
        if value(lo)? < epsilon {
            return Ok(Some(Projection::interval(&sort, lo)?));
        }
        let (mut bad, mut good) = (lo, None);
        let mut r = lo;
        while r < limit {
            r = (2 * r).min(limit);
            if value(r)? < epsilon {
                good = Some(r);
                break;
            }
            bad = r;
        }
        let Some(mut good) = good else {
            return Ok(None);
        };
        while good - bad > 1 {
            let mid = bad + (good - bad) / 2;
            if value(mid)? < epsilon {
                good = mid;
            } else {
                bad = mid;
            }
        }
        Ok(Some(Projection::interval(&sort, good)?))
    }
}

/// Why the greedy construction stopped early.
#[derive(Clone, Debug, PartialEq)]
pub struct GreedyFailure {
    /// 1-based step at which the extender failed.
    pub step: usize,
    pub epsilon: f64,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreedyOutcome<T: Real> {
    pub records: Vec<SequenceRecord<T>>,
    pub failure: Option<GreedyFailure>,
}

/// ε_n = 1/(n+1), n = 1..=steps.
pub fn default_epsilons<T: Real>(steps: usize) -> Vec<T> {
    (1..=steps).map(|n| T::one() / lit::<T>((n + 1) as f64)).collect()
}

/// Canonical prefixes of rank 1..=steps.
pub fn default_anchors<T: Real>(sort: &IndexSort, steps: usize) -> Result<Vec<Projection<T>>> {
    (1..=steps).map(|n| Projection::interval(sort, n)).collect()
}

/// Nested sequence with `P_{n+1} ≥ P_n ∨ L_n` and max φ(T,P_{n+1}) < ε_{n+1}.
/// Steps are 1-based; a failing extender ends the run with a marker.
pub fn greedy_proper_sequence<T: Real>(
    ops: &[Operator<T>],
    extender: &dyn ExtensionOracle<T>,
    epsilons: &[T],
    anchors: &[Projection<T>],
) -> Result<GreedyOutcome<T>> {
    if ops.is_empty() {
        return Err(Error::Precondition("empty operator set".into()));
    }
    if anchors.len() < epsilons.len() {
        return Err(Error::Precondition(format!(
            "{} anchors for {} steps",
            anchors.len(),
            epsilons.len()
        )));
    }
    let sort = ops[0].sort();
    for op in &ops[1..] {
        if op.sort() != sort {
            return Err(Error::SortMismatch { expected: sort.to_string(), found: op.sort().to_string() });
        }
    }
    for a in anchors {
        if a.is_zero() {
            return Err(Error::ZeroProjection);
        }
        a.check_sort(&sort)?;
    }
    let tol = lit::<T>(crate::projlib::JOIN_TOL);
    let mut records: Vec<SequenceRecord<T>> = Vec::new();
    for (n, (&eps, anchor)) in epsilons.iter().zip(anchors).enumerate() {
        let step = n + 1;
        let start = match records.last() {
            Some(prev) => join(&prev.projection, anchor, tol)?.projection,
            None => anchor.clone(),
        };
        let fail = |reason: String| GreedyFailure { step, epsilon: to_f64(eps), reason };
        let r = match extender.extend(ops, &start, eps) {
            Ok(Some(r)) => r,
            Ok(None) => {
                let reason = format!("{} extender found no projection below {}", extender.name(), to_f64(eps));
                return Ok(GreedyOutcome { records, failure: Some(fail(reason)) });
            }
            Err(e) => return Ok(GreedyOutcome { records, failure: Some(fail(e.to_string())) }),
        };
        if !r.dominates(&start, lit(1e-9)) {
            let reason = format!("{} extender returned a projection not dominating the start", extender.name());
            return Ok(GreedyOutcome { records, failure: Some(fail(reason)) });
        }
        let value = max_defect(ops, &r)?;
        if value >= eps {
            let reason = format!("extender result has defect {} ≥ {}", to_f64(value), to_f64(eps));
            return Ok(GreedyOutcome { records, failure: Some(fail(reason)) });
        }
        let op_defect = ops
            .iter()
            .map(|o| commutator_norms(o, &r).map(|c| c.op))
            .try_fold(T::zero(), |a, x| x.map(|v| a.max(v)))?;
        records.push(SequenceRecord {
            step,
            rank: r.rank(),
            projection: r,
            hs_defect: value,
            op_defect: Some(op_defect),
            scheme: Scheme::Greedy,
            certified_bound: Some(eps),
        });
    }
    Ok(GreedyOutcome { records, failure: None })
}

/// Result of a constant-rank merge.
#[derive(Clone, Debug, PartialEq)]
pub struct MergeResult<T: Real> {
    pub projection: Projection<T>,
    pub measured: T,
    /// 4·N·δ.
    pub certified_bound: T,
}

/// Merges `N` rank-`m` projections with defects below `δ` and pairwise
/// overlaps below `min(δ, 1/(3N³))` into their join, whose defect is
/// certified to stay below `4Nδ`.
pub fn merge_constant_rank<T: Real>(op: &Operator<T>, family: &[Projection<T>], delta: T) -> Result<MergeResult<T>> {
    let n = family.len();
    if n == 0 {
        return Err(Error::Precondition("empty family".into()));
    }
    if delta <= T::zero() {
        return Err(Error::Precondition("δ must be positive".into()));
    }
    let m = family[0].rank();
    if m == 0 {
        return Err(Error::ZeroProjection);
    }
    for (j, p) in family.iter().enumerate() {
        if p.rank() != m {
            return Err(Error::Precondition(format!("member {j} has rank {} but member 0 has rank {m}", p.rank())));
        }
        let phi = hs_defect(op, p)?.value;
        if phi >= delta {
            return Err(Error::Precondition(format!(
                "member {j} has defect {} ≥ δ = {}",
                to_f64(phi),
                to_f64(delta)
            )));
        }
    }
    let ceiling = delta.min(T::one() / lit::<T>(3.0 * (n as f64).powi(3)));
    for j in 0..n {
        for k in j + 1..n {
            let ov = overlap_norm(&family[j], &family[k]);
            if ov >= ceiling {
                return Err(Error::Precondition(format!(
                    "members {j} and {k} overlap: ‖P_{j}P_{k}‖ = {} ≥ {}",
                    to_f64(ov),
                    to_f64(ceiling)
                )));
            }
        }
    }
    let joined = join_all(family, lit(crate::projlib::JOIN_TOL))?.projection;
    if joined.rank() != n * m {
        return Err(Error::Precondition(format!(
            "join has rank {} instead of {}",
            joined.rank(),
            n * m
        )));
    }
    let measured = hs_defect(op, &joined)?.value;
    let certified_bound = lit::<T>(4.0 * n as f64) * delta;
    if measured >= certified_bound {
        return Err(Error::CertificateViolation {
            step: 0,
            measured: to_f64(measured),
            bound: to_f64(certified_bound),
        });
    }
    Ok(MergeResult { projection: joined, measured, certified_bound })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opmodel::OperatorSpecDoc;

    fn op(doc: &OperatorSpecDoc) -> Operator<f64> {
        Operator::from_doc(doc).unwrap()
    }

    #[test]
    fn ceil_sqrt_values() {
        let cases = [(1, 1), (2, 2), (4, 2), (5, 3), (8, 3), (9, 3), (10, 4), (64, 8)];
        for (n, b) in cases {
            assert_eq!(ceil_sqrt(n), b, "n = {n}");
        }
    }

    #[test]
    fn shift_intervals() {
        let recs = interval_sequence(&op(&OperatorSpecDoc::UnilateralShift), &[4, 16, 64]).unwrap();
        let want = [0.5, 0.25, 0.125];
        for (r, w) in recs.iter().zip(want) {
            assert!((r.hs_defect - w).abs() < 1e-15);
            assert!((r.op_defect.unwrap() - 1.0).abs() < 1e-12);
        }
        assert!(matches!(
            interval_sequence(&op(&OperatorSpecDoc::UnilateralShift), &[4, 2]),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn identity_intervals_vanish() {
        let recs = interval_sequence(&op(&OperatorSpecDoc::Identity), &[1, 3, 10]).unwrap();
        assert!(recs.iter().all(|r| r.hs_defect == 0.0));
    }

    #[test]
    fn unit_symbol_box_terms() {
        let t = op(&OperatorSpecDoc::Toeplitz {
            dim: 2,
            coeffs: vec![
                crate::opmodel::CoeffDoc { k: vec![1, 0], re: 1.0, im: 0.0 },
                crate::opmodel::CoeffDoc { k: vec![0, 1], re: 1.0, im: 0.0 },
            ],
        });
        let Operator::Toeplitz(s) = &t else { unreachable!() };
        for n in [4u64, 8] {
            let terms = box_proof_terms(s, n);
            let b = ceil_sqrt(n) as f64;
            assert!((terms.a1 + terms.a2 - 4.0 * b / n as f64).abs() < 1e-14);
            let rec = &interval_sequence(&t, &[(n * n) as usize]).unwrap()[0];
            assert!((rec.hs_defect.powi(2) - 2.0 / n as f64).abs() < 1e-14);
            assert!(rec.hs_defect.powi(2) <= terms.a1 + terms.a2);
        }
    }

    #[test]
    fn greedy_shift_needs_square_lengths() {
        let s = vec![op(&OperatorSpecDoc::UnilateralShift)];
        let eps: Vec<f64> = (1..=6).map(|n| 1.0 / n as f64).collect();
        let anchors = default_anchors(&IndexSort::Nat, 6).unwrap();
        let out = greedy_proper_sequence(&s, &IntervalExtender::default(), &eps, &anchors).unwrap();
        assert!(out.failure.is_none());
        for (n, r) in (1..=6).zip(&out.records) {
            assert!(r.rank >= n * n, "step {n}: rank {}", r.rank);
        }
        assert!(out.records.windows(2).all(|w| w[1].projection.dominates(&w[0].projection, 1e-12)));
    }

    #[test]
    fn greedy_identity_keeps_anchors() {
        let id = vec![op(&OperatorSpecDoc::Identity)];
        let anchors = default_anchors(&IndexSort::Nat, 4).unwrap();
        let out = greedy_proper_sequence(&id, &TrivialExtender, &default_epsilons(4), &anchors).unwrap();
        assert!(out.failure.is_none());
        for (r, a) in out.records.iter().zip(&anchors) {
            assert_eq!(&r.projection, a);
            assert_eq!(r.hs_defect, 0.0);
        }
    }

    #[test]
    fn greedy_reports_failure() {
        let s = vec![op(&OperatorSpecDoc::UnilateralShift)];
        let anchors = default_anchors(&IndexSort::Nat, 3).unwrap();
        let out = greedy_proper_sequence(&s, &TrivialExtender, &default_epsilons(3), &anchors).unwrap();
        assert!(out.records.is_empty());
        assert_eq!(out.failure.unwrap().step, 1);
    }

    #[test]
    fn merge_shift_translates() {
        let s = op(&OperatorSpecDoc::UnilateralShift);
        let family: Vec<Projection<f64>> = (0..3)
            .map(|j| Projection::coordinate((0..4).map(|i| BasisIndex::Nat(100 * j + i))).unwrap())
            .collect();
        let delta = 0.75;
        let out = merge_constant_rank(&s, &family, delta).unwrap();
        assert_eq!(out.projection.rank(), 12);
        assert_eq!(out.certified_bound, 12.0 * delta);
        assert!(out.measured < out.certified_bound);
        // five boundary entries: one after the block at 0, two for each translate
        assert!((out.measured - (5.0f64 / 12.0).sqrt()).abs() < 1e-14);

        let single = merge_constant_rank(&s, &family[..1], delta).unwrap();
        assert_eq!(single.projection, family[0]);
        assert_eq!(single.certified_bound, 4.0 * delta);

        let dup = vec![family[0].clone(), family[0].clone()];
        match merge_constant_rank(&s, &dup, delta) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("members 0 and 1")),
            other => panic!("{other:?}"),
        }
    }
}

//! Følner defects φ(T,P) = ‖[T,P]‖₂/‖P‖₂ and their trace- and operator-norm
//! variants.
//!
//! Entry access on every operator model is exact, so the commutator is formed
//! without truncation:
//! * coordinate `P` with support `W`: `[T,P]` splits into the block
//!   `(1−P)TP` (columns of `W` leaving `W`) and `−PT(1−P)` (rows of `W`
//!   reaching outside). The blocks have disjoint rows and columns, so the
//!   singular values of `[T,P]` are the union of theirs. Only boundary entries
//!   are touched.
//! * frame `P = VV*`: `[T,P] = A B*` with `A = [TV | V]`, `B = [V | −T*V]`,
//!   and the singular values come from `R_A R_B*` after two thin QRs.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::{ComplexField, DMatrix};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::basis::BasisIndex;
use crate::error::{Error, Result};
use crate::linalg::{nuclear_norm_of, singular_values};
use crate::opmodel::Operator;
use crate::projlib::Projection;
use crate::scalar::{lit, Real, C};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    Hs,
    Trace,
    Op,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefectReport<T: Real> {
    pub value: T,
    pub error_bound: T,
    pub exact: bool,
    pub norm_kind: NormKind,
    pub rank: usize,
    /// Number of basis vectors touched by the commutator computation.
    pub ambient_size: usize,
}

/// All three commutator norms of one `(T, P)` pair, unnormalized.
#[derive(Clone, Debug, PartialEq)]
pub struct CommutatorNorms<T: Real> {
    pub hs: T,
    pub trace: T,
    pub op: T,
    pub rank: usize,
    pub ambient_size: usize,
}

impl<T: Real> CommutatorNorms<T> {
    pub fn report(&self, kind: NormKind) -> DefectReport<T> {
        let r = lit::<T>(self.rank as f64);
        let value = match kind {
            NormKind::Hs => self.hs / r.sqrt(),
            NormKind::Trace => self.trace / r,
            NormKind::Op => self.op,
        };
        DefectReport {
            value,
            error_bound: T::zero(),
            exact: true,
            norm_kind: kind,
            rank: self.rank,
            ambient_size: self.ambient_size,
        }
    }
}

fn precheck<T: Real>(op: &Operator<T>, p: &Projection<T>) -> Result<()> {
    if p.is_zero() {
        return Err(Error::ZeroProjection);
    }
    p.check_sort(&op.sort())
}

/// ‖[T,P]‖₂² only; the cheapest path, used by search loops.
pub fn commutator_hs_sq<T: Real>(op: &Operator<T>, p: &Projection<T>) -> Result<T> {
    precheck(op, p)?;
    Ok(match p {
        Projection::Coordinate(w) => {
            let mut acc = T::zero();
            for (_, _, v) in coordinate_boundary(op, w) {
                acc += v.modulus_squared();
            }
            acc
        }
        Projection::Frame(_) => frame_core(op, p).0.norm_squared(),
    })
}

/// Boundary entries of a coordinate commutator as `(row, col, value)`,
/// tagged by block: `true` for `(1−P)TP`.
fn coordinate_blocks<T: Real>(
    op: &Operator<T>,
    w: &BTreeSet<BasisIndex>,
) -> (Vec<(BasisIndex, BasisIndex, C<T>)>, Vec<(BasisIndex, BasisIndex, C<T>)>) {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for j in w {
        for (i, v) in op.col(j) {
            if !w.contains(&i) {
                lower.push((i, j.clone(), v));
            }
        }
        for (k, v) in op.row_of(j) {
            if !w.contains(&k) {
                upper.push((j.clone(), k, v));
            }
        }
    }
    (lower, upper)
}

fn coordinate_boundary<T: Real>(
    op: &Operator<T>,
    w: &BTreeSet<BasisIndex>,
) -> impl Iterator<Item = (BasisIndex, BasisIndex, C<T>)> {
    let (a, b) = coordinate_blocks(op, w);
    a.into_iter().chain(b)
}

fn compress<T: Real>(entries: &[(BasisIndex, BasisIndex, C<T>)]) -> DMatrix<C<T>> {
    let mut rows: BTreeMap<&BasisIndex, usize> = BTreeMap::new();
    let mut cols: BTreeMap<&BasisIndex, usize> = BTreeMap::new();
    for (i, j, _) in entries {
        let nr = rows.len();
        rows.entry(i).or_insert(nr);
        let nc = cols.len();
        cols.entry(j).or_insert(nc);
    }
    let mut m = DMatrix::zeros(rows.len(), cols.len());
    for (i, j, v) in entries {
        m[(rows[i], cols[j])] += *v;
    }
    m
}

/// Small matrix whose singular values are those of `[T, VV*]`, and the size
/// of the expanded window.
fn frame_core<T: Real>(op: &Operator<T>, p: &Projection<T>) -> (DMatrix<C<T>>, usize) {
    let f = p.to_frame();
    let v = f.columns();
    let r = f.rank();
    let mut pos: HashMap<BasisIndex, usize> = HashMap::new();
    let mut labels: Vec<BasisIndex> = Vec::new();
    let mut slot = |idx: &BasisIndex, labels: &mut Vec<BasisIndex>| -> usize {
        *pos.entry(idx.clone()).or_insert_with(|| {
            labels.push(idx.clone());
            labels.len() - 1
        })
    };
    for idx in f.window() {
        slot(idx, &mut labels);
    }
    let mut tv: Vec<(usize, usize, C<T>)> = Vec::new();
    let mut tsv: Vec<(usize, usize, C<T>)> = Vec::new();
    for (a, j) in f.window().iter().enumerate() {
        for (i, t) in op.col(j) {
            tv.push((slot(&i, &mut labels), a, t));
        }
        for (k, t) in op.row_of(j) {
            tsv.push((slot(&k, &mut labels), a, t.conj()));
        }
    }
    let e = labels.len();
    let mut am = DMatrix::<C<T>>::zeros(e, 2 * r);
    let mut bm = DMatrix::<C<T>>::zeros(e, 2 * r);
    for a in 0..f.window().len() {
        for c in 0..r {
            am[(a, r + c)] = v[(a, c)];
            bm[(a, c)] = v[(a, c)];
        }
    }
    for (row, a, t) in tv {
        for c in 0..r {
            am[(row, c)] += t * v[(a, c)];
        }
    }
    for (row, a, t) in tsv {
        for c in 0..r {
            bm[(row, r + c)] -= t * v[(a, c)];
        }
    }
    if e <= 2 * r {
        return (&am * bm.adjoint(), e);
    }
    let ra = am.qr().r();
    let rb = bm.qr().r();
    (&ra * rb.adjoint(), e)
}

/// Exact HS, trace and operator norms of `[T,P]`.
pub fn commutator_norms<T: Real>(op: &Operator<T>, p: &Projection<T>) -> Result<CommutatorNorms<T>> {
    precheck(op, p)?;
    let (sv, hs_sq, ambient_size) = match p {
        Projection::Coordinate(w) => {
            let (lower, upper) = coordinate_blocks(op, w);
            let hs_sq = lower
                .iter()
                .chain(upper.iter())
                .fold(T::zero(), |a, (_, _, v)| a + v.modulus_squared());
            let touched: BTreeSet<&BasisIndex> = lower
                .iter()
                .map(|(i, _, _)| i)
                .chain(upper.iter().map(|(_, k, _)| k))
                .collect();
            let mut sv = singular_values(compress(&lower));
            sv.extend(singular_values(compress(&upper)));
            (sv, hs_sq, w.len() + touched.len())
        }
        Projection::Frame(_) => {
            let (k, e) = frame_core(op, p);
            let hs_sq = k.norm_squared();
            (singular_values(k), hs_sq, e)
        }
    };
    let top = sv.iter().fold(T::zero(), |a, s| a.max(*s));
    Ok(CommutatorNorms {
        hs: hs_sq.sqrt(),
        trace: nuclear_norm_of(&sv),
        op: top,
        rank: p.rank(),
        ambient_size,
    })
}

/// φ(T,P) = ‖[T,P]‖₂ / ‖P‖₂.
pub fn hs_defect<T: Real>(op: &Operator<T>, p: &Projection<T>) -> Result<DefectReport<T>> {
    precheck(op, p)?;
    let (hs_sq, ambient_size) = match p {
        Projection::Coordinate(w) => {
            let (lower, upper) = coordinate_blocks(op, w);
            let touched: BTreeSet<&BasisIndex> = lower
                .iter()
                .map(|(i, _, _)| i)
                .chain(upper.iter().map(|(_, k, _)| k))
                .collect();
            let s = lower
                .iter()
                .chain(upper.iter())
                .fold(T::zero(), |a, (_, _, v)| a + v.modulus_squared());
            (s, w.len() + touched.len())
        }
        Projection::Frame(_) => {
            let (k, e) = frame_core(op, p);
            (k.norm_squared(), e)
        }
    };
    Ok(CommutatorNorms {
        hs: hs_sq.sqrt(),
        trace: T::zero(),
        op: T::zero(),
        rank: p.rank(),
        ambient_size,
    }
    .report(NormKind::Hs))
}

/// ‖[T,P]‖₁ / ‖P‖₁.
pub fn trace_defect<T: Real>(op: &Operator<T>, p: &Projection<T>) -> Result<DefectReport<T>> {
    Ok(commutator_norms(op, p)?.report(NormKind::Trace))
}

/// ‖[T,P]‖ (not normalized).
pub fn opnorm_defect<T: Real>(op: &Operator<T>, p: &Projection<T>) -> Result<DefectReport<T>> {
    Ok(commutator_norms(op, p)?.report(NormKind::Op))
}

pub fn defect<T: Real>(op: &Operator<T>, p: &Projection<T>, kind: NormKind) -> Result<DefectReport<T>> {
    match kind {
        NormKind::Hs => hs_defect(op, p),
        NormKind::Trace => trace_defect(op, p),
        NormKind::Op => opnorm_defect(op, p),
    }
}

/// Defects of a family of projections, evaluated in parallel and returned in
/// input order.
pub fn batch_defects<T: Real>(
    op: &Operator<T>,
    family: &[Projection<T>],
    kind: NormKind,
) -> Vec<Result<DefectReport<T>>> {
    crate::parallel::install(|| family.par_iter().map(|p| defect(op, p, kind)).collect())
}

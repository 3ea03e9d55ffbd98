use std::collections::BTreeMap;

use nalgebra::ComplexField;
use nalgebra::DMatrix;

use super::spec::{EntryDoc, OperatorSpecDoc, ProfileDoc};
use crate::basis::{BasisIndex, IndexSort};
use crate::error::{Error, Result};
use crate::scalar::{cplx, lit, one, Real, C};

/// Nonzero entries of one column (or one row) of an operator matrix.
pub type Entries<T> = Vec<(BasisIndex, C<T>)>;

const MAX_NESTING: usize = 64;

/// Finite Fourier coefficient table of a Toeplitz symbol on 𝕋¹ or 𝕋².
/// One-dimensional symbols store `k₂ = 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ToeplitzSymbol<T: Real> {
    pub dim: u8,
    pub coeffs: BTreeMap<(i64, i64), C<T>>,
}

impl<T: Real> ToeplitzSymbol<T> {
    pub fn coeff(&self, k: (i64, i64)) -> Option<C<T>> {
        self.coeffs.get(&k).copied()
    }

    /// ‖F‖²_{L²} = Σ |a_k|².
    pub fn l2_mass(&self) -> T {
        self.coeffs
            .values()
            .fold(T::zero(), |acc, a| acc + a.modulus_squared())
    }

    /// Σ |a_k|, an upper bound for ‖T_F‖.
    pub fn l1_mass(&self) -> T {
        self.coeffs.values().fold(T::zero(), |acc, a| acc + a.modulus())
    }

    /// Symbol of the adjoint: a_k ↦ conj(a_{−k}).
    pub fn reflected(&self) -> Self {
        ToeplitzSymbol {
            dim: self.dim,
            coeffs: self
                .coeffs
                .iter()
                .map(|(&(k1, k2), a)| ((-k1, -k2), a.conj()))
                .collect(),
        }
    }
}

/// Sparse entry table of a band-limited operator, optionally repeated along
/// the diagonal with a fixed period.
#[derive(Clone, Debug, PartialEq)]
pub struct BandTable<T: Real> {
    pub band: u64,
    pub entries: BTreeMap<(u64, u64), C<T>>,
    pub period: Option<u64>,
}

impl<T: Real> BandTable<T> {
    fn get(&self, i: u64, j: u64) -> Option<C<T>> {
        if i.abs_diff(j) > self.band {
            return None;
        }
        let (i0, j0) = match self.period {
            Some(p) => {
                let t = i.min(j) / p;
                (i - t * p, j - t * p)
            }
            None => (i, j),
        };
        self.entries.get(&(i0, j0)).copied()
    }

    fn column(&self, j: u64) -> Vec<(u64, C<T>)> {
        (j.saturating_sub(self.band)..=j.saturating_add(self.band))
            .filter_map(|i| self.get(i, j).map(|v| (i, v)))
            .collect()
    }

    fn row(&self, i: u64) -> Vec<(u64, C<T>)> {
        (i.saturating_sub(self.band)..=i.saturating_add(self.band))
            .filter_map(|j| self.get(i, j).map(|v| (j, v)))
            .collect()
    }

    /// Schur test bound √(max row sum · max column sum); periodic tables are
    /// bounded by summing over residue classes.
    fn schur_bound(&self) -> T {
        let mut rows: BTreeMap<u64, T> = BTreeMap::new();
        let mut cols: BTreeMap<u64, T> = BTreeMap::new();
        for (&(i, j), v) in &self.entries {
            let (ri, cj) = match self.period {
                Some(p) => (i % p, j % p),
                None => (i, j),
            };
            *rows.entry(ri).or_insert_with(T::zero) += v.modulus();
            *cols.entry(cj).or_insert_with(T::zero) += v.modulus();
        }
        let max = |m: &BTreeMap<u64, T>| m.values().fold(T::zero(), |a, b| a.max(*b));
        (max(&rows) * max(&cols)).sqrt()
    }

    fn sup_entry(&self) -> T {
        self.entries.values().fold(T::zero(), |a, v| a.max(v.modulus()))
    }
}

/// Growth profile of an acute-wedge operator.
#[derive(Clone, Debug, PartialEq)]
pub enum WedgeProfile {
    Table(Vec<u64>),
    Power { scale: f64, exponent: f64 },
}

impl WedgeProfile {
    pub fn g(&self, j: u64) -> u64 {
        match self {
            WedgeProfile::Table(t) => t[(j as usize).min(t.len() - 1)],
            WedgeProfile::Power { scale, exponent } => {
                (scale * (j as f64).powf(*exponent)).floor() as u64
            }
        }
    }

    fn bounded_reach(&self) -> Option<u64> {
        match self {
            WedgeProfile::Table(t) => t.iter().copied().max(),
            WedgeProfile::Power { scale, exponent } => {
                if *scale == 0.0 || *exponent == 0.0 {
                    Some(scale.floor() as u64)
                } else {
                    None
                }
            }
        }
    }
}

/// Acute-wedge operator: entries vanish outside `|i − j| ≤ g(j)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Wedge<T: Real> {
    pub profile: WedgeProfile,
    pub jump: bool,
    by_col: BTreeMap<u64, Vec<(u64, C<T>)>>,
    by_row: BTreeMap<u64, Vec<(u64, C<T>)>>,
}

impl<T: Real> Wedge<T> {
    fn column(&self, j: u64) -> Vec<(u64, C<T>)> {
        let mut out = self.by_col.get(&j).cloned().unwrap_or_default();
        if self.jump {
            push_merge(&mut out, j + self.profile.g(j), one());
        }
        out
    }

    fn row(&self, i: u64) -> Vec<(u64, C<T>)> {
        let mut out = self.by_row.get(&i).cloned().unwrap_or_default();
        if self.jump {
            // j + g(j) is strictly increasing, so at most one preimage, and
            // g(j) <= g(i) bounds the search.
            let lo = i.saturating_sub(self.profile.g(i));
            if let Some(j) = (lo..=i).find(|&j| j + self.profile.g(j) == i) {
                push_merge(&mut out, j, one());
            }
        }
        out
    }

    fn schur_bound(&self) -> T {
        let sum = |m: &BTreeMap<u64, Vec<(u64, C<T>)>>| {
            m.values()
                .map(|l| l.iter().fold(T::zero(), |a, (_, v)| a + v.modulus()))
                .fold(T::zero(), |a, b| a.max(b))
        };
        (sum(&self.by_row) * sum(&self.by_col)).sqrt()
    }

    /// Largest entry modulus, counting the unit jump entries.
    pub fn entry_sup(&self) -> T {
        let table = self
            .by_col
            .values()
            .flat_map(|l| l.iter().map(|(_, v)| v.modulus()))
            .fold(T::zero(), |a, b| a.max(b));
        if self.jump {
            table.max(T::one())
        } else {
            table
        }
    }

    /// Number of wedge positions `(i, j)`, `|i−j| ≤ g(j)`, straddling the cut
    /// between `[0, n)` and `[n, ∞)`. With unit-bounded entries this bounds
    /// ‖[A, P_n]‖₂².
    pub fn boundary_count(&self, n: u64) -> u64 {
        // columns far past the cut cannot reach back once j - g(j) >= n
        let gmax = (0..=4 * n + 64).map(|j| self.profile.g(j)).max().unwrap_or(0);
        (0..n + gmax + 1)
            .map(|j| {
                let g = self.profile.g(j);
                if j < n {
                    (j + g + 1).saturating_sub(n)
                } else {
                    n.saturating_sub(j.saturating_sub(g))
                }
            })
            .sum()
    }
}

fn push_merge<T: Real>(out: &mut Vec<(u64, C<T>)>, idx: u64, v: C<T>) {
    if let Some(slot) = out.iter_mut().find(|(i, _)| *i == idx) {
        slot.1 += v;
    } else {
        out.push((idx, v));
    }
}

/// Band reach of an operator in the metric of [`IndexSort::distance`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BandProfile {
    /// `None` when entries may appear at unbounded distance (acute wedges).
    pub reach: Option<u64>,
    /// Entries beyond `reach` are guaranteed zero.
    pub exact: bool,
}

/// A validated, immutable structured operator on a countable basis.
#[derive(Clone, Debug, PartialEq)]
pub enum Operator<T: Real> {
    Identity,
    UnilateralShift,
    BilateralShift,
    WeightedShift { weights: Vec<T>, periodic: bool },
    Toeplitz(ToeplitzSymbol<T>),
    BandLimited(BandTable<T>),
    AcuteWedge(Wedge<T>),
    Cuntz { n: u8, k: u8, depth: u32 },
    Tensor(Box<Operator<T>>, Box<Operator<T>>),
    DirectSum(Box<Operator<T>>, Box<Operator<T>>),
    Affine { lambda: C<T>, mu: C<T>, inner: Box<Operator<T>> },
    Adjoint(Box<Operator<T>>),
    Dense(DMatrix<C<T>>),
}

fn nonzero<T: Real>(v: &C<T>) -> bool {
    !(v.re.is_zero() && v.im.is_zero())
}

fn finite(field: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::validation(field, "value must be finite"))
    }
}

fn entry_table<T: Real>(
    entries: &[EntryDoc],
    path: &str,
) -> Result<BTreeMap<(u64, u64), C<T>>> {
    let mut table = BTreeMap::new();
    for (pos, e) in entries.iter().enumerate() {
        let field = format!("{path}.entries[{pos}]");
        finite(&field, e.re)?;
        finite(&field, e.im)?;
        if table.insert((e.i, e.j), cplx::<T>(e.re, e.im)).is_some() {
            return Err(Error::validation(field, "duplicate entry"));
        }
    }
    Ok(table)
}

impl<T: Real> Operator<T> {
    /// Validates a document and builds the operator.
    pub fn from_doc(doc: &OperatorSpecDoc) -> Result<Self> {
        Self::from_doc_at(doc, "$", 0)
    }

    pub fn from_docs(docs: &[OperatorSpecDoc]) -> Result<Vec<Self>> {
        docs.iter()
            .enumerate()
            .map(|(i, d)| Self::from_doc_at(d, &format!("$[{i}]"), 0))
            .collect()
    }

    fn from_doc_at(doc: &OperatorSpecDoc, path: &str, depth: usize) -> Result<Self> {
        if depth > MAX_NESTING {
            return Err(Error::validation(path, "nesting too deep"));
        }
        let sub = |d: &OperatorSpecDoc, name: &str| {
            Self::from_doc_at(d, &format!("{path}.{name}"), depth + 1).map(Box::new)
        };
        Ok(match doc {
            OperatorSpecDoc::Identity => Operator::Identity,
            OperatorSpecDoc::UnilateralShift => Operator::UnilateralShift,
            OperatorSpecDoc::BilateralShift => Operator::BilateralShift,
            OperatorSpecDoc::WeightedShift { weights, periodic } => {
                if weights.is_empty() {
                    return Err(Error::validation(format!("{path}.weights"), "must be non-empty"));
                }
                for (i, w) in weights.iter().enumerate() {
                    finite(&format!("{path}.weights[{i}]"), *w)?;
                }
                Operator::WeightedShift {
                    weights: weights.iter().map(|w| lit(*w)).collect(),
                    periodic: *periodic,
                }
            }
            OperatorSpecDoc::Toeplitz { dim, coeffs } => {
                if !(1..=2).contains(dim) {
                    return Err(Error::validation(format!("{path}.dim"), "must be 1 or 2"));
                }
                let mut map = BTreeMap::new();
                for (pos, c) in coeffs.iter().enumerate() {
                    let field = format!("{path}.coeffs[{pos}]");
                    if c.k.len() != *dim as usize {
                        return Err(Error::validation(
                            format!("{field}.k"),
                            format!("expected {dim} components"),
                        ));
                    }
                    finite(&field, c.re)?;
                    finite(&field, c.im)?;
                    let key = (c.k[0], if *dim == 2 { c.k[1] } else { 0 });
                    if map.insert(key, cplx::<T>(c.re, c.im)).is_some() {
                        return Err(Error::validation(field, "duplicate coefficient"));
                    }
                }
                Operator::Toeplitz(ToeplitzSymbol { dim: *dim, coeffs: map })
            }
            OperatorSpecDoc::BandLimited { band, entries, period } => {
                let table = entry_table::<T>(entries, path)?;
                for (pos, e) in entries.iter().enumerate() {
                    if e.i.abs_diff(e.j) > *band {
                        return Err(Error::validation(
                            format!("{path}.entries[{pos}]"),
                            format!("|i-j| exceeds band {band}"),
                        ));
                    }
                    if let Some(p) = period {
                        if e.i.min(e.j) >= *p {
                            return Err(Error::validation(
                                format!("{path}.entries[{pos}]"),
                                "periodic tables list only entries with min(i,j) < period",
                            ));
                        }
                    }
                }
                if *period == Some(0) {
                    return Err(Error::validation(format!("{path}.period"), "must be positive"));
                }
                Operator::BandLimited(BandTable { band: *band, entries: table, period: *period })
            }
            OperatorSpecDoc::AcuteWedge { profile, entries, jump } => {
                let profile = match profile {
                    ProfileDoc::Table(t) => {
                        if t.is_empty() {
                            return Err(Error::validation(
                                format!("{path}.profile.table"),
                                "must be non-empty",
                            ));
                        }
                        if *jump && t.windows(2).any(|w| w[1] < w[0]) {
                            return Err(Error::validation(
                                format!("{path}.profile.table"),
                                "jump requires a nondecreasing profile",
                            ));
                        }
                        WedgeProfile::Table(t.clone())
                    }
                    ProfileDoc::Power { scale, exponent } => {
                        finite(&format!("{path}.profile.power.scale"), *scale)?;
                        if *scale < 0.0 {
                            return Err(Error::validation(
                                format!("{path}.profile.power.scale"),
                                "must be non-negative",
                            ));
                        }
                        if !(0.0..0.5).contains(exponent) {
                            return Err(Error::validation(
                                format!("{path}.profile.power.exponent"),
                                "must lie in [0, 1/2)",
                            ));
                        }
                        WedgeProfile::Power { scale: *scale, exponent: *exponent }
                    }
                };
                let table = entry_table::<T>(entries, path)?;
                let mut by_col: BTreeMap<u64, Vec<(u64, C<T>)>> = BTreeMap::new();
                let mut by_row: BTreeMap<u64, Vec<(u64, C<T>)>> = BTreeMap::new();
                for (pos, (&(i, j), v)) in table.iter().enumerate() {
                    if i.abs_diff(j) > profile.g(j) {
                        return Err(Error::validation(
                            format!("{path}.entries[{pos}]"),
                            "entry lies outside the wedge |i-j| <= g(j)",
                        ));
                    }
                    by_col.entry(j).or_default().push((i, *v));
                    by_row.entry(i).or_default().push((j, *v));
                }
                Operator::AcuteWedge(Wedge { profile, jump: *jump, by_col, by_row })
            }
            OperatorSpecDoc::Cuntz { n, k, depth } => {
                if *n < 2 {
                    return Err(Error::validation(format!("{path}.n"), "Cuntz family needs n >= 2"));
                }
                if *k < 1 || k > n {
                    return Err(Error::validation(format!("{path}.k"), "must lie in 1..=n"));
                }
                if *depth < 1 {
                    return Err(Error::validation(format!("{path}.depth"), "must be >= 1"));
                }
                Operator::Cuntz { n: *n, k: *k, depth: *depth }
            }
            OperatorSpecDoc::Tensor { left, right } => {
                Operator::Tensor(sub(left, "left")?, sub(right, "right")?)
            }
            OperatorSpecDoc::DirectSum { left, right } => {
                Operator::DirectSum(sub(left, "left")?, sub(right, "right")?)
            }
            OperatorSpecDoc::Affine { lambda, mu, inner } => {
                for (name, c) in [("lambda", lambda), ("mu", mu)] {
                    finite(&format!("{path}.{name}.re"), c.re)?;
                    finite(&format!("{path}.{name}.im"), c.im)?;
                }
                Operator::Affine {
                    lambda: cplx(lambda.re, lambda.im),
                    mu: cplx(mu.re, mu.im),
                    inner: sub(inner, "inner")?,
                }
            }
            OperatorSpecDoc::Adjoint { inner } => Operator::Adjoint(sub(inner, "inner")?),
            OperatorSpecDoc::Dense { matrix } => {
                let d = matrix.len();
                if d == 0 {
                    return Err(Error::validation(format!("{path}.matrix"), "must be non-empty"));
                }
                let mut m = DMatrix::zeros(d, d);
                for (i, row) in matrix.iter().enumerate() {
                    if row.len() != d {
                        return Err(Error::validation(
                            format!("{path}.matrix[{i}]"),
                            format!("expected {d} entries (square matrix)"),
                        ));
                    }
                    for (j, x) in row.iter().enumerate() {
                        let (re, im) = x.parts();
                        finite(&format!("{path}.matrix[{i}][{j}]"), re)?;
                        finite(&format!("{path}.matrix[{i}][{j}]"), im)?;
                        m[(i, j)] = cplx(re, im);
                    }
                }
                Operator::Dense(m)
            }
        })
    }

    /// λT + μI.
    pub fn affine(self, lambda: C<T>, mu: C<T>) -> Self {
        Operator::Affine { lambda, mu, inner: Box::new(self) }
    }

    /// Identity on the index set of `self`.
    pub fn identity_like(&self) -> Self {
        self.clone().affine(C::new(T::zero(), T::zero()), one())
    }

    pub fn adjoint(self) -> Self {
        Operator::Adjoint(Box::new(self))
    }

    pub fn tensor(self, right: Self) -> Self {
        Operator::Tensor(Box::new(self), Box::new(right))
    }

    pub fn direct_sum(self, right: Self) -> Self {
        Operator::DirectSum(Box::new(self), Box::new(right))
    }

    pub fn sort(&self) -> IndexSort {
        match self {
            Operator::Identity
            | Operator::UnilateralShift
            | Operator::WeightedShift { .. }
            | Operator::BandLimited(_)
            | Operator::AcuteWedge(_) => IndexSort::Nat,
            Operator::Toeplitz(s) => {
                if s.dim == 1 {
                    IndexSort::Nat
                } else {
                    IndexSort::Nat2
                }
            }
            Operator::BilateralShift => IndexSort::Int,
            Operator::Cuntz { n, .. } => IndexSort::Word(*n),
            Operator::Tensor(a, b) => IndexSort::Tensor(Box::new(a.sort()), Box::new(b.sort())),
            Operator::DirectSum(a, b) => IndexSort::Sum(Box::new(a.sort()), Box::new(b.sort())),
            Operator::Affine { inner, .. } | Operator::Adjoint(inner) => inner.sort(),
            Operator::Dense(m) => IndexSort::Fin(m.nrows()),
        }
    }

    /// Default ambient depth for word-indexed operators.
    pub fn word_depth(&self) -> Option<u32> {
        match self {
            Operator::Cuntz { depth, .. } => Some(*depth),
            Operator::Tensor(a, b) | Operator::DirectSum(a, b) => {
                a.word_depth().or_else(|| b.word_depth())
            }
            Operator::Affine { inner, .. } | Operator::Adjoint(inner) => inner.word_depth(),
            _ => None,
        }
    }

    fn weight(weights: &[T], periodic: bool, n: u64) -> T {
        let len = weights.len() as u64;
        if n < len {
            weights[n as usize]
        } else if periodic {
            weights[(n % len) as usize]
        } else {
            weights[weights.len() - 1]
        }
    }

    /// Nonzero entries of `A e_j`, i.e. pairs `(i, ⟨A e_j, e_i⟩)`.
    pub fn column(&self, j: &BasisIndex) -> Result<Entries<T>> {
        self.sort().check(j)?;
        Ok(self.col(j))
    }

    /// Nonzero entries of row `i`, i.e. pairs `(j, ⟨A e_j, e_i⟩)`.
    pub fn row(&self, i: &BasisIndex) -> Result<Entries<T>> {
        self.sort().check(i)?;
        Ok(self.row_of(i))
    }

    /// ⟨A e_j, e_i⟩.
    pub fn entry(&self, i: &BasisIndex, j: &BasisIndex) -> Result<C<T>> {
        let sort = self.sort();
        sort.check(i)?;
        sort.check(j)?;
        Ok(self
            .col(j)
            .into_iter()
            .find(|(r, _)| r == i)
            .map(|(_, v)| v)
            .unwrap_or_else(crate::scalar::zero))
    }

    // Callers guarantee `j` belongs to `self.sort()`.
    pub(crate) fn col(&self, j: &BasisIndex) -> Entries<T> {
        use BasisIndex as B;
        match (self, j) {
            (Operator::Identity, _) => vec![(j.clone(), one())],
            (Operator::UnilateralShift, B::Nat(n)) => vec![(B::Nat(n + 1), one())],
            (Operator::BilateralShift, B::Int(k)) => vec![(B::Int(k + 1), one())],
            (Operator::WeightedShift { weights, periodic }, B::Nat(n)) => {
                let w = Self::weight(weights, *periodic, *n);
                if w.is_zero() {
                    vec![]
                } else {
                    vec![(B::Nat(n + 1), C::new(w, T::zero()))]
                }
            }
            (Operator::Toeplitz(s), B::Nat(j)) => s
                .coeffs
                .iter()
                .filter_map(|(&(k, _), a)| {
                    let i = *j as i64 + k;
                    (i >= 0 && nonzero(a)).then(|| (B::Nat(i as u64), *a))
                })
                .collect(),
            (Operator::Toeplitz(s), B::Pair(j1, j2)) => s
                .coeffs
                .iter()
                .filter_map(|(&(k1, k2), a)| {
                    let (i1, i2) = (*j1 as i64 + k1, *j2 as i64 + k2);
                    (i1 >= 0 && i2 >= 0 && nonzero(a)).then(|| (B::Pair(i1 as u64, i2 as u64), *a))
                })
                .collect(),
            (Operator::BandLimited(t), B::Nat(j)) => {
                t.column(*j).into_iter().map(|(i, v)| (B::Nat(i), v)).collect()
            }
            (Operator::AcuteWedge(w), B::Nat(j)) => w
                .column(*j)
                .into_iter()
                .filter(|(_, v)| nonzero(v))
                .map(|(i, v)| (B::Nat(i), v))
                .collect(),
            (Operator::Cuntz { k, .. }, B::Word(w)) => {
                let mut image = Vec::with_capacity(w.len() + 1);
                image.push(*k);
                image.extend_from_slice(w);
                vec![(B::Word(image), one())]
            }
            (Operator::Tensor(a, b), B::Tensor(ja, jb)) => {
                let ca = a.col(ja);
                let cb = b.col(jb);
                let mut out = Vec::with_capacity(ca.len() * cb.len());
                for (ia, va) in &ca {
                    for (ib, vb) in &cb {
                        out.push((B::tensor(ia.clone(), ib.clone()), *va * *vb));
                    }
                }
                out
            }
            (Operator::DirectSum(a, _), B::Left(x)) => {
                a.col(x).into_iter().map(|(i, v)| (B::left(i), v)).collect()
            }
            (Operator::DirectSum(_, b), B::Right(x)) => {
                b.col(x).into_iter().map(|(i, v)| (B::right(i), v)).collect()
            }
            (Operator::Affine { lambda, mu, inner }, _) => {
                let mut out: Entries<T> = if nonzero(lambda) {
                    inner.col(j).into_iter().map(|(i, v)| (i, v * *lambda)).collect()
                } else {
                    vec![]
                };
                if nonzero(mu) {
                    if let Some(slot) = out.iter_mut().find(|(i, _)| i == j) {
                        slot.1 += *mu;
                    } else {
                        out.push((j.clone(), *mu));
                    }
                }
                out.retain(|(_, v)| nonzero(v));
                out
            }
            (Operator::Adjoint(inner), _) => {
                inner.row_of(j).into_iter().map(|(i, v)| (i, v.conj())).collect()
            }
            (Operator::Dense(m), B::Nat(j)) => {
                let j = *j as usize;
                (0..m.nrows())
                    .filter(|&i| nonzero(&m[(i, j)]))
                    .map(|i| (B::Nat(i as u64), m[(i, j)]))
                    .collect()
            }
            _ => unreachable!("index {j} outside operator sort"),
        }
    }

    pub(crate) fn row_of(&self, i: &BasisIndex) -> Entries<T> {
        use BasisIndex as B;
        match (self, i) {
            (Operator::Identity, _) => vec![(i.clone(), one())],
            (Operator::UnilateralShift, B::Nat(n)) => {
                if *n == 0 {
                    vec![]
                } else {
                    vec![(B::Nat(n - 1), one())]
                }
            }
            (Operator::BilateralShift, B::Int(k)) => vec![(B::Int(k - 1), one())],
            (Operator::WeightedShift { weights, periodic }, B::Nat(n)) => {
                if *n == 0 {
                    return vec![];
                }
                let w = Self::weight(weights, *periodic, n - 1);
                if w.is_zero() {
                    vec![]
                } else {
                    vec![(B::Nat(n - 1), C::new(w, T::zero()))]
                }
            }
            (Operator::Toeplitz(s), B::Nat(i)) => s
                .coeffs
                .iter()
                .filter_map(|(&(k, _), a)| {
                    let j = *i as i64 - k;
                    (j >= 0 && nonzero(a)).then(|| (B::Nat(j as u64), *a))
                })
                .collect(),
            (Operator::Toeplitz(s), B::Pair(i1, i2)) => s
                .coeffs
                .iter()
                .filter_map(|(&(k1, k2), a)| {
                    let (j1, j2) = (*i1 as i64 - k1, *i2 as i64 - k2);
                    (j1 >= 0 && j2 >= 0 && nonzero(a)).then(|| (B::Pair(j1 as u64, j2 as u64), *a))
                })
                .collect(),
            (Operator::BandLimited(t), B::Nat(i)) => {
                t.row(*i).into_iter().map(|(j, v)| (B::Nat(j), v)).collect()
            }
            (Operator::AcuteWedge(w), B::Nat(i)) => w
                .row(*i)
                .into_iter()
                .filter(|(_, v)| nonzero(v))
                .map(|(j, v)| (B::Nat(j), v))
                .collect(),
            (Operator::Cuntz { k, .. }, B::Word(w)) => {
                if w.first() == Some(k) {
                    vec![(B::Word(w[1..].to_vec()), one())]
                } else {
                    vec![]
                }
            }
            (Operator::Tensor(a, b), B::Tensor(ia, ib)) => {
                let ra = a.row_of(ia);
                let rb = b.row_of(ib);
                let mut out = Vec::with_capacity(ra.len() * rb.len());
                for (ja, va) in &ra {
                    for (jb, vb) in &rb {
                        out.push((B::tensor(ja.clone(), jb.clone()), *va * *vb));
                    }
                }
                out
            }
            (Operator::DirectSum(a, _), B::Left(x)) => {
                a.row_of(x).into_iter().map(|(j, v)| (B::left(j), v)).collect()
            }
            (Operator::DirectSum(_, b), B::Right(x)) => {
                b.row_of(x).into_iter().map(|(j, v)| (B::right(j), v)).collect()
            }
            (Operator::Affine { lambda, mu, inner }, _) => {
                let mut out: Entries<T> = if nonzero(lambda) {
                    inner.row_of(i).into_iter().map(|(j, v)| (j, v * *lambda)).collect()
                } else {
                    vec![]
                };
                if nonzero(mu) {
                    if let Some(slot) = out.iter_mut().find(|(j, _)| j == i) {
                        slot.1 += *mu;
                    } else {
                        out.push((i.clone(), *mu));
                    }
                }
                out.retain(|(_, v)| nonzero(v));
                out
            }
            (Operator::Adjoint(inner), _) => {
                inner.col(i).into_iter().map(|(j, v)| (j, v.conj())).collect()
            }
            (Operator::Dense(m), B::Nat(i)) => {
                let i = *i as usize;
                (0..m.ncols())
                    .filter(|&j| nonzero(&m[(i, j)]))
                    .map(|j| (B::Nat(j as u64), m[(i, j)]))
                    .collect()
            }
            _ => unreachable!("index {i} outside operator sort"),
        }
    }

    /// Certified upper bound for the operator norm.
    pub fn norm_bound(&self) -> T {
        match self {
            Operator::Identity
            | Operator::UnilateralShift
            | Operator::BilateralShift
            | Operator::Cuntz { .. } => T::one(),
            Operator::WeightedShift { weights, .. } => {
                weights.iter().fold(T::zero(), |a, w| a.max(w.abs()))
            }
            Operator::Toeplitz(s) => s.l1_mass(),
            Operator::BandLimited(t) => {
                let width = lit::<T>((2 * t.band + 1) as f64) * t.sup_entry();
                width.min(t.schur_bound())
            }
            Operator::AcuteWedge(w) => {
                w.schur_bound() + if w.jump { T::one() } else { T::zero() }
            }
            Operator::Tensor(a, b) => a.norm_bound() * b.norm_bound(),
            Operator::DirectSum(a, b) => a.norm_bound().max(b.norm_bound()),
            Operator::Affine { lambda, mu, inner } => {
                let inner_norm = if nonzero(lambda) { inner.norm_bound() } else { T::zero() };
                lambda.modulus() * inner_norm + mu.modulus()
            }
            Operator::Adjoint(inner) => inner.norm_bound(),
            Operator::Dense(m) => {
                let frob = m.norm();
                let sv = crate::linalg::singular_values(m.clone());
                let top = sv.iter().fold(T::zero(), |a, s| a.max(*s));
                frob.min(top * (T::one() + lit(1e-10)) + T::default_epsilon())
            }
        }
    }

    pub fn band_profile(&self) -> BandProfile {
        let exact = |reach| BandProfile { reach: Some(reach), exact: true };
        match self {
            Operator::Identity => exact(0),
            Operator::UnilateralShift
            | Operator::BilateralShift
            | Operator::WeightedShift { .. }
            | Operator::Cuntz { .. } => exact(1),
            Operator::Toeplitz(s) => exact(
                s.coeffs
                    .keys()
                    .map(|(k1, k2)| k1.unsigned_abs().max(k2.unsigned_abs()))
                    .max()
                    .unwrap_or(0),
            ),
            Operator::BandLimited(t) => exact(t.band),
            Operator::AcuteWedge(w) => {
                let table_reach = w.by_col.iter().flat_map(|(j, l)| l.iter().map(move |(i, _)| i.abs_diff(*j))).max().unwrap_or(0);
                match w.profile.bounded_reach() {
                    Some(r) => exact(r.max(table_reach)),
                    None if !w.jump => exact(table_reach),
                    None => BandProfile { reach: None, exact: true },
                }
            }
            Operator::Tensor(a, b) | Operator::DirectSum(a, b) => {
                let (pa, pb) = (a.band_profile(), b.band_profile());
                BandProfile {
                    reach: pa.reach.zip(pb.reach).map(|(x, y)| x.max(y)),
                    exact: pa.exact && pb.exact,
                }
            }
            Operator::Affine { lambda, inner, .. } => {
                if nonzero(lambda) {
                    inner.band_profile()
                } else {
                    exact(0)
                }
            }
            Operator::Adjoint(inner) => inner.band_profile(),
            Operator::Dense(m) => {
                let mut reach = 0u64;
                for j in 0..m.ncols() {
                    for i in 0..m.nrows() {
                        if nonzero(&m[(i, j)]) {
                            reach = reach.max(i.abs_diff(j) as u64);
                        }
                    }
                }
                exact(reach)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::opmodel::spec::ComplexDoc;
    use BasisIndex as B;

    fn op(doc: OperatorSpecDoc) -> Operator<f64> {
        Operator::from_doc(&doc).unwrap()
    }

    #[test]
    fn shift_entries() {
        let s = op(OperatorSpecDoc::UnilateralShift);
        assert_eq!(s.entry(&B::Nat(5), &B::Nat(4)).unwrap(), one());
        assert_eq!(s.entry(&B::Nat(4), &B::Nat(5)).unwrap().re, 0.0);
        assert_eq!(s.band_profile(), BandProfile { reach: Some(1), exact: true });
        assert_eq!(s.norm_bound(), 1.0);
    }

    /// Oracle: multiply z^j by the symbol and read off the coefficient of z^i.
    fn fourier_oracle(coeffs: &[(i64, f64)], i: i64, j: i64) -> f64 {
        let mut product = BTreeMap::new();
        for (k, a) in coeffs {
            *product.entry(k + j).or_insert(0.0) += a;
        }
        if i < 0 {
            return 0.0;
        }
        *product.get(&i).unwrap_or(&0.0)
    }

    #[test]
    fn toeplitz_entries_match_fourier_oracle() {
        let coeffs = [(2, 3.0), (-1, 0.5), (0, -1.0)];
        let t = op(OperatorSpecDoc::toeplitz1(&coeffs));
        for i in 0..12i64 {
            for j in 0..12i64 {
                let got = t.entry(&B::Nat(i as u64), &B::Nat(j as u64)).unwrap();
                assert_eq!(got.re, fourier_oracle(&coeffs, i, j), "({i},{j})");
            }
        }
        assert_eq!(t.entry(&B::Nat(7), &B::Nat(5)).unwrap().re, 3.0);
    }

    #[test]
    fn affine_puts_mu_on_diagonal() {
        let a = op(OperatorSpecDoc::Affine {
            lambda: ComplexDoc::real(2.0),
            mu: ComplexDoc { re: 0.0, im: 1.0 },
            inner: Box::new(OperatorSpecDoc::UnilateralShift),
        });
        assert_eq!(a.entry(&B::Nat(0), &B::Nat(0)).unwrap(), C::new(0.0, 1.0));
        assert_eq!(a.entry(&B::Nat(1), &B::Nat(0)).unwrap(), C::new(2.0, 0.0));
        let three = op(OperatorSpecDoc::Affine {
            lambda: ComplexDoc::real(3.0),
            mu: ComplexDoc::real(0.0),
            inner: Box::new(OperatorSpecDoc::UnilateralShift),
        });
        assert_eq!(three.norm_bound(), 3.0);
    }

    #[test]
    fn sort_mismatch_is_reported() {
        let s = op(OperatorSpecDoc::UnilateralShift);
        assert!(matches!(
            s.entry(&B::Int(1), &B::Nat(0)),
            Err(Error::SortMismatch { .. })
        ));
    }

    #[test]
    fn validation_names_field() {
        let bad = OperatorSpecDoc::Tensor {
            left: Box::new(OperatorSpecDoc::UnilateralShift),
            right: Box::new(OperatorSpecDoc::Cuntz { n: 1, k: 1, depth: 4 }),
        };
        match Operator::<f64>::from_doc(&bad) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "$.right.n"),
            other => panic!("unexpected {other:?}"),
        }
        let inf = OperatorSpecDoc::WeightedShift { weights: vec![1.0, f64::INFINITY], periodic: false };
        match Operator::<f64>::from_doc(&inf) {
            Err(Error::Validation { field, .. }) => assert_eq!(field, "$.weights[1]"),
            other => panic!("unexpected {other:?}"),
        }
        let outside = OperatorSpecDoc::BandLimited {
            band: 1,
            entries: vec![EntryDoc { i: 0, j: 3, re: 1.0, im: 0.0 }],
            period: None,
        };
        assert!(Operator::<f64>::from_doc(&outside).is_err());
    }

    #[test]
    fn weighted_shift_weights_extend() {
        let w = op(OperatorSpecDoc::WeightedShift { weights: vec![1.0, 2.0], periodic: true });
        assert_eq!(w.entry(&B::Nat(6), &B::Nat(5)).unwrap().re, 2.0);
        let w = op(OperatorSpecDoc::WeightedShift { weights: vec![1.0, 2.0, 0.5], periodic: false });
        assert_eq!(w.entry(&B::Nat(10), &B::Nat(9)).unwrap().re, 0.5);
        assert_eq!(w.norm_bound(), 2.0);
    }

    #[test]
    fn periodic_band_table_repeats() {
        let b = op(OperatorSpecDoc::BandLimited {
            band: 1,
            entries: vec![
                EntryDoc { i: 1, j: 0, re: 2.0, im: 0.0 },
                EntryDoc { i: 0, j: 1, re: -1.0, im: 0.0 },
            ],
            period: Some(2),
        });
        assert_eq!(b.entry(&B::Nat(5), &B::Nat(4)).unwrap().re, 2.0);
        assert_eq!(b.entry(&B::Nat(4), &B::Nat(5)).unwrap().re, -1.0);
        assert_eq!(b.entry(&B::Nat(6), &B::Nat(5)).unwrap().re, 0.0);
    }

    #[test]
    fn wedge_jump_rows_and_columns_agree() {
        let w = op(OperatorSpecDoc::AcuteWedge {
            profile: ProfileDoc::Power { scale: 1.0, exponent: 0.4 },
            entries: vec![],
            jump: true,
        });
        for j in 0..300u64 {
            for (i, v) in w.column(&B::Nat(j)).unwrap() {
                assert!(w.row(&i).unwrap().contains(&(B::Nat(j), v)));
            }
        }
        assert!(w.band_profile().reach.is_none());
    }

    #[test]
    fn cuntz_rows_and_columns() {
        let s2 = op(OperatorSpecDoc::Cuntz { n: 2, k: 2, depth: 4 });
        assert_eq!(s2.column(&B::Word(vec![1])).unwrap(), vec![(B::Word(vec![2, 1]), one())]);
        assert_eq!(s2.row(&B::Word(vec![2, 1])).unwrap(), vec![(B::Word(vec![1]), one())]);
        assert!(s2.row(&B::Word(vec![1, 2])).unwrap().is_empty());
        assert!(s2.row(&B::Word(vec![])).unwrap().is_empty());
    }
}

//! Countable orthonormal bases: index values, index sorts and their canonical
//! enumeration order.

use std::fmt;

use serde_json::Value;

use crate::error::{Error, Result};

/// A single basis vector label.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BasisIndex {
    /// e_n, n ∈ ℕ₀ (also used for finite dimensional spaces).
    Nat(u64),
    /// e_k, k ∈ ℤ.
    Int(i64),
    /// e_{k₁k₂} on ℕ₀².
    Pair(u64, u64),
    /// Fock-space word over the alphabet {1, …, n}; the empty word is the vacuum.
    Word(Vec<u8>),
    /// Index of the left summand of a direct sum.
    Left(Box<BasisIndex>),
    /// Index of the right summand of a direct sum.
    Right(Box<BasisIndex>),
    /// e_a ⊗ e_b.
    Tensor(Box<BasisIndex>, Box<BasisIndex>),
}

impl BasisIndex {
    pub fn left(i: BasisIndex) -> Self {
        BasisIndex::Left(Box::new(i))
    }

    pub fn right(i: BasisIndex) -> Self {
        BasisIndex::Right(Box::new(i))
    }

    pub fn tensor(a: BasisIndex, b: BasisIndex) -> Self {
        BasisIndex::Tensor(Box::new(a), Box::new(b))
    }
}

impl fmt::Display for BasisIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BasisIndex::Nat(n) => write!(f, "{n}"),
            BasisIndex::Int(k) => write!(f, "{k}"),
            BasisIndex::Pair(a, b) => write!(f, "({a},{b})"),
            BasisIndex::Word(w) => {
                write!(f, "w:")?;
                for (pos, l) in w.iter().enumerate() {
                    if pos > 0 && w.len() > 1 && *l > 9 {
                        write!(f, ".")?;
                    }
                    write!(f, "{l}")?;
                }
                Ok(())
            }
            BasisIndex::Left(i) => write!(f, "L({i})"),
            BasisIndex::Right(i) => write!(f, "R({i})"),
            BasisIndex::Tensor(a, b) => write!(f, "({a}⊗{b})"),
        }
    }
}

/// The index set an operator acts on. Every operator fixes exactly one sort.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum IndexSort {
    Nat,
    /// ℂᵈ with indices 0..d.
    Fin(usize),
    Int,
    Nat2,
    /// Words over an alphabet of the given size.
    Word(u8),
    Sum(Box<IndexSort>, Box<IndexSort>),
    Tensor(Box<IndexSort>, Box<IndexSort>),
}

impl fmt::Display for IndexSort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            IndexSort::Nat => write!(f, "nat"),
            IndexSort::Fin(d) => write!(f, "fin({d})"),
            IndexSort::Int => write!(f, "int"),
            IndexSort::Nat2 => write!(f, "nat2"),
            IndexSort::Word(n) => write!(f, "word({n})"),
            IndexSort::Sum(a, b) => write!(f, "sum({a},{b})"),
            IndexSort::Tensor(a, b) => write!(f, "tensor({a},{b})"),
        }
    }
}

impl IndexSort {
    /// Whether `idx` is a label of this sort.
    pub fn contains(&self, idx: &BasisIndex) -> bool {
        match (self, idx) {
            (IndexSort::Nat, BasisIndex::Nat(_)) => true,
            (IndexSort::Fin(d), BasisIndex::Nat(i)) => (*i as usize) < *d,
            (IndexSort::Int, BasisIndex::Int(_)) => true,
            (IndexSort::Nat2, BasisIndex::Pair(_, _)) => true,
            (IndexSort::Word(n), BasisIndex::Word(w)) => w.iter().all(|l| *l >= 1 && l <= n),
            (IndexSort::Sum(a, _), BasisIndex::Left(i)) => a.contains(i),
            (IndexSort::Sum(_, b), BasisIndex::Right(i)) => b.contains(i),
            (IndexSort::Tensor(a, b), BasisIndex::Tensor(i, j)) => a.contains(i) && b.contains(j),
            _ => false,
        }
    }

    pub(crate) fn check(&self, idx: &BasisIndex) -> Result<()> {
        if self.contains(idx) {
            Ok(())
        } else {
            Err(Error::SortMismatch {
                expected: self.to_string(),
                found: idx.to_string(),
            })
        }
    }

    /// Number of basis vectors, `None` when infinite.
    pub fn capacity(&self) -> Option<usize> {
        match self {
            IndexSort::Fin(d) => Some(*d),
            IndexSort::Sum(a, b) => Some(a.capacity()?.checked_add(b.capacity()?)?),
            IndexSort::Tensor(a, b) => Some(a.capacity()?.checked_mul(b.capacity()?)?),
            _ => None,
        }
    }

    /// First `r` basis labels in canonical order.
    ///
    /// The order is chosen so that prefixes are the natural exhausting windows:
    /// `[0, r)` on ℕ₀, centred intervals on ℤ, boxes `[0,N)²` at `r = N²` on
    /// ℕ₀² (shells of constant `max(k₁,k₂)`, row-major inside a shell), balls
    /// of words in shortlex order, alternation across direct summands and
    /// shells of position pairs for tensor products.
    pub fn prefix(&self, r: usize) -> Result<Vec<BasisIndex>> {
        if let Some(cap) = self.capacity() {
            if r > cap {
                return Err(Error::InvalidWindow(format!(
                    "requested {r} basis vectors from {self} which has only {cap}"
                )));
            }
        }
        let out = match self {
            IndexSort::Nat | IndexSort::Fin(_) => (0..r as u64).map(BasisIndex::Nat).collect(),
            IndexSort::Int => (0..r as i64)
                .map(|p| {
                    // 0, -1, 1, -2, 2, ...
                    let k = if p % 2 == 0 { p / 2 } else { -(p + 1) / 2 };
                    BasisIndex::Int(k)
                })
                .collect(),
            IndexSort::Nat2 => shell_positions(r, usize::MAX, usize::MAX)
                .into_iter()
                .map(|(a, b)| BasisIndex::Pair(a as u64, b as u64))
                .collect(),
            IndexSort::Word(n) => words_shortlex(*n, r),
            IndexSort::Sum(a, b) => {
                let la = a.capacity().map_or(r, |c| c.min(r));
                let lb = b.capacity().map_or(r, |c| c.min(r));
                let left = a.prefix(la)?;
                let right = b.prefix(lb)?;
                let mut out = Vec::with_capacity(r);
                let (mut li, mut ri) = (left.into_iter(), right.into_iter());
                while out.len() < r {
                    let mut progressed = false;
                    if let Some(x) = li.next() {
                        out.push(BasisIndex::left(x));
                        progressed = true;
                    }
                    if out.len() < r {
                        if let Some(y) = ri.next() {
                            out.push(BasisIndex::right(y));
                            progressed = true;
                        }
                    }
                    if !progressed {
                        break;
                    }
                }
                out
            }
            IndexSort::Tensor(a, b) => {
                let la = a.capacity().map_or(r, |c| c.min(r));
                let lb = b.capacity().map_or(r, |c| c.min(r));
                let left = a.prefix(la)?;
                let right = b.prefix(lb)?;
                shell_positions(r, la, lb)
                    .into_iter()
                    .map(|(p, q)| BasisIndex::tensor(left[p].clone(), right[q].clone()))
                    .collect()
            }
        };
        Ok(out)
    }

    /// Distance between two labels in the metric used for band accounting:
    /// |i−j| on ℕ₀/ℤ, Chebyshev distance on ℕ₀², tree distance on words
    /// (the parent of `kw` is `w`), `None` across direct summands.
    pub fn distance(&self, a: &BasisIndex, b: &BasisIndex) -> Option<u64> {
        match (self, a, b) {
            (IndexSort::Nat | IndexSort::Fin(_), BasisIndex::Nat(x), BasisIndex::Nat(y)) => {
                Some(x.abs_diff(*y))
            }
            (IndexSort::Int, BasisIndex::Int(x), BasisIndex::Int(y)) => Some(x.abs_diff(*y)),
            (IndexSort::Nat2, BasisIndex::Pair(a1, a2), BasisIndex::Pair(b1, b2)) => {
                Some(a1.abs_diff(*b1).max(a2.abs_diff(*b2)))
            }
            (IndexSort::Word(_), BasisIndex::Word(x), BasisIndex::Word(y)) => {
                let common = x
                    .iter()
                    .rev()
                    .zip(y.iter().rev())
                    .take_while(|(p, q)| p == q)
                    .count();
                Some((x.len() + y.len() - 2 * common) as u64)
            }
            (IndexSort::Sum(s, _), BasisIndex::Left(x), BasisIndex::Left(y)) => s.distance(x, y),
            (IndexSort::Sum(_, s), BasisIndex::Right(x), BasisIndex::Right(y)) => s.distance(x, y),
            (IndexSort::Tensor(s, t), BasisIndex::Tensor(x1, x2), BasisIndex::Tensor(y1, y2)) => {
                Some(s.distance(x1, y1)?.max(t.distance(x2, y2)?))
            }
            _ => None,
        }
    }
}

/// Number of words of length ≤ `depth` over `n` letters.
pub fn word_ball_size(n: u8, depth: u32) -> usize {
    let n = n as usize;
    let mut total = 0usize;
    let mut layer = 1usize;
    for _ in 0..=depth {
        total += layer;
        layer *= n;
    }
    total
}

/// All words of length ≤ `depth`, shortlex ordered.
pub fn word_ball(n: u8, depth: u32) -> Vec<BasisIndex> {
    words_shortlex(n, word_ball_size(n, depth))
}

fn words_shortlex(n: u8, r: usize) -> Vec<BasisIndex> {
    let mut out = Vec::with_capacity(r);
    let mut len = 0usize;
    while out.len() < r {
        let mut word = vec![1u8; len];
        loop {
            if out.len() == r {
                return out;
            }
            out.push(BasisIndex::Word(word.clone()));
            // base-n counter over letters 1..=n, most significant first
            let mut wrapped = true;
            for pos in (0..word.len()).rev() {
                if word[pos] < n {
                    word[pos] += 1;
                    for l in &mut word[pos + 1..] {
                        *l = 1;
                    }
                    wrapped = false;
                    break;
                }
            }
            if wrapped {
                break;
            }
        }
        len += 1;
    }
    out
}

/// First `r` positions `(p, q)` with `p < pa`, `q < pb`, ordered by shell
/// `max(p, q)` and row-major inside a shell.
fn shell_positions(r: usize, pa: usize, pb: usize) -> Vec<(usize, usize)> {
    let mut out = Vec::with_capacity(r);
    let mut m = 0usize;
    while out.len() < r {
        if m >= pa && m >= pb {
            break;
        }
        // (p, m) for p < m, then (m, q) for q <= m
        for p in 0..m.min(pa) {
            if m < pb && out.len() < r {
                out.push((p, m));
            }
        }
        if m < pa {
            for q in 0..=m.min(pb.saturating_sub(1)) {
                if q < pb && out.len() < r {
                    out.push((m, q));
                }
            }
        }
        m += 1;
    }
    out
}

/// JSON form of a label: integers for ℕ₀/ℤ, `[k1,k2]` for pairs, digit
/// strings (or arrays when n > 9) for words, `{"left":..}`/`{"right":..}` for
/// direct sums and `[a, b]` for tensor labels.
pub fn index_to_json(idx: &BasisIndex) -> Value {
    match idx {
        BasisIndex::Nat(n) => Value::from(*n),
        BasisIndex::Int(k) => Value::from(*k),
        BasisIndex::Pair(a, b) => Value::from(vec![*a, *b]),
        BasisIndex::Word(w) => {
            if w.iter().all(|l| *l <= 9) {
                Value::from(w.iter().map(|l| char::from(b'0' + l)).collect::<String>())
            } else {
                Value::from(w.iter().map(|l| *l as u64).collect::<Vec<_>>())
            }
        }
        BasisIndex::Left(i) => serde_json::json!({ "left": index_to_json(i) }),
        BasisIndex::Right(i) => serde_json::json!({ "right": index_to_json(i) }),
        BasisIndex::Tensor(a, b) => Value::Array(vec![index_to_json(a), index_to_json(b)]),
    }
}

/// Parses a JSON label for the given sort; `path` names the field in errors.
pub fn index_from_json(v: &Value, sort: &IndexSort, path: &str) -> Result<BasisIndex> {
    let bad = |why: &str| Error::validation(path, format!("{why} (sort {sort})"));
    let idx = match sort {
        IndexSort::Nat | IndexSort::Fin(_) => {
            BasisIndex::Nat(v.as_u64().ok_or_else(|| bad("expected a non-negative integer"))?)
        }
        IndexSort::Int => BasisIndex::Int(v.as_i64().ok_or_else(|| bad("expected an integer"))?),
        IndexSort::Nat2 => {
            let arr = v.as_array().ok_or_else(|| bad("expected [k1, k2]"))?;
            if arr.len() != 2 {
                return Err(bad("expected [k1, k2]"));
            }
            let a = arr[0].as_u64().ok_or_else(|| bad("expected non-negative k1"))?;
            let b = arr[1].as_u64().ok_or_else(|| bad("expected non-negative k2"))?;
            BasisIndex::Pair(a, b)
        }
        IndexSort::Word(_) => {
            let letters: Vec<u8> = if let Some(s) = v.as_str() {
                s.chars()
                    .map(|c| c.to_digit(10).map(|d| d as u8).ok_or_else(|| bad("non-digit letter")))
                    .collect::<Result<_>>()?
            } else if let Some(arr) = v.as_array() {
                arr.iter()
                    .map(|x| {
                        x.as_u64()
                            .filter(|l| *l <= u8::MAX as u64)
                            .map(|l| l as u8)
                            .ok_or_else(|| bad("letters must be small integers"))
                    })
                    .collect::<Result<_>>()?
            } else {
                return Err(bad("expected a word string or letter array"));
            };
            BasisIndex::Word(letters)
        }
        IndexSort::Sum(a, b) => {
            if let Some(x) = v.get("left") {
                BasisIndex::left(index_from_json(x, a, &format!("{path}.left"))?)
            } else if let Some(y) = v.get("right") {
                BasisIndex::right(index_from_json(y, b, &format!("{path}.right"))?)
            } else {
                return Err(bad("expected {\"left\": ..} or {\"right\": ..}"));
            }
        }
        IndexSort::Tensor(a, b) => {
            let arr = v.as_array().ok_or_else(|| bad("expected [left, right]"))?;
            if arr.len() != 2 {
                return Err(bad("expected [left, right]"));
            }
            BasisIndex::tensor(
                index_from_json(&arr[0], a, &format!("{path}[0]"))?,
                index_from_json(&arr[1], b, &format!("{path}[1]"))?,
            )
        }
    };
    if !sort.contains(&idx) {
        return Err(bad(&format!("label {idx} outside the index set")));
    }
    Ok(idx)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn int_prefix_is_centred() {
        let p = IndexSort::Int.prefix(5).unwrap();
        let mut ks: Vec<i64> = p
            .iter()
            .map(|i| match i {
                BasisIndex::Int(k) => *k,
                _ => unreachable!(),
            })
            .collect();
        ks.sort();
        assert_eq!(ks, vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn nat2_prefix_square_is_box() {
        for n in 1..6u64 {
            let p = IndexSort::Nat2.prefix((n * n) as usize).unwrap();
            assert!(p.iter().all(|i| matches!(i, BasisIndex::Pair(a, b) if *a < n && *b < n)));
        }
    }

    #[test]
    fn word_ball_counts() {
        // empty word + 2 + 4
        assert_eq!(word_ball_size(2, 2), 7);
        let ball = word_ball(2, 2);
        assert_eq!(ball.len(), 7);
        assert_eq!(ball[0], BasisIndex::Word(vec![]));
        assert_eq!(ball[3], BasisIndex::Word(vec![1, 1]));
        assert_eq!(ball[6], BasisIndex::Word(vec![2, 2]));
        assert_eq!(word_ball(3, 3).len(), 1 + 3 + 9 + 27);
    }

    #[test]
    fn sum_prefix_alternates_and_spills() {
        let s = IndexSort::Sum(Box::new(IndexSort::Fin(2)), Box::new(IndexSort::Nat));
        let p = s.prefix(5).unwrap();
        assert_eq!(
            p,
            vec![
                BasisIndex::left(BasisIndex::Nat(0)),
                BasisIndex::right(BasisIndex::Nat(0)),
                BasisIndex::left(BasisIndex::Nat(1)),
                BasisIndex::right(BasisIndex::Nat(1)),
                BasisIndex::right(BasisIndex::Nat(2)),
            ]
        );
    }

    #[test]
    fn tensor_prefix_square_is_product() {
        let s = IndexSort::Tensor(Box::new(IndexSort::Nat), Box::new(IndexSort::Nat));
        let p = s.prefix(9).unwrap();
        let mut got: Vec<(u64, u64)> = p
            .iter()
            .map(|i| match i {
                BasisIndex::Tensor(a, b) => match (&**a, &**b) {
                    (BasisIndex::Nat(x), BasisIndex::Nat(y)) => (*x, *y),
                    _ => unreachable!(),
                },
                _ => unreachable!(),
            })
            .collect();
        got.sort();
        let want: Vec<(u64, u64)> = (0..3).flat_map(|a| (0..3).map(move |b| (a, b))).collect();
        assert_eq!(got, want);
    }

    #[test]
    fn fin_prefix_too_long() {
        assert!(IndexSort::Fin(3).prefix(4).is_err());
    }

    #[test]
    fn word_distance_is_tree_distance() {
        let s = IndexSort::Word(2);
        let w = |v: &[u8]| BasisIndex::Word(v.to_vec());
        assert_eq!(s.distance(&w(&[1, 2]), &w(&[2])), Some(1));
        assert_eq!(s.distance(&w(&[1]), &w(&[2])), Some(2));
        assert_eq!(s.distance(&w(&[]), &w(&[2, 1])), Some(2));
    }

    #[test]
    fn json_labels_roundtrip() {
        let sort = IndexSort::Sum(
            Box::new(IndexSort::Word(2)),
            Box::new(IndexSort::Tensor(Box::new(IndexSort::Nat2), Box::new(IndexSort::Int))),
        );
        for idx in [
            BasisIndex::left(BasisIndex::Word(vec![1, 2, 2])),
            BasisIndex::right(BasisIndex::tensor(BasisIndex::Pair(3, 0), BasisIndex::Int(-7))),
        ] {
            let v = index_to_json(&idx);
            assert_eq!(index_from_json(&v, &sort, "i").unwrap(), idx);
        }
        assert!(index_from_json(&serde_json::json!(-1), &IndexSort::Nat, "i").is_err());
        assert!(index_from_json(&serde_json::json!("13"), &IndexSort::Word(2), "i").is_err());
    }
}

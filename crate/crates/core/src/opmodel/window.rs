use std::collections::HashMap;

use nalgebra::DMatrix;

use super::Operator;
use crate::basis::BasisIndex;
use crate::error::{Error, Result};
use crate::scalar::{Real, C};

/// Largest window `truncate` materializes without an explicit limit.
pub const DEFAULT_WINDOW_LIMIT: usize = 2048;

/// Compression of an operator to a finite ordered window.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseWindow<T: Real> {
    pub window: Vec<BasisIndex>,
    /// `matrix[(a, b)] = ⟨A e_{window[b]}, e_{window[a]}⟩`.
    pub matrix: DMatrix<C<T>>,
}

impl<T: Real> DenseWindow<T> {
    pub fn from_matrix(matrix: DMatrix<C<T>>) -> Self {
        let window = (0..matrix.nrows() as u64).map(BasisIndex::Nat).collect();
        DenseWindow { window, matrix }
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }
}

pub(crate) fn position_map(window: &[BasisIndex]) -> Result<HashMap<&BasisIndex, usize>> {
    let mut pos = HashMap::with_capacity(window.len());
    for (a, idx) in window.iter().enumerate() {
        if pos.insert(idx, a).is_some() {
            return Err(Error::InvalidWindow(format!("duplicate index {idx}")));
        }
    }
    Ok(pos)
}

pub fn truncate<T: Real>(op: &Operator<T>, window: &[BasisIndex]) -> Result<DenseWindow<T>> {
    truncate_with_limit(op, window, DEFAULT_WINDOW_LIMIT)
}

pub fn truncate_with_limit<T: Real>(
    op: &Operator<T>,
    window: &[BasisIndex],
    limit: usize,
) -> Result<DenseWindow<T>> {
    if window.is_empty() {
        return Err(Error::InvalidWindow("window must be non-empty".into()));
    }
    if window.len() > limit {
        return Err(Error::Resource(format!(
            "window of {} indices exceeds the dense limit {limit}",
            window.len()
        )));
    }
    let sort = op.sort();
    for idx in window {
        sort.check(idx)?;
    }
    let pos = position_map(window)?;
    let n = window.len();
    let mut matrix = DMatrix::zeros(n, n);
    for (b, j) in window.iter().enumerate() {
        for (i, v) in op.col(j) {
            if let Some(&a) = pos.get(&i) {
                matrix[(a, b)] = v;
            }
        }
    }
    Ok(DenseWindow { window: window.to_vec(), matrix })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::IndexSort;
    use crate::linalg::kron;
    use crate::opmodel::OperatorSpecDoc;
    use crate::scalar::one;

    fn nat(r: std::ops::Range<u64>) -> Vec<BasisIndex> {
        r.map(BasisIndex::Nat).collect()
    }

    #[test]
    fn shift_window_is_subdiagonal() {
        let s = Operator::<f64>::UnilateralShift;
        let w = truncate(&s, &nat(0..3)).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let want = if a == b + 1 { 1.0 } else { 0.0 };
                assert_eq!(w.matrix[(a, b)].re, want);
            }
        }
    }

    #[test]
    fn window_errors() {
        let s = Operator::<f64>::UnilateralShift;
        assert!(matches!(truncate(&s, &[]), Err(Error::InvalidWindow(_))));
        let dup = vec![BasisIndex::Nat(1), BasisIndex::Nat(1)];
        assert!(matches!(truncate(&s, &dup), Err(Error::InvalidWindow(_))));
        assert!(matches!(
            truncate_with_limit(&s, &nat(0..10), 5),
            Err(Error::Resource(_))
        ));
    }

    #[test]
    fn direct_sum_left_window_is_left_operator() {
        let a = Operator::<f64>::from_doc(&OperatorSpecDoc::dense_real(&[
            vec![1.0, 2.0],
            vec![3.0, 4.0],
        ]))
        .unwrap();
        let sum = a.clone().direct_sum(Operator::UnilateralShift);
        let win: Vec<_> = (0..2).map(|i| BasisIndex::left(BasisIndex::Nat(i))).collect();
        assert_eq!(truncate(&sum, &win).unwrap().matrix, truncate(&a, &nat(0..2)).unwrap().matrix);
    }

    #[test]
    fn tensor_window_is_compressed_kronecker() {
        // Oracle: build S on a size-3 window, take the Kronecker product, and
        // compress to the pairs with both coordinates < 2.
        let s = Operator::<f64>::UnilateralShift;
        let st = s.clone().tensor(s.clone());
        let s3 = truncate(&s, &nat(0..3)).unwrap().matrix;
        let big = kron(&s3, &s3);
        let window: Vec<BasisIndex> = IndexSort::Tensor(Box::new(IndexSort::Nat), Box::new(IndexSort::Nat))
            .prefix(4)
            .unwrap();
        let got = truncate(&st, &window).unwrap().matrix;
        let flat = |idx: &BasisIndex| match idx {
            BasisIndex::Tensor(a, b) => match (&**a, &**b) {
                (BasisIndex::Nat(x), BasisIndex::Nat(y)) => (*x * 3 + *y) as usize,
                _ => unreachable!(),
            },
            _ => unreachable!(),
        };
        for (a, ia) in window.iter().enumerate() {
            for (b, ib) in window.iter().enumerate() {
                assert_eq!(got[(a, b)], big[(flat(ia), flat(ib))]);
            }
        }
        // and it also equals Kron(trunc(S,2), trunc(S,2)) after reordering
        let s2 = truncate(&s, &nat(0..2)).unwrap().matrix;
        let small = kron(&s2, &s2);
        let flat2 = |idx: &BasisIndex| flat(idx) - if flat(idx) >= 3 { 1 } else { 0 };
        for (a, ia) in window.iter().enumerate() {
            for (b, ib) in window.iter().enumerate() {
                assert_eq!(got[(a, b)], small[(flat2(ia), flat2(ib))]);
            }
        }
        assert_eq!(got.iter().filter(|v| **v == one()).count(), 1);
    }
}

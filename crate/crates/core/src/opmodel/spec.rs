//! JSON documents describing structured operators.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComplexDoc {
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

impl ComplexDoc {
    pub fn real(re: f64) -> Self {
        ComplexDoc { re, im: 0.0 }
    }
}

/// A matrix entry given either as a bare real number or as `{"re":..,"im":..}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScalarDoc {
    Real(f64),
    Complex(ComplexDoc),
}

impl ScalarDoc {
    pub fn parts(&self) -> (f64, f64) {
        match self {
            ScalarDoc::Real(x) => (*x, 0.0),
            ScalarDoc::Complex(c) => (c.re, c.im),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoeffDoc {
    /// Multi-index of the Fourier coefficient, length equal to `dim`.
    pub k: Vec<i64>,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntryDoc {
    pub i: u64,
    pub j: u64,
    pub re: f64,
    #[serde(default)]
    pub im: f64,
}

/// Growth profile `g` of an acute-wedge operator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileDoc {
    /// Tabulated `g(0), g(1), …`; the last value repeats.
    Table(Vec<u64>),
    /// `g(j) = floor(scale · j^exponent)` with `0 ≤ exponent < 1/2`.
    Power { scale: f64, exponent: f64 },
}

/// Declarative operator description mirroring the JSON ingestion format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OperatorSpecDoc {
    Identity,
    UnilateralShift,
    BilateralShift,
    WeightedShift {
        weights: Vec<f64>,
        #[serde(default)]
        periodic: bool,
    },
    Toeplitz {
        dim: u8,
        coeffs: Vec<CoeffDoc>,
    },
    BandLimited {
        band: u64,
        entries: Vec<EntryDoc>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period: Option<u64>,
    },
    AcuteWedge {
        profile: ProfileDoc,
        #[serde(default)]
        entries: Vec<EntryDoc>,
        #[serde(default)]
        jump: bool,
    },
    Cuntz {
        n: u8,
        k: u8,
        #[serde(default = "default_depth")]
        depth: u32,
    },
    Tensor {
        left: Box<OperatorSpecDoc>,
        right: Box<OperatorSpecDoc>,
    },
    DirectSum {
        left: Box<OperatorSpecDoc>,
        right: Box<OperatorSpecDoc>,
    },
    Affine {
        lambda: ComplexDoc,
        mu: ComplexDoc,
        inner: Box<OperatorSpecDoc>,
    },
    Adjoint {
        inner: Box<OperatorSpecDoc>,
    },
    Dense {
        matrix: Vec<Vec<ScalarDoc>>,
    },
}

fn default_depth() -> u32 {
    8
}

impl OperatorSpecDoc {
    /// Reads either a single document or an array of documents.
    pub fn list_from_json(text: &str) -> serde_json::Result<Vec<OperatorSpecDoc>> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        if v.is_array() {
            serde_json::from_value(v)
        } else {
            Ok(vec![serde_json::from_value(v)?])
        }
    }

    pub fn cuntz_family(n: u8, depth: u32) -> Vec<OperatorSpecDoc> {
        (1..=n).map(|k| OperatorSpecDoc::Cuntz { n, k, depth }).collect()
    }

    pub fn toeplitz1(coeffs: &[(i64, f64)]) -> Self {
        OperatorSpecDoc::Toeplitz {
            dim: 1,
            coeffs: coeffs
                .iter()
                .map(|(k, re)| CoeffDoc { k: vec![*k], re: *re, im: 0.0 })
                .collect(),
        }
    }

    pub fn dense_real(rows: &[Vec<f64>]) -> Self {
        OperatorSpecDoc::Dense {
            matrix: rows
                .iter()
                .map(|r| r.iter().map(|x| ScalarDoc::Real(*x)).collect())
                .collect(),
        }
    }
}

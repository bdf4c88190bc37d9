//! Piecewise-affine value-function approximations: per (t, d) collections of
//! affine minorants ("cuts") evaluated as a pointwise maximum. Cuts only
//! accumulate; there is no pruning.

use std::io;

use thiserror::Error;

use crate::linalg::dot;

/// One affine lower bound `q_x'x + q_c` on a stage value function, with a
/// provenance record of where it was generated.
#[derive(Debug, Clone, PartialEq)]
pub struct Cut {
    pub q_x: Vec<f64>,
    pub q_c: f64,
    pub origin: CutOrigin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CutOrigin {
    pub iteration: usize,
    pub t: usize,
    pub d: usize,
    pub x: Vec<f64>,
}

impl CutOrigin {
    pub fn seed(t: usize, d: usize, n: usize) -> Self {
        CutOrigin { iteration: 0, t, d, x: vec![0.0; n] }
    }
}

#[derive(Debug, Error)]
pub enum CutError {
    #[error("cut slope has dimension {got}, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("cut coefficients must be finite")]
    NonFinite,
    #[error("cut file row {row}: {message}")]
    Format { row: usize, message: String },
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

/// Cut collections for every (t, d), t = 1..=T. The horizon boundary
/// v_{T+1} == 0 is a convention of `evaluate`, not a stored cut.
#[derive(Debug, Clone, PartialEq)]
pub struct CutSet {
    horizon: usize,
    num_d: usize,
    n: usize,
    /// Indexed cuts[t][d], t in 0..=T (index 0 unused by the solver but kept
    /// for addressing symmetry).
    cuts: Vec<Vec<Vec<Cut>>>,
}

impl CutSet {
    pub fn new(horizon: usize, num_d: usize, n: usize) -> Self {
        CutSet {
            horizon,
            num_d,
            n,
            cuts: vec![vec![Vec::new(); num_d]; horizon + 1],
        }
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn num_d(&self) -> usize {
        self.num_d
    }

    pub fn state_dim(&self) -> usize {
        self.n
    }

    pub fn cuts_at(&self, t: usize, d: usize) -> &[Cut] {
        &self.cuts[t][d]
    }

    pub fn is_empty_at(&self, t: usize, d: usize) -> bool {
        t <= self.horizon && self.cuts[t][d].is_empty()
    }

    /// Pointwise maximum over the stored cuts. Returns 0 at t = T+1 and the
    /// -inf sentinel on an empty cut set: callers are expected to seed an
    /// initial cut before relying on the bound.
    pub fn evaluate(&self, t: usize, d: usize, x: &[f64]) -> f64 {
        if t == self.horizon + 1 {
            return 0.0;
        }
        self.cuts[t][d]
            .iter()
            .map(|c| dot(&c.q_x, x) + c.q_c)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn add_cut(&mut self, t: usize, d: usize, cut: Cut) -> Result<(), CutError> {
        if cut.q_x.len() != self.n {
            return Err(CutError::DimensionMismatch { got: cut.q_x.len(), expected: self.n });
        }
        if !cut.q_c.is_finite() || cut.q_x.iter().any(|v| !v.is_finite()) {
            return Err(CutError::NonFinite);
        }
        self.cuts[t][d].push(cut);
        Ok(())
    }

    pub fn total_cuts(&self) -> usize {
        self.cuts.iter().flatten().map(Vec::len).sum()
    }

    /// CSV export: header `iter,t,d,qc,qx_0,...,qx_{n-1}`.
    pub fn to_csv<W: io::Write>(&self, writer: W) -> Result<(), CutError> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["iter".to_string(), "t".to_string(), "d".to_string(), "qc".to_string()];
        header.extend((0..self.n).map(|i| format!("qx_{i}")));
        w.write_record(&header)?;
        for (t, per_d) in self.cuts.iter().enumerate() {
            for (d, cuts) in per_d.iter().enumerate() {
                for cut in cuts {
                    let mut record = vec![
                        cut.origin.iteration.to_string(),
                        t.to_string(),
                        d.to_string(),
                        format!("{:.17e}", cut.q_c),
                    ];
                    record.extend(cut.q_x.iter().map(|v| format!("{v:.17e}")));
                    w.write_record(&record)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }

    pub fn from_csv<R: io::Read>(reader: R, horizon: usize, num_d: usize, n: usize) -> Result<Self, CutError> {
        let mut set = CutSet::new(horizon, num_d, n);
        let mut r = csv::Reader::from_reader(reader);
        for (idx, record) in r.records().enumerate() {
            let record = record?;
            let row = idx + 2; // header is row 1
            if record.len() != 4 + n {
                return Err(CutError::Format {
                    row,
                    message: format!("{} fields, expected {}", record.len(), 4 + n),
                });
            }
            let field = |i: usize| -> Result<f64, CutError> {
                record[i].trim().parse().map_err(|e| CutError::Format {
                    row,
                    message: format!("field {i}: {e}"),
                })
            };
            let iteration: usize = record[0].trim().parse().map_err(|e| CutError::Format {
                row,
                message: format!("iter: {e}"),
            })?;
            let t: usize = record[1].trim().parse().map_err(|e| CutError::Format {
                row,
                message: format!("t: {e}"),
            })?;
            let d: usize = record[2].trim().parse().map_err(|e| CutError::Format {
                row,
                message: format!("d: {e}"),
            })?;
            if t > horizon || d >= num_d {
                return Err(CutError::Format {
                    row,
                    message: format!("(t={t}, d={d}) outside horizon {horizon} / {num_d} states"),
                });
            }
            let q_c = field(3)?;
            let q_x = (0..n).map(|i| field(4 + i)).collect::<Result<Vec<_>, _>>()?;
            set.add_cut(t, d, Cut { q_x, q_c, origin: CutOrigin { iteration, t, d, x: vec![0.0; n] } })?;
        }
        Ok(set)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cut(q_x: Vec<f64>, q_c: f64) -> Cut {
        let n = q_x.len();
        Cut { q_x, q_c, origin: CutOrigin::seed(1, 0, n) }
    }

    #[test]
    fn two_line_maximum() {
        let mut set = CutSet::new(2, 1, 1);
        set.add_cut(1, 0, cut(vec![1.0], 0.0)).unwrap();
        set.add_cut(1, 0, cut(vec![-1.0], 2.0)).unwrap();
        assert!((set.evaluate(1, 0, &[0.5]) - 1.5).abs() < 1e-15);
    }

    #[test]
    fn terminal_convention_zero() {
        let set = CutSet::new(2, 1, 1);
        assert_eq!(set.evaluate(3, 0, &[123.0]), 0.0);
    }

    #[test]
    fn empty_set_sentinel() {
        let set = CutSet::new(2, 1, 1);
        assert_eq!(set.evaluate(1, 0, &[0.0]), f64::NEG_INFINITY);
        assert!(set.is_empty_at(1, 0));
    }

    #[test]
    fn singleton_and_duplicate() {
        let mut set = CutSet::new(1, 1, 2);
        set.add_cut(1, 0, cut(vec![1.0, -1.0], 0.5)).unwrap();
        let x = [0.3, 0.7];
        let v1 = set.evaluate(1, 0, &x);
        assert!((v1 - (0.3 - 0.7 + 0.5)).abs() < 1e-15);
        set.add_cut(1, 0, cut(vec![1.0, -1.0], 0.5)).unwrap();
        assert_eq!(set.evaluate(1, 0, &x), v1);
    }

    #[test]
    fn dominated_cut_leaves_evaluations_unchanged() {
        let mut set = CutSet::new(1, 1, 1);
        set.add_cut(1, 0, cut(vec![2.0], 1.0)).unwrap();
        let xs: Vec<f64> = (0..100).map(|i| -5.0 + 0.1 * i as f64).collect();
        let before: Vec<f64> = xs.iter().map(|&x| set.evaluate(1, 0, &[x])).collect();
        // Everywhere below the existing cut.
        set.add_cut(1, 0, cut(vec![2.0], 0.0)).unwrap();
        let after: Vec<f64> = xs.iter().map(|&x| set.evaluate(1, 0, &[x])).collect();
        assert_eq!(before, after);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut set = CutSet::new(1, 1, 2);
        assert!(set.add_cut(1, 0, cut(vec![1.0], 0.0)).is_err());
    }

    #[test]
    fn csv_roundtrip_exact() {
        let mut set = CutSet::new(2, 2, 3);
        set.add_cut(1, 0, cut(vec![1.5, -2.25, 1.0 / 3.0], 0.125)).unwrap();
        set.add_cut(2, 1, cut(vec![0.1, 0.2, 0.3], -7.5)).unwrap();
        let mut buf = Vec::new();
        set.to_csv(&mut buf).unwrap();
        let back = CutSet::from_csv(buf.as_slice(), 2, 2, 3).unwrap();
        for t in 0..=2 {
            for d in 0..2 {
                let a = set.cuts_at(t, d);
                let b = back.cuts_at(t, d);
                assert_eq!(a.len(), b.len());
                for (ca, cb) in a.iter().zip(b) {
                    assert_eq!(ca.q_x, cb.q_x);
                    assert_eq!(ca.q_c, cb.q_c);
                }
            }
        }
    }

    proptest! {
        // Convexity of the pointwise maximum.
        #[test]
        fn evaluate_is_convex(
            cuts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..8),
            x in -10.0..10.0f64,
            y in -10.0..10.0f64,
            t in 0.0..1.0f64,
        ) {
            let mut set = CutSet::new(1, 1, 1);
            for (qx, qc) in cuts {
                set.add_cut(1, 0, cut(vec![qx], qc)).unwrap();
            }
            let mid = t * x + (1.0 - t) * y;
            let lhs = set.evaluate(1, 0, &[mid]);
            let rhs = t * set.evaluate(1, 0, &[x]) + (1.0 - t) * set.evaluate(1, 0, &[y]);
            prop_assert!(lhs <= rhs + 1e-9);
        }

        // Adding a cut never lowers any evaluation.
        #[test]
        fn monotone_improvement(
            cuts in prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 1..8),
            extra in (-5.0..5.0f64, -5.0..5.0f64),
            xs in prop::collection::vec(-10.0..10.0f64, 1..20),
        ) {
            let mut set = CutSet::new(1, 1, 1);
            for (qx, qc) in cuts {
                set.add_cut(1, 0, cut(vec![qx], qc)).unwrap();
            }
            let before: Vec<f64> = xs.iter().map(|&x| set.evaluate(1, 0, &[x])).collect();
            set.add_cut(1, 0, cut(vec![extra.0], extra.1)).unwrap();
            for (&x, &b) in xs.iter().zip(&before) {
                prop_assert!(set.evaluate(1, 0, &[x]) >= b);
            }
        }
    }
}

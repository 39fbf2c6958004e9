//! Deterministic sample-point generation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{GeomError, Result};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleSpec {
    Points(Vec<Vec<f64>>),
    /// Uniform samples in an axis-aligned box; `lo[i] == hi[i]` pins a coordinate.
    Box { lo: Vec<f64>, hi: Vec<f64>, count: usize, seed: u64 },
}

impl SampleSpec {
    /// Produces the sample points, rejecting those where `accept` is false.
    pub fn points(&self, dim: usize, accept: impl Fn(&[f64]) -> bool) -> Result<Vec<Vec<f64>>> {
        match self {
            SampleSpec::Points(pts) => {
                for p in pts {
                    if p.len() != dim {
                        return Err(GeomError::DimensionMismatch { expected: dim, got: p.len() });
                    }
                }
                Ok(pts.iter().filter(|p| accept(p)).cloned().collect())
            }
            SampleSpec::Box { lo, hi, count, seed } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(GeomError::DimensionMismatch { expected: dim, got: lo.len().min(hi.len()) });
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut out = Vec::with_capacity(*count);
                let mut attempts = 0usize;
                while out.len() < *count {
                    attempts += 1;
                    if attempts > 1000 * count.max(&1) {
                        return Err(GeomError::Invalid("sample box rejects nearly every point".into()));
                    }
                    let p: Vec<f64> = lo
                        .iter()
                        .zip(hi)
                        .map(|(a, b)| if a == b { *a } else { rng.gen_range(a.min(*b)..a.max(*b)) })
                        .collect();
                    if accept(&p) {
                        out.push(p);
                    }
                }
                Ok(out)
            }
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        match self {
            SampleSpec::Box { lo, hi, count, .. } => {
                SampleSpec::Box { lo: lo.clone(), hi: hi.clone(), count: *count, seed }
            }
            other => other.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_sampling_is_deterministic_and_pins() {
        let s = SampleSpec::Box { lo: vec![-1.0, 0.0], hi: vec![1.0, 0.0], count: 5, seed: 7 };
        let a = s.points(2, |_| true).unwrap();
        assert_eq!(a, s.points(2, |_| true).unwrap());
        assert!(a.iter().all(|p| p[1] == 0.0 && p[0].abs() <= 1.0));
        let b = s.points(2, |p| p[0] > 0.0).unwrap();
        assert!(b.iter().all(|p| p[0] > 0.0) && b.len() == 5);
    }
}

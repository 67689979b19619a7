use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitProbabilities {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for SplitProbabilities {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

/// Assigns each series wholly to train, validation or test by an independent
/// seeded categorical draw.
pub fn split_patients(
    dataset: &Dataset,
    probs: SplitProbabilities,
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    let p = [probs.train, probs.validation, probs.test];
    if p.iter().any(|&x| !(0.0..=1.0).contains(&x)) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("split probabilities must sum to 1, got {p:?}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut train, mut val, mut test) = (Vec::new(), Vec::new(), Vec::new());
    for s in &dataset.series {
        let u: f64 = rng.gen();
        if u < p[0] {
            train.push(s.clone());
        } else if u < p[0] + p[1] {
            val.push(s.clone());
        } else {
            test.push(s.clone());
        }
    }
    Ok((dataset.subset(train), dataset.subset(val), dataset.subset(test)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Provenance, Series};
    use crate::field::{Mask, N_LOCATIONS};

    fn dataset(n: usize) -> Dataset {
        let series = (0..n)
            .map(|i| Series::new(format!("s{i}"), vec![0.0], vec![vec![0.0; N_LOCATIONS]]).unwrap())
            .collect();
        Dataset::new(Mask::visual_field_24_2(), Provenance::new("test"), series).unwrap()
    }

    #[test]
    fn splits_partition_the_dataset() {
        let d = dataset(200);
        let (a, b, c) = split_patients(&d, SplitProbabilities::default(), 5).unwrap();
        assert_eq!(a.len() + b.len() + c.len(), 200);
        let mut ids: Vec<_> = a.series.iter().chain(&b.series).chain(&c.series).map(|s| s.id.clone()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 200);
    }

    #[test]
    fn same_seed_same_split() {
        let d = dataset(50);
        let x = split_patients(&d, SplitProbabilities::default(), 9).unwrap();
        let y = split_patients(&d, SplitProbabilities::default(), 9).unwrap();
        assert_eq!(x, y);
    }

    #[test]
    fn train_fraction_concentrates() {
        // sd of the fraction is sqrt(0.16 / 1e5) ~ 0.0013, so 0.005 is ~4 sd.
        let d = dataset(100_000);
        let (a, _, _) = split_patients(&d, SplitProbabilities::default(), 2024).unwrap();
        let frac = a.len() as f64 / 1e5;
        assert!((frac - 0.8).abs() < 0.005, "{frac}");
    }

    #[test]
    fn bad_probabilities_rejected() {
        let d = dataset(3);
        let p = SplitProbabilities { train: 0.5, validation: 0.1, test: 0.1 };
        assert!(split_patients(&d, p, 1).is_err());
    }
}

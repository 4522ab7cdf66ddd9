use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, mae, FeatureMatrix, Trainer};
use crate::error::ModelError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles `0..n` and cuts it into `k` test folds whose sizes differ by at
/// most one; the larger folds come first.
pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<Vec<Fold>, ModelError> {
    if k < 2 || k > n {
        return Err(ModelError::FoldCount { k, n });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        let mut test = order[start..start + len].to_vec();
        let mut train: Vec<usize> = order[..start].iter().chain(&order[start + len..]).copied().collect();
        test.sort_unstable();
        train.sort_unstable();
        folds.push(Fold { train, test });
        start += len;
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub model: String,
    pub k: usize,
    pub seed: u64,
    pub fold_mae: Vec<f64>,
    pub mean_mae: f64,
}

/// Trains on each training fold (seeded per fold) and scores the held-out fold.
pub fn cross_validate<T: Trainer + ?Sized>(
    trainer: &T,
    data: &FeatureMatrix,
    k: usize,
    seed: u64,
) -> Result<CvReport, ModelError> {
    let folds = kfold_split(data.n_rows(), k, seed)?;
    let fold_mae = folds
        .par_iter()
        .enumerate()
        .map(|(i, fold)| {
            let wrap = |e: ModelError| ModelError::Fold { fold: i, source: Box::new(e) };
            let train = data.subset(&fold.train);
            let test = data.subset(&fold.test);
            let model = trainer.train(&train, derive_seed(seed, i as u64)).map_err(wrap)?;
            mae(&model.predict(&test), test.labels()).map_err(wrap)
        })
        .collect::<Vec<Result<f64, _>>>()
        .into_iter()
        .collect::<Result<Vec<f64>, _>>()?;
    let mean_mae = fold_mae.iter().sum::<f64>() / k as f64;
    Ok(CvReport { model: trainer.name(), k, seed, fold_mae, mean_mae })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{ModelSpec, Regressor};

    #[test]
    fn singleton_folds() {
        let folds = kfold_split(10, 10, 3).unwrap();
        assert_eq!(folds.len(), 10);
        assert!(folds.iter().all(|f| f.test.len() == 1 && f.train.len() == 9));
    }

    #[test]
    fn folds_partition_indices() {
        let folds = kfold_split(557, 10, 1).unwrap();
        let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
        all.sort_unstable();
        assert_eq!(all, (0..557).collect::<Vec<_>>());
        assert!(folds.iter().all(|f| f.test.len() == 55 || f.test.len() == 56));
        assert_eq!(folds.iter().filter(|f| f.test.len() == 56).count(), 7);
        assert_eq!(folds, kfold_split(557, 10, 1).unwrap());
        assert_ne!(folds, kfold_split(557, 10, 2).unwrap());
        for f in &folds {
            assert_eq!(f.train.len() + f.test.len(), 557);
            assert!(f.test.iter().all(|i| f.train.binary_search(i).is_err()));
        }
    }

    #[test]
    fn bad_fold_counts() {
        assert!(matches!(kfold_split(5, 6, 0), Err(ModelError::FoldCount { k: 6, n: 5 })));
        assert!(kfold_split(5, 1, 0).is_err());
    }

    struct Fixed(f64);
    impl Trainer for Fixed {
        fn name(&self) -> String {
            "fixed".into()
        }
        fn train(&self, _: &FeatureMatrix, _: u64) -> Result<Box<dyn Regressor>, ModelError> {
            let v = self.0;
            Ok(Box::new(move |_: &[f64]| v))
        }
    }

    #[test]
    fn fixed_constant_closed_form() {
        let labels: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37) % 1.0).collect();
        let m = FeatureMatrix::from_rows(vec![vec![0.0]; 40], labels.clone(), vec![]).unwrap();
        let rep = cross_validate(&Fixed(0.15), &m, 10, 5).unwrap();
        let folds = kfold_split(40, 10, 5).unwrap();
        let expected: f64 = folds
            .iter()
            .map(|f| f.test.iter().map(|&i| (labels[i] - 0.15).abs()).sum::<f64>() / f.test.len() as f64)
            .sum::<f64>()
            / 10.0;
        assert!((rep.mean_mae - expected).abs() < 1e-12);
        let fold_mean = rep.fold_mae.iter().sum::<f64>() / 10.0;
        assert_eq!(rep.mean_mae, fold_mean);
    }

    #[test]
    fn errors_carry_fold_index() {
        struct Failing;
        impl Trainer for Failing {
            fn name(&self) -> String {
                "failing".into()
            }
            fn train(&self, _: &FeatureMatrix, _: u64) -> Result<Box<dyn Regressor>, ModelError> {
                Err(ModelError::InvalidParam("nope".into()))
            }
        }
        let m = FeatureMatrix::from_rows(vec![vec![0.0]; 4], vec![0.1; 4], vec![]).unwrap();
        assert!(matches!(cross_validate(&Failing, &m, 2, 0), Err(ModelError::Fold { fold: 0, .. })));
        let rep = cross_validate(&ModelSpec::Median, &m, 2, 0).unwrap();
        assert_eq!(rep, cross_validate(&ModelSpec::Median, &m, 2, 0).unwrap());
    }
}

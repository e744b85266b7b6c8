use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cross-validation scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitScheme {
    LeaveOneOut,
    KFold(usize),
    TwoFold,
    SingleSample,
    FirstNTrain(usize),
}

impl fmt::Display for SplitScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SplitScheme::LeaveOneOut => write!(f, "leave-one-out"),
            SplitScheme::KFold(k) => write!(f, "k-fold({k})"),
            SplitScheme::TwoFold => write!(f, "two-fold"),
            SplitScheme::SingleSample => write!(f, "single-sample"),
            SplitScheme::FirstNTrain(n) => write!(f, "first-n-train({n})"),
        }
    }
}

impl FromStr for SplitScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let arg = |prefix: &str| -> Option<Result<usize>> {
            let inner = s.strip_prefix(prefix)?.strip_prefix('(')?.strip_suffix(')')?;
            Some(
                inner
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad scheme argument in {s:?}"))),
            )
        };
        match s {
            "leave-one-out" => Ok(SplitScheme::LeaveOneOut),
            "two-fold" => Ok(SplitScheme::TwoFold),
            "single-sample" => Ok(SplitScheme::SingleSample),
            _ => {
                if let Some(k) = arg("k-fold") {
                    Ok(SplitScheme::KFold(k?))
                } else if let Some(n) = arg("first-n-train") {
                    Ok(SplitScheme::FirstNTrain(n?))
                } else {
                    Err(Error::Config(format!("unknown split scheme {s:?}")))
                }
            }
        }
    }
}

impl Serialize for SplitScheme {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SplitScheme {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// One train/test partition, zero-based sample indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fold {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub scheme: SplitScheme,
    pub seed: u64,
    pub folds: Vec<Fold>,
    /// Samples left out of every fold because their class is too small for the scheme.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub dropped: usize,
}

fn is_zero(n: &usize) -> bool {
    *n == 0
}

impl SplitPlan {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("split plans always serialize")
    }
}

/// Builds a deterministic split plan for `labels` (values in `1..=p`).
pub fn make_splits(labels: &[usize], scheme: SplitScheme, seed: u64) -> Result<SplitPlan> {
    if labels.is_empty() {
        return Err(Error::EmptyInput);
    }
    let classes = *labels.iter().max().unwrap_or(&0);
    let groups = super::class_indices(labels, classes);
    let n = labels.len();

    let too_small = |min: usize| -> Vec<usize> {
        groups
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_empty() && g.len() < min)
            .map(|(c, _)| c + 1)
            .collect()
    };

    let mut dropped = 0;
    let folds = match scheme {
        SplitScheme::LeaveOneOut => {
            require_min(&too_small(2), scheme)?;
            (0..n)
                .map(|i| Fold {
                    train: (0..n).filter(|&j| j != i).collect(),
                    test: vec![i],
                })
                .collect()
        }
        SplitScheme::KFold(_) | SplitScheme::TwoFold => {
            let k = match scheme {
                SplitScheme::KFold(k) => k,
                _ => 2,
            };
            if k < 2 {
                return Err(Error::Protocol(format!("k-fold needs k >= 2, got {k}")));
            }
            require_min(&too_small(2), scheme)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut assign = vec![0usize; n];
            let mut offset = 0;
            for g in &groups {
                let mut members = g.clone();
                members.shuffle(&mut rng);
                for (r, &i) in members.iter().enumerate() {
                    assign[i] = (offset + r) % k;
                }
                offset = (offset + members.len()) % k;
            }
            (0..k)
                .map(|f| Fold {
                    train: (0..n).filter(|&i| assign[i] != f).collect(),
                    test: (0..n).filter(|&i| assign[i] == f).collect(),
                })
                .collect()
        }
        SplitScheme::SingleSample | SplitScheme::FirstNTrain(_) => {
            let n_train = match scheme {
                SplitScheme::FirstNTrain(0) => {
                    return Err(Error::Protocol("first-n-train needs n >= 1".into()))
                }
                SplitScheme::FirstNTrain(t) => t,
                _ => 1,
            };
            let kept: Vec<&Vec<usize>> = groups.iter().filter(|g| g.len() > n_train).collect();
            dropped = groups
                .iter()
                .filter(|g| g.len() <= n_train)
                .map(Vec::len)
                .sum();
            if kept.is_empty() {
                return Err(Error::Protocol(format!(
                    "no class has more than {n_train} samples"
                )));
            }
            if dropped > 0 {
                log::warn!("{scheme}: {dropped} samples in undersized classes dropped");
            }
            let choices: Vec<Vec<usize>> = match scheme {
                SplitScheme::FirstNTrain(_) => vec![(0..n_train).collect()],
                _ => {
                    let min_size = kept.iter().map(|g| g.len()).min().unwrap_or(0);
                    (0..min_size).map(|j| vec![j]).collect()
                }
            };
            choices
                .iter()
                .map(|pos| {
                    let mut train = Vec::new();
                    let mut test = Vec::new();
                    for g in &kept {
                        for (r, &i) in g.iter().enumerate() {
                            if pos.contains(&r) {
                                train.push(i);
                            } else {
                                test.push(i);
                            }
                        }
                    }
                    train.sort_unstable();
                    test.sort_unstable();
                    Fold { train, test }
                })
                .collect()
        }
    };
    Ok(SplitPlan {
        scheme,
        seed,
        folds,
        dropped,
    })
}

fn require_min(offending: &[usize], scheme: SplitScheme) -> Result<()> {
    if offending.is_empty() {
        Ok(())
    } else {
        Err(Error::Protocol(format!(
            "{scheme} needs at least 2 samples per class; classes {offending:?} have 1"
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn balanced(classes: usize, per: usize) -> Vec<usize> {
        (0..classes * per).map(|i| i / per + 1).collect()
    }

    #[test]
    fn leave_one_out_five() {
        let plan = make_splits(&[1, 1, 2, 2, 2], SplitScheme::LeaveOneOut, 0).unwrap();
        assert_eq!(plan.folds.len(), 5);
        assert!(plan.folds.iter().all(|f| f.test.len() == 1 && f.train.len() == 4));
    }

    #[test]
    fn two_fold_halves_each_class() {
        let labels = balanced(4, 10);
        let plan = make_splits(&labels, SplitScheme::TwoFold, 7).unwrap();
        assert_eq!(plan.folds.len(), 2);
        for f in &plan.folds {
            for c in 1..=4 {
                let tr = f.train.iter().filter(|&&i| labels[i] == c).count();
                let te = f.test.iter().filter(|&&i| labels[i] == c).count();
                assert_eq!((tr, te), (5, 5));
            }
        }
    }

    #[test]
    fn single_sample_enumerates_choices() {
        let labels = balanced(3, 6);
        let plan = make_splits(&labels, SplitScheme::SingleSample, 0).unwrap();
        assert_eq!(plan.folds.len(), 6);
        for (j, f) in plan.folds.iter().enumerate() {
            assert_eq!(f.train, vec![j, 6 + j, 12 + j]);
            assert_eq!(f.test.len(), 15);
        }
    }

    #[test]
    fn first_n_train_drops_small_classes() {
        let labels = vec![1, 1, 1, 1, 2, 2, 3, 3, 3, 3, 3];
        let plan = make_splits(&labels, SplitScheme::FirstNTrain(2), 0).unwrap();
        assert_eq!(plan.dropped, 2);
        assert_eq!(plan.folds[0].train, vec![0, 1, 6, 7]);
        assert_eq!(plan.folds[0].test, vec![2, 3, 8, 9, 10]);
    }

    #[test]
    fn kfold_rejects_singleton_class() {
        let err = make_splits(&[1, 1, 2, 3, 3], SplitScheme::KFold(2), 0).unwrap_err();
        assert!(err.to_string().contains("[2]"), "{err}");
    }

    #[test]
    fn scheme_names_round_trip() {
        for s in [
            SplitScheme::LeaveOneOut,
            SplitScheme::KFold(5),
            SplitScheme::TwoFold,
            SplitScheme::SingleSample,
            SplitScheme::FirstNTrain(5),
        ] {
            assert_eq!(s.to_string().parse::<SplitScheme>().unwrap(), s);
        }
    }

    #[test]
    fn json_layout() {
        let plan = make_splits(&[1, 1, 2, 2], SplitScheme::LeaveOneOut, 3).unwrap();
        let json = plan.to_json();
        assert!(json.starts_with(r#"{"scheme":"leave-one-out","seed":3,"folds":[{"train":[1,2,3],"test":[0]}"#));
    }
}

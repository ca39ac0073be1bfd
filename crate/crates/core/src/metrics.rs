//! Rank (SRCC) and linear (PLCC) correlation between predictions and ground
//! truth. Degenerate inputs are errors, never silently zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground truth and predictions, equal length, at least two finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct PairedScores {
    truth: Vec<f64>,
    pred: Vec<f64>,
}

impl PairedScores {
    pub fn new(truth: Vec<f64>, pred: Vec<f64>) -> Result<Self> {
        if truth.len() != pred.len() {
            return Err(Error::invalid(format!(
                "{} truth values but {} predictions",
                truth.len(),
                pred.len()
            )));
        }
        if truth.len() < 2 {
            return Err(Error::invalid("at least two pairs are required"));
        }
        if truth.iter().chain(&pred).any(|v| !v.is_finite()) {
            return Err(Error::invalid("scores must be finite"));
        }
        Ok(Self { truth, pred })
    }

    pub fn truth(&self) -> &[f64] {
        &self.truth
    }

    pub fn pred(&self) -> &[f64] {
        &self.pred
    }

    pub fn len(&self) -> usize {
        self.truth.len()
    }

    pub fn is_empty(&self) -> bool {
        self.truth.is_empty()
    }
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::UndefinedCorrelation("zero variance"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start..end hold ranks start+1..=end.
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

/// Pearson linear correlation coefficient.
pub fn plcc(pairs: &PairedScores) -> Result<f64> {
    pearson(&pairs.truth, &pairs.pred)
}

/// Spearman rank correlation: Pearson correlation of average ranks.
pub fn srcc(pairs: &PairedScores) -> Result<f64> {
    pearson(&average_ranks(&pairs.truth), &average_ranks(&pairs.pred))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub n: usize,
    pub srcc: f64,
    pub plcc: f64,
}

pub fn evaluate(pairs: &PairedScores) -> Result<Evaluation> {
    Ok(Evaluation {
        n: pairs.len(),
        srcc: srcc(pairs)?,
        plcc: plcc(pairs)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pairs(t: &[f64], p: &[f64]) -> PairedScores {
        PairedScores::new(t.to_vec(), p.to_vec()).unwrap()
    }

    #[test]
    fn plcc_examples() {
        let t = [1.0, 2.0, 3.0, 4.5];
        assert_eq!(plcc(&pairs(&t, &t)).unwrap(), 1.0);
        let neg: Vec<f64> = t.iter().map(|x| -2.0 * x + 7.0).collect();
        assert!((plcc(&pairs(&t, &neg)).unwrap() + 1.0).abs() < 1e-15);
        // Centered sums: sxy = 3, sxx = 2, syy = 14/3.
        let expected = 3.0 / (2.0f64 * (14.0f64 / 3.0)).sqrt();
        let got = plcc(&pairs(&[1.0, 2.0, 3.0], &[1.0, 2.0, 4.0])).unwrap();
        assert!((got - expected).abs() < 1e-15);
        assert!((got - 0.981_980_506_061_965_7).abs() < 1e-15);
    }

    #[test]
    fn srcc_examples() {
        let t = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((srcc(&pairs(&t, &[1.0, 3.0, 2.0, 5.0, 4.0])).unwrap() - 0.8).abs() < 1e-15);
        let cubed: Vec<f64> = t.iter().map(|x| x * x * x + 2.0).collect();
        assert_eq!(srcc(&pairs(&t, &cubed)).unwrap(), 1.0);
        let rev: Vec<f64> = t.iter().rev().copied().collect();
        assert_eq!(srcc(&pairs(&t, &rev)).unwrap(), -1.0);
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(
            average_ranks(&[10.0, 20.0, 10.0, 30.0]),
            [1.5, 3.0, 1.5, 4.0]
        );
        assert_eq!(average_ranks(&[5.0, 5.0, 5.0]), [2.0, 2.0, 2.0]);
    }

    #[test]
    fn degenerate_inputs() {
        let p = pairs(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]);
        assert!(matches!(plcc(&p), Err(Error::UndefinedCorrelation(_))));
        assert!(matches!(srcc(&p), Err(Error::UndefinedCorrelation(_))));
        assert!(PairedScores::new(vec![1.0], vec![1.0]).is_err());
        assert!(PairedScores::new(vec![1.0, 2.0], vec![1.0]).is_err());
        assert!(PairedScores::new(vec![1.0, f64::NAN], vec![1.0, 2.0]).is_err());
    }
}

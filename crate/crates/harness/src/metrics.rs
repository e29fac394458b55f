use crate::error::{HarnessError, Result};

fn check(predicted: &[usize], actual: &[usize]) -> Result<()> {
    if predicted.len() != actual.len() {
        return Err(HarnessError::Metric(format!(
            "{} predictions for {} labels",
            predicted.len(),
            actual.len()
        )));
    }
    if predicted.is_empty() {
        return Err(HarnessError::Metric("no predictions to score".into()));
    }
    Ok(())
}

/// Fraction of exact matches.
pub fn accuracy(predicted: &[usize], actual: &[usize]) -> Result<f64> {
    check(predicted, actual)?;
    let hits = predicted.iter().zip(actual).filter(|(p, a)| p == a).count();
    Ok(hits as f64 / actual.len() as f64)
}

/// `2tp / (2tp + fp + fn)`; 0 when all counts are 0.
pub fn f1_from_counts(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        (2 * tp) as f64 / denom as f64
    }
}

/// Micro-averaged F1: true positives, false positives and false negatives
/// are summed over the `n_classes` one-vs-rest problems before the ratio.
pub fn micro_f1(predicted: &[usize], actual: &[usize], n_classes: usize) -> Result<f64> {
    check(predicted, actual)?;
    if let Some(&bad) = predicted.iter().chain(actual).find(|&&v| v >= n_classes) {
        return Err(HarnessError::Metric(format!("class id {bad} outside [0, {n_classes})")));
    }
    let (mut tp, mut fp, mut fn_) = (0, 0, 0);
    for class in 0..n_classes {
        for (&p, &a) in predicted.iter().zip(actual) {
            match (p == class, a == class) {
                (true, true) => tp += 1,
                (true, false) => fp += 1,
                (false, true) => fn_ += 1,
                _ => {}
            }
        }
    }
    Ok(f1_from_counts(tp, fp, fn_))
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn accuracy_examples() {
        assert_eq!(accuracy(&[0, 1, 1, 0], &[0, 1, 0, 0]).unwrap(), 0.75);
        assert_eq!(accuracy(&[2, 2], &[2, 2]).unwrap(), 1.0);
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 0]).is_err());
    }

    #[test]
    fn f1_by_hand() {
        assert_eq!(f1_from_counts(3, 1, 1), 0.75);
        assert_eq!(micro_f1(&[0, 1, 2], &[0, 1, 2], 3).unwrap(), 1.0);
        assert!(micro_f1(&[0, 3], &[0, 1], 3).is_err());
    }

    #[test]
    fn population_std() {
        let (m, s) = mean_std(&[1.0, 3.0]);
        assert_eq!((m, s), (2.0, 1.0));
    }
}

//! Linear cost models `t = setup + per_unit * n` and what follows from them.

use serde::Serialize;

use super::BenchError;

/// Fixed setup plus linear marginal cost. The unit of `n` is whatever the
/// observations were in: words for throughput fits, sentences per shard for
/// break-even fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LinearCostModel {
    pub setup_s: f64,
    pub per_word_p: f64,
    /// Max relative error of the line over the fitted observations.
    pub residual: f64,
}

impl LinearCostModel {
    pub fn new(setup_s: f64, per_word_p: f64) -> Self {
        LinearCostModel {
            setup_s,
            per_word_p,
            residual: 0.0,
        }
    }

    pub fn predict(&self, n: f64) -> f64 {
        self.setup_s + self.per_word_p * n
    }

    /// Share of total time spent on setup when translating `n` units.
    pub fn startup_fraction(&self, n: f64) -> f64 {
        let total = self.predict(n);
        if total == 0.0 {
            0.0
        } else {
            self.setup_s / total
        }
    }

    /// Throughput the model tends to as `n` grows.
    pub fn asymptotic_throughput(&self) -> f64 {
        1.0 / self.per_word_p
    }
}

fn max_relative_error(model: &LinearCostModel, observations: &[(f64, f64)]) -> f64 {
    observations
        .iter()
        .map(|&(n, t)| {
            let err = (model.predict(n) - t).abs();
            if t != 0.0 {
                err / t.abs()
            } else {
                err
            }
        })
        .fold(0.0, f64::max)
}

/// Ordinary least squares over `(n, t)` pairs.
pub fn fit_cost_model(observations: &[(f64, f64)]) -> Result<LinearCostModel, BenchError> {
    if observations.len() < 2 {
        return Err(BenchError::DegenerateFit(format!(
            "need at least two observations, got {}",
            observations.len()
        )));
    }
    if observations
        .iter()
        .any(|(n, t)| !n.is_finite() || !t.is_finite())
    {
        return Err(BenchError::InvalidMeasurement(
            "observations must be finite".into(),
        ));
    }
    let count = observations.len() as f64;
    let mean_n = observations.iter().map(|o| o.0).sum::<f64>() / count;
    let mean_t = observations.iter().map(|o| o.1).sum::<f64>() / count;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(n, t) in observations {
        sxx += (n - mean_n) * (n - mean_n);
        sxy += (n - mean_n) * (t - mean_t);
    }
    if sxx == 0.0 {
        return Err(BenchError::DegenerateFit(
            "all observations share the same n".into(),
        ));
    }
    let per_word_p = sxy / sxx;
    let setup_s = mean_t - per_word_p * mean_n;
    if per_word_p <= 0.0 {
        return Err(BenchError::NonPhysicalFit(format!(
            "fitted marginal cost {per_word_p} is not positive"
        )));
    }
    if setup_s < 0.0 {
        return Err(BenchError::NonPhysicalFit(format!(
            "fitted setup time {setup_s} is negative"
        )));
    }
    let mut model = LinearCostModel::new(setup_s, per_word_p);
    model.residual = max_relative_error(&model, observations);
    Ok(model)
}

/// Smallest `n` whose startup share is at most `epsilon`.
pub fn startup_insignificance_threshold(
    model: &LinearCostModel,
    epsilon: f64,
) -> Result<u64, BenchError> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(BenchError::InvalidArgument(format!(
            "epsilon must lie in (0, 1), got {epsilon}"
        )));
    }
    if model.setup_s <= 0.0 {
        return Ok(0);
    }
    if model.per_word_p <= 0.0 {
        return Err(BenchError::UndefinedThreshold);
    }
    let closed_form = (model.setup_s * (1.0 - epsilon) / (epsilon * model.per_word_p)).ceil();
    let mut n = closed_form.max(0.0) as u64;
    // Settle rounding at the boundary.
    while n > 0 && model.startup_fraction((n - 1) as f64) <= epsilon {
        n -= 1;
    }
    while model.startup_fraction(n as f64) > epsilon {
        n += 1;
    }
    Ok(n)
}

/// Shard size where two per-shard cost lines cross, if they do at a positive
/// size.
pub fn find_breakeven_shard(a: &LinearCostModel, b: &LinearCostModel) -> Option<f64> {
    let slope_gap = b.per_word_p - a.per_word_p;
    if slope_gap == 0.0 {
        return None;
    }
    let m = (a.setup_s - b.setup_s) / slope_gap;
    (m.is_finite() && m > 0.0).then_some(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn exact_points_are_recovered() {
        let obs: Vec<(f64, f64)> = [10.0, 100.0, 1000.0]
            .iter()
            .map(|&n| (n, 2.0 + 0.5 * n))
            .collect();
        let m = fit_cost_model(&obs).unwrap();
        assert!((m.setup_s - 2.0).abs() < 1e-12);
        assert!((m.per_word_p - 0.5).abs() < 1e-15);
        assert!(m.residual < 1e-12);
    }

    #[test]
    fn two_points_interpolate() {
        let m = fit_cost_model(&[(1.0, 3.0), (3.0, 7.0)]).unwrap();
        assert_eq!((m.setup_s, m.per_word_p), (1.0, 2.0));
        assert_eq!(m.residual, 0.0);
    }

    #[test]
    fn degenerate_and_non_physical_fits() {
        assert!(matches!(
            fit_cost_model(&[(1.0, 2.0)]),
            Err(BenchError::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_cost_model(&[(5.0, 2.0), (5.0, 3.0)]),
            Err(BenchError::DegenerateFit(_))
        ));
        assert!(matches!(
            fit_cost_model(&[(1.0, 5.0), (2.0, 4.0)]),
            Err(BenchError::NonPhysicalFit(_))
        ));
    }

    #[test]
    fn threshold_edge_cases() {
        assert_eq!(
            startup_insignificance_threshold(&LinearCostModel::new(0.0, 1e-3), 0.05).unwrap(),
            0
        );
        assert!(matches!(
            startup_insignificance_threshold(&LinearCostModel::new(1.0, 0.0), 0.05),
            Err(BenchError::UndefinedThreshold)
        ));
        assert!(startup_insignificance_threshold(&LinearCostModel::new(1.0, 1e-3), 0.0).is_err());
        assert!(startup_insignificance_threshold(&LinearCostModel::new(1.0, 1e-3), 1.0).is_err());
        // s=1, p=0.01, eps=0.5: fraction 1/(1+0.01n) <= 0.5 from n = 100.
        assert_eq!(
            startup_insignificance_threshold(&LinearCostModel::new(1.0, 0.01), 0.5).unwrap(),
            100
        );
    }

    #[test]
    fn threshold_decreases_with_epsilon() {
        let m = LinearCostModel::new(1.117, 2.1855e-4);
        let mut last = u64::MAX;
        for eps in [0.01, 0.02, 0.05, 0.1, 0.3, 0.6, 0.9, 0.99] {
            let n = startup_insignificance_threshold(&m, eps).unwrap();
            assert!(n <= last);
            last = n;
        }
    }

    #[test]
    fn breakeven_examples() {
        let a = LinearCostModel::new(2.0, 0.01);
        let b = LinearCostModel::new(0.5, 0.02);
        assert_eq!(find_breakeven_shard(&a, &b), Some(150.0));
        assert_eq!(find_breakeven_shard(&a, &a), None);
        assert_eq!(
            find_breakeven_shard(&b, &LinearCostModel::new(0.4, 0.02)),
            None
        );
        // Crossing at negative size.
        assert_eq!(
            find_breakeven_shard(
                &LinearCostModel::new(1.0, 0.01),
                &LinearCostModel::new(2.0, 0.02)
            ),
            None
        );
    }

    proptest! {
        #[test]
        fn fit_round_trip(setup in 0.0f64..500.0, per in 1e-6f64..1.0, ns in prop::collection::btree_set(1u32..1_000_000, 2..8)) {
            let obs: Vec<(f64, f64)> = ns.iter().map(|&n| (n as f64, setup + per * n as f64)).collect();
            let m = fit_cost_model(&obs).unwrap();
            prop_assert!((m.per_word_p - per).abs() <= 1e-9 * per);
            prop_assert!((m.setup_s - setup).abs() <= 1e-9 * (setup + per * 1e6));
        }

        #[test]
        fn threshold_is_tight(setup in 1e-3f64..100.0, per in 1e-7f64..1e-2, eps in 0.001f64..0.999) {
            let m = LinearCostModel::new(setup, per);
            let n = startup_insignificance_threshold(&m, eps).unwrap();
            prop_assert!(m.startup_fraction(n as f64) <= eps);
            if n > 0 {
                prop_assert!(m.startup_fraction((n - 1) as f64) > eps);
            }
        }
    }
}

//! Central finite-difference verification of the analytic gradients.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::data::{sample_pairs, seeded_rng, Rng};
use crate::error::Result;
use crate::losses::{LossKind, WeightConfig};
use crate::ranking::RankedSample;
use crate::trainer::{backprop, loss_value, Example, ScorerFamily, ScorerParams};

/// Max over coordinates of `|fd_i − analytic_i| / max(1, |analytic_i|)`,
/// where `fd_i = (f(x + h e_i) − f(x − h e_i)) / 2h`.
pub fn gradient_check<F>(f: F, analytic: &[f64], point: &[f64], h: f64) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    assert_eq!(analytic.len(), point.len(), "gradient and point differ in length");
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = f(&x);
        x[i] = orig - h;
        let down = f(&x);
        x[i] = orig;
        let fd = (up - down) / (2.0 * h);
        let err = (fd - analytic[i]).abs() / analytic[i].abs().max(1.0);
        worst = worst.max(err);
    }
    worst
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub losses: Vec<LossKind>,
    pub families: Vec<ScorerFamily>,
    pub instances: usize,
    /// Items per instance are drawn uniformly from `2..=max_items`.
    pub max_items: usize,
    pub feature_dim: usize,
    pub hidden: usize,
    pub step: f64,
    pub tol_linear: f64,
    pub tol_mlp: f64,
    pub seed: u64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            losses: LossKind::ALL.to_vec(),
            families: ScorerFamily::ALL.to_vec(),
            instances: 100,
            max_items: 50,
            feature_dim: 4,
            hidden: 6,
            step: 1e-5,
            tol_linear: 1e-5,
            tol_mlp: 1e-4,
            seed: 20_200_521,
        }
    }
}

impl SuiteConfig {
    pub fn tolerance(&self, family: ScorerFamily) -> f64 {
        match family {
            ScorerFamily::Linear => self.tol_linear,
            ScorerFamily::Mlp => self.tol_mlp,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CaseResult {
    pub loss: LossKind,
    pub family: ScorerFamily,
    pub instances: usize,
    pub max_error: f64,
    pub tolerance: f64,
}

impl CaseResult {
    pub fn passed(&self) -> bool {
        self.max_error < self.tolerance
    }

    pub fn name(&self) -> String {
        format!("{}/{}", self.loss, self.family)
    }
}

/// A random list with scores of spread roughly 3 under the drawn parameters.
struct Instance {
    params: ScorerParams,
    example: Example,
}

fn draw_instance(cfg: &SuiteConfig, family: ScorerFamily, rng: &mut Rng) -> Result<Instance> {
    let d = cfg.feature_dim;
    let n = rng.random_range(2..=cfg.max_items.max(2));
    let features: Vec<f64> = (0..n * d).map(|_| rng.sample(StandardNormal)).collect();
    let gt: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let sample = RankedSample::new("gradcheck", d, features, gt)?;
    let normal = |rng: &mut Rng, scale: f64| -> f64 { scale * rng.sample::<f64, _>(StandardNormal) };
    let count = ScorerParams::param_count(family, d, cfg.hidden);
    let theta: Vec<f64> = match family {
        ScorerFamily::Linear => {
            let scale = 3.0 / (d as f64).sqrt();
            (0..count).map(|_| normal(rng, scale)).collect()
        }
        ScorerFamily::Mlp => {
            let h = cfg.hidden;
            let mut theta = Vec::with_capacity(count);
            theta.extend((0..h * d).map(|_| normal(rng, 1.0 / (d as f64).sqrt())));
            theta.extend((0..h).map(|_| normal(rng, 0.5)));
            theta.extend((0..h).map(|_| normal(rng, 3.0 / (h as f64).sqrt())));
            theta.push(normal(rng, 1.0));
            theta
        }
    };
    let params = ScorerParams::from_theta(family, d, cfg.hidden, theta)?;
    // A tie band on the raw scores so the equal-depth branch is exercised.
    let pairs = sample_pairs(&sample, 2 * n, 0.25, rng)?;
    Ok(Instance {
        params,
        example: Example {
            view: sample.view(),
            pairs,
        },
    })
}

/// Checks backprop through every requested loss × scorer family.
pub fn run_suite(cfg: &SuiteConfig) -> Result<Vec<CaseResult>> {
    let weights = WeightConfig::default();
    let mut results = Vec::new();
    for (fi, &family) in cfg.families.iter().enumerate() {
        for (li, &loss) in cfg.losses.iter().enumerate() {
            let case_seed = cfg.seed ^ ((fi as u64) << 32 | li as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let mut rng = seeded_rng(case_seed);
            let mut worst = 0.0f64;
            for _ in 0..cfg.instances {
                let inst = draw_instance(cfg, family, &mut rng)?;
                let (_, analytic) = backprop(&inst.params, &inst.example, loss, &weights)?;
                let f = |theta: &[f64]| {
                    let p = inst
                        .params
                        .with_theta(theta.to_vec())
                        .expect("perturbed parameters stay finite");
                    loss_value(&p, &inst.example, loss, &weights).expect("loss defined near the instance")
                };
                worst = worst.max(gradient_check(f, &analytic, inst.params.theta(), cfg.step));
            }
            results.push(CaseResult {
                loss,
                family,
                instances: cfg.instances,
                max_error: worst,
                tolerance: cfg.tolerance(family),
            });
        }
    }
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_is_exact() {
        let f = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>();
        let point = [0.3, -0.7, 0.5, 0.1];
        let analytic: Vec<f64> = point.iter().map(|v| 2.0 * v).collect();
        assert!(gradient_check(f, &analytic, &point, 1e-5) < 1e-10);
    }

    #[test]
    fn detects_a_wrong_gradient() {
        let f = |x: &[f64]| x[0] * x[0];
        assert!(gradient_check(f, &[1.0], &[2.0], 1e-5) > 0.5);
    }

    #[test]
    fn small_suite_passes() {
        let cfg = SuiteConfig {
            instances: 5,
            max_items: 12,
            ..SuiteConfig::default()
        };
        let results = run_suite(&cfg).unwrap();
        assert_eq!(results.len(), 8);
        for r in &results {
            assert!(r.passed(), "{}: {}", r.name(), r.max_error);
        }
    }
}

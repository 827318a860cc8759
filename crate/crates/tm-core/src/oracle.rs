//! Ground truth for the conditional quantities the learned models target.
//!
//! For Gaussian-mixture targets with N(0,I) source on the linear path
//! x_r = (1-r) x_0 + r x_T, everything is closed-form: the marginal of x_r,
//! the conditional mean E[X_T - X_0 | x_r] (the marginal velocity the flow
//! head's mean must match), and the full conditional law of the difference
//! latent. A kernel-weighted Monte-Carlo estimator backs the same quantities
//! for arbitrary target samplers so the two oracles cross-check each other.

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::toy_data::{gmm8_means, DatasetSpec, GMM8_SIGMA};

#[derive(Debug, Clone)]
pub struct GmmComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Diagonal of the covariance (variances, strictly positive).
    pub var: Vec<f64>,
}

/// A Gaussian mixture with diagonal covariances, standing in for the target.
#[derive(Debug, Clone)]
pub struct GmmTarget {
    pub components: Vec<GmmComponent>,
    pub dim: usize,
}

impl GmmTarget {
    pub fn new(components: Vec<GmmComponent>) -> Result<GmmTarget> {
        let dim = components
            .first()
            .ok_or_else(|| Error::Config("mixture needs at least one component".into()))?
            .mean
            .len();
        let mut total = 0.0;
        for c in &components {
            if c.mean.len() != dim || c.var.len() != dim {
                return Err(Error::Shape("component dimensions disagree".into()));
            }
            if c.weight <= 0.0 {
                return Err(Error::Config("component weights must be positive".into()));
            }
            if c.var.iter().any(|v| *v <= 0.0) {
                return Err(Error::Config("component variances must be positive".into()));
            }
            total += c.weight;
        }
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("weights sum to {total}, expected 1")));
        }
        Ok(GmmTarget { components, dim })
    }

    pub fn single(mean: Vec<f64>, var: Vec<f64>) -> Result<GmmTarget> {
        GmmTarget::new(vec![GmmComponent { weight: 1.0, mean, var }])
    }

    /// The closed-form counterpart of a dataset, where one exists.
    pub fn from_dataset(spec: &DatasetSpec) -> Option<GmmTarget> {
        match spec {
            DatasetSpec::Gmm8 => {
                let comps = gmm8_means()
                    .into_iter()
                    .map(|m| GmmComponent {
                        weight: 0.125,
                        mean: m.to_vec(),
                        var: vec![GMM8_SIGMA * GMM8_SIGMA; 2],
                    })
                    .collect();
                Some(GmmTarget::new(comps).expect("gmm8 target is valid"))
            }
            DatasetSpec::Gauss1d { mean, std } => {
                Some(GmmTarget::single(vec![*mean], vec![std * std]).expect("valid"))
            }
            _ => None,
        }
    }

    pub fn mixture_mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for c in &self.components {
            for (mi, v) in m.iter_mut().zip(&c.mean) {
                *mi += c.weight * v;
            }
        }
        m
    }

    pub fn sample(&self, rng: &mut CounterRng) -> Vec<f64> {
        let mut u = rng.uniform();
        let mut k = 0;
        for (i, c) in self.components.iter().enumerate() {
            k = i;
            if u < c.weight {
                break;
            }
            u -= c.weight;
        }
        let c = &self.components[k];
        c.mean
            .iter()
            .zip(&c.var)
            .map(|(m, v)| m + v.sqrt() * rng.normal())
            .collect()
    }
}

fn check_point(target: &GmmTarget, x: &[f64]) -> Result<()> {
    if x.len() != target.dim {
        return Err(Error::Shape(format!(
            "point dimension {} vs target dimension {}",
            x.len(),
            target.dim
        )));
    }
    Ok(())
}

/// Log density of N(mean, var) at x, per coordinate.
#[inline]
fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    let d = x - mean;
    -0.5 * (d * d / var + var.ln() + (std::f64::consts::TAU).ln())
}

/// Posterior component responsibilities given x_r = x.
fn responsibilities(target: &GmmTarget, x: &[f64], r: f64) -> Vec<f64> {
    let a = 1.0 - r;
    let mut logs: Vec<f64> = target
        .components
        .iter()
        .map(|c| {
            let mut l = c.weight.ln();
            for i in 0..target.dim {
                let dvar = a * a + r * r * c.var[i];
                l += log_normal_pdf(x[i], r * c.mean[i], dvar);
            }
            l
        })
        .collect();
    let m = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for l in logs.iter_mut() {
        *l = (*l - m).exp();
        total += *l;
    }
    logs.iter().map(|l| l / total).collect()
}

/// Exact E[X_T - X_0 | x_r = x] for the mixture target. r = 1 is excluded:
/// the marginal velocity carries a 1/(1-r) factor there.
pub fn gmm_marginal_velocity(target: &GmmTarget, x: &[f64], r: f64) -> Result<Vec<f64>> {
    check_point(target, x)?;
    if !(0.0..1.0).contains(&r) {
        return Err(Error::Range(format!("ratio {r} outside [0,1)")));
    }
    let gamma = responsibilities(target, x, r);
    let a = 1.0 - r;
    let mut u = vec![0.0; target.dim];
    for (c, g) in target.components.iter().zip(&gamma) {
        for i in 0..target.dim {
            let dvar = a * a + r * r * c.var[i];
            let centered = x[i] - r * c.mean[i];
            let u_comp = c.mean[i] + (r * c.var[i] - a) / dvar * centered;
            u[i] += g * u_comp;
        }
    }
    Ok(u)
}

/// Per-coordinate moments of the joint law of (X_0, X_T) given x_r = x, for a
/// single-Gaussian target. Used by the exact posterior sampler and by the
/// chain harness.
#[derive(Debug, Clone)]
pub struct EndpointPosterior {
    pub mean0: Vec<f64>,
    pub mean_t: Vec<f64>,
    pub var0: Vec<f64>,
    pub var_t: Vec<f64>,
    pub cov: Vec<f64>,
}

pub fn gaussian_endpoint_posterior(
    target: &GmmTarget,
    x: &[f64],
    r: f64,
) -> Result<EndpointPosterior> {
    check_point(target, x)?;
    if target.components.len() != 1 {
        return Err(Error::Config(
            "endpoint posterior is closed-form only for a single component".into(),
        ));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Range(format!("ratio {r} outside [0,1]")));
    }
    let c = &target.components[0];
    let a = 1.0 - r;
    let d = target.dim;
    let mut p = EndpointPosterior {
        mean0: vec![0.0; d],
        mean_t: vec![0.0; d],
        var0: vec![0.0; d],
        var_t: vec![0.0; d],
        cov: vec![0.0; d],
    };
    for i in 0..d {
        let dvar = a * a + r * r * c.var[i];
        let centered = x[i] - r * c.mean[i];
        p.mean_t[i] = c.mean[i] + r * c.var[i] * centered / dvar;
        p.mean0[i] = a * centered / dvar;
        p.var_t[i] = c.var[i] * a * a / dvar;
        p.var0[i] = r * r * c.var[i] / dvar;
        p.cov[i] = -a * r * c.var[i] / dvar;
    }
    Ok(p)
}

/// Exact draw from the law of Y = X_T - X_0 given x_r = x (single Gaussian).
/// Per coordinate: mean = mu + (r sigma^2 - (1-r)) (x - r mu) / D, variance =
/// sigma^2 / D with D = (1-r)^2 + r^2 sigma^2.
pub fn gaussian_posterior_sample(
    target: &GmmTarget,
    x: &[f64],
    r: f64,
    rng: &mut CounterRng,
) -> Result<Vec<f64>> {
    check_point(target, x)?;
    if target.components.len() != 1 {
        return Err(Error::Config(
            "posterior sampling is closed-form only for a single component".into(),
        ));
    }
    if !(0.0..=1.0).contains(&r) {
        return Err(Error::Range(format!("ratio {r} outside [0,1]")));
    }
    let c = &target.components[0];
    let a = 1.0 - r;
    let mut y = vec![0.0; target.dim];
    for i in 0..target.dim {
        let dvar = a * a + r * r * c.var[i];
        let mean = c.mean[i] + (r * c.var[i] - a) * (x[i] - r * c.mean[i]) / dvar;
        let var = c.var[i] / dvar;
        y[i] = mean + var.sqrt() * rng.normal();
    }
    Ok(y)
}

/// Kernel-weighted Monte-Carlo estimate of E[X_T - X_0 | x_r = x] for an
/// arbitrary target sampler, with a bootstrap standard error.
pub struct McEstimate {
    pub value: Vec<f64>,
    pub stderr: Vec<f64>,
    pub effective_n: f64,
}

pub fn mc_conditional_expectation(
    sample_target: &mut dyn FnMut(&mut CounterRng) -> Vec<f64>,
    x: &[f64],
    r: f64,
    bandwidth: f64,
    n: usize,
    rng: &mut CounterRng,
) -> Result<McEstimate> {
    if bandwidth <= 0.0 {
        return Err(Error::Range("bandwidth must be positive".into()));
    }
    if n < 1000 {
        return Err(Error::Range("need at least 1000 draws".into()));
    }
    let dim = x.len();
    let a = 1.0 - r;
    let inv2bw2 = 1.0 / (2.0 * bandwidth * bandwidth);
    let mut weights = Vec::with_capacity(n);
    let mut wy = Vec::with_capacity(n);
    for _ in 0..n {
        let xt = sample_target(rng);
        debug_assert_eq!(xt.len(), dim);
        let mut dist2 = 0.0;
        let mut y = vec![0.0; dim];
        for i in 0..dim {
            let x0 = rng.normal();
            let xr = a * x0 + r * xt[i];
            let d = xr - x[i];
            dist2 += d * d;
            y[i] = xt[i] - x0;
        }
        let w = (-dist2 * inv2bw2).exp();
        for yi in y.iter_mut() {
            *yi *= w;
        }
        weights.push(w);
        wy.push(y);
    }
    let sum_w: f64 = weights.iter().sum();
    let sum_w2: f64 = weights.iter().map(|w| w * w).sum();
    let ess = if sum_w2 > 0.0 { sum_w * sum_w / sum_w2 } else { 0.0 };
    if ess < 50.0 {
        return Err(Error::InsufficientData(format!(
            "effective sample size {ess:.1} < 50 at x={x:?}, r={r}"
        )));
    }
    let value: Vec<f64> = (0..dim).map(|i| wy.iter().map(|y| y[i]).sum::<f64>() / sum_w).collect();

    // Bootstrap the ratio estimator: resample draws with replacement.
    let resamples = 200;
    let mut boot = rng.fork(0xB007);
    let mut means = vec![Vec::with_capacity(resamples); dim];
    for _ in 0..resamples {
        let mut bw_sum = 0.0;
        let mut by_sum = vec![0.0; dim];
        for _ in 0..n {
            let idx = (boot.next_u64() % n as u64) as usize;
            bw_sum += weights[idx];
            for i in 0..dim {
                by_sum[i] += wy[idx][i];
            }
        }
        if bw_sum > 0.0 {
            for i in 0..dim {
                means[i].push(by_sum[i] / bw_sum);
            }
        }
    }
    if means.iter().any(|m| m.len() < 2) {
        return Err(Error::InsufficientData("bootstrap resamples degenerate".into()));
    }
    let stderr = means
        .iter()
        .map(|m| {
            let k = m.len() as f64;
            let mu = m.iter().sum::<f64>() / k;
            (m.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (k - 1.0)).sqrt()
        })
        .collect();
    Ok(McEstimate { value, stderr, effective_n: ess })
}

/// A grid of probe points with the velocity evaluated at one ratio r < 1.
#[derive(Debug, Clone)]
pub struct VelocityProbe {
    pub points: Vec<Vec<f64>>,
    pub r: f64,
    pub values: Vec<Vec<f64>>,
}

impl VelocityProbe {
    pub fn closed_form(target: &GmmTarget, points: Vec<Vec<f64>>, r: f64) -> Result<VelocityProbe> {
        let values = points
            .iter()
            .map(|x| gmm_marginal_velocity(target, x, r))
            .collect::<Result<Vec<_>>>()?;
        Ok(VelocityProbe { points, r, values })
    }
}

//! Toy target distributions. Every sampler is a pure function of
//! (spec, count, stream), so any draw can be reproduced from its seed.

use crate::error::{Error, Result};
use crate::rng::CounterRng;
use crate::state::State;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Which target to draw from. All two-dimensional sets have bounded support;
/// the one-dimensional Gaussian carries its own parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum DatasetSpec {
    /// 8 equal-weight Gaussians, means on a radius-2 circle, sigma 0.1.
    Gmm8,
    /// Two interleaved half-circles, noise 0.05.
    TwoMoons,
    /// Uniform over the black cells of a 4x4 board on [-2,2]^2.
    Checkerboard,
    /// Circle of radius 1 with radial noise 0.05.
    Ring,
    Gauss1d { mean: f64, std: f64 },
}

impl DatasetSpec {
    pub fn dim(&self) -> usize {
        match self {
            DatasetSpec::Gauss1d { .. } => 1,
            _ => 2,
        }
    }

    pub fn parse(name: &str, mean: f64, std: f64) -> Result<DatasetSpec> {
        Ok(match name {
            "gmm8" => DatasetSpec::Gmm8,
            "two_moons" => DatasetSpec::TwoMoons,
            "checkerboard" => DatasetSpec::Checkerboard,
            "ring" => DatasetSpec::Ring,
            "gauss1d" => DatasetSpec::Gauss1d { mean, std },
            other => return Err(Error::Config(format!("unknown dataset {other:?}"))),
        })
    }
}

pub const GMM8_RADIUS: f64 = 2.0;
pub const GMM8_SIGMA: f64 = 0.1;

/// Means of the gmm8 components, on the radius-2 circle.
pub fn gmm8_means() -> Vec<[f64; 2]> {
    (0..8)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 8.0;
            [GMM8_RADIUS * a.cos(), GMM8_RADIUS * a.sin()]
        })
        .collect()
}

fn sample_point(spec: &DatasetSpec, rng: &mut CounterRng) -> Vec<f64> {
    match spec {
        DatasetSpec::Gmm8 => {
            let means = gmm8_means();
            let k = (rng.uniform() * 8.0) as usize % 8;
            vec![
                means[k][0] + GMM8_SIGMA * rng.normal(),
                means[k][1] + GMM8_SIGMA * rng.normal(),
            ]
        }
        DatasetSpec::TwoMoons => {
            let noise = 0.05;
            let phi = std::f64::consts::PI * rng.uniform();
            let (x, y) = if rng.uniform() < 0.5 {
                (phi.cos(), phi.sin())
            } else {
                (1.0 - phi.cos(), 0.5 - phi.sin())
            };
            vec![x + noise * rng.normal(), y + noise * rng.normal()]
        }
        DatasetSpec::Checkerboard => {
            // Black cells of the 4x4 board: unit cells with even (i + j).
            let cell = (rng.uniform() * 8.0) as usize % 8;
            let i = cell % 4;
            let j = 2 * (cell / 4) + (i % 2); // even i+j
            vec![
                -2.0 + i as f64 + rng.uniform(),
                -2.0 + j as f64 + rng.uniform(),
            ]
        }
        DatasetSpec::Ring => {
            let a = std::f64::consts::TAU * rng.uniform();
            let r = 1.0 + 0.05 * rng.normal();
            vec![r * a.cos(), r * a.sin()]
        }
        DatasetSpec::Gauss1d { mean, std } => vec![mean + std * rng.normal()],
    }
}

/// Draw `count` points as states with `n_tokens` tokens each.
pub fn sample_dataset(
    spec: &DatasetSpec,
    count: usize,
    n_tokens: usize,
    rng: &mut CounterRng,
) -> Result<Vec<State>> {
    if count < 1 {
        return Err(Error::Config("sample count must be >= 1".into()));
    }
    if spec.dim() % n_tokens != 0 {
        return Err(Error::Shape(format!(
            "dataset dimension {} not divisible into {n_tokens} tokens",
            spec.dim()
        )));
    }
    (0..count)
        .map(|_| State::new(sample_point(spec, rng), n_tokens))
        .collect()
}

/// Dump rows as CSV with columns dim_0..dim_{d-1}.
pub fn write_samples_csv<W: Write>(out: &mut W, samples: &[State]) -> Result<()> {
    let d = samples.first().map_or(0, |s| s.dim());
    let header: Vec<String> = (0..d).map(|i| format!("dim_{i}")).collect();
    writeln!(out, "{}", header.join(","))?;
    for s in samples {
        let row: Vec<String> = s.as_slice().iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_stream;

    #[test]
    fn gmm8_support_bound() {
        let mut rng = rng_stream(4, 0);
        let pts = sample_dataset(&DatasetSpec::Gmm8, 10_000, 2, &mut rng).unwrap();
        let bound = GMM8_RADIUS + 6.0 * GMM8_SIGMA;
        for p in &pts {
            let r = p.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!(r <= bound + 0.2, "sample radius {r} outside construction bound");
        }
    }

    #[test]
    fn fixed_seed_bit_identical() {
        let draw = || {
            let mut rng = rng_stream(77, 1);
            sample_dataset(&DatasetSpec::TwoMoons, 64, 2, &mut rng).unwrap()
        };
        assert_eq!(draw(), draw());
    }

    #[test]
    fn gmm8_mean_near_origin() {
        let mut rng = rng_stream(8, 2);
        let n = 100_000;
        let pts = sample_dataset(&DatasetSpec::Gmm8, n, 2, &mut rng).unwrap();
        let mut m = [0.0f64; 2];
        for p in &pts {
            m[0] += p.as_slice()[0];
            m[1] += p.as_slice()[1];
        }
        // Per-coordinate spread is ~sqrt(2) (means at radius 2), so the mean's
        // stderr is ~sqrt(2)/sqrt(N); allow 3 sigma.
        let tol = 3.0 * (2.0f64).sqrt() / (n as f64).sqrt();
        assert!((m[0] / n as f64).abs() < tol);
        assert!((m[1] / n as f64).abs() < tol);
    }

    #[test]
    fn checkerboard_cells_have_even_parity() {
        let mut rng = rng_stream(15, 3);
        let pts = sample_dataset(&DatasetSpec::Checkerboard, 5_000, 2, &mut rng).unwrap();
        for p in &pts {
            let (x, y) = (p.as_slice()[0], p.as_slice()[1]);
            assert!((-2.0..2.0).contains(&x) && (-2.0..2.0).contains(&y));
            let i = (x + 2.0).floor() as i64;
            let j = (y + 2.0).floor() as i64;
            assert_eq!((i + j) % 2, 0, "point ({x},{y}) lies on a white cell");
        }
    }

    #[test]
    fn ring_radius_concentrated() {
        let mut rng = rng_stream(16, 4);
        let pts = sample_dataset(&DatasetSpec::Ring, 5_000, 2, &mut rng).unwrap();
        for p in &pts {
            let r = p.as_slice().iter().map(|v| v * v).sum::<f64>().sqrt();
            assert!((r - 1.0).abs() < 0.05 * 6.0, "ring radius {r} too far off");
        }
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(
            DatasetSpec::parse("spiral", 0.0, 1.0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn csv_schema() {
        let mut rng = rng_stream(1, 1);
        let pts = sample_dataset(&DatasetSpec::Ring, 3, 2, &mut rng).unwrap();
        let mut buf = Vec::new();
        write_samples_csv(&mut buf, &pts).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "dim_0,dim_1");
        assert_eq!(lines.count(), 3);
    }
}

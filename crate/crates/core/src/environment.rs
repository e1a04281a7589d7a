//! Bandit instances: synthetic generation, reward sampling, ground truth and
//! CSV ingestion.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::linkfn::{LinkKind, LinkModel};
use crate::rng::SimRng;

/// One observed reward.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reward {
    pub value: f64,
    /// The raw draw exceeded the reward bound and was clipped.
    pub truncated: bool,
}

/// A set of arms that can be pulled.
pub trait Environment {
    fn features(&self) -> &[Vec<f64>];

    fn link(&self) -> &LinkModel;

    fn pull(&self, arm: usize, rng: &mut SimRng) -> Result<Reward>;

    /// True mean rewards, when known (simulation mode).
    fn means(&self) -> Option<&[f64]> {
        None
    }

    fn num_arms(&self) -> usize {
        self.features().len()
    }

    fn dim(&self) -> usize {
        self.features().first().map_or(0, Vec::len)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BanditInstance {
    features: Vec<Vec<f64>>,
    theta: Option<Vec<f64>>,
    link: LinkModel,
    means: Option<Vec<f64>>,
    /// Half-width of the uniform noise added to identity-link rewards.
    pub noise_level: f64,
}

fn validate_features(features: &[Vec<f64>]) -> Result<usize> {
    if features.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 arms, got {}",
            features.len()
        )));
    }
    let d = features[0].len();
    if d == 0 {
        return Err(Error::InvalidArgument("feature dimension must be >= 1".into()));
    }
    if let Some(row) = features.iter().find(|r| r.len() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            actual: row.len(),
        });
    }
    Ok(d)
}

impl BanditInstance {
    /// Simulation instance with known parameter; means are `μ(θᵀxᵃ)`.
    pub fn new(features: Vec<Vec<f64>>, theta: Vec<f64>, link: LinkModel) -> Result<Self> {
        let d = validate_features(&features)?;
        if theta.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: theta.len(),
            });
        }
        let means = features.iter().map(|x| link.mu(linalg::dot(&theta, x))).collect();
        Ok(Self {
            features,
            theta: Some(theta),
            link,
            means: Some(means),
            noise_level: 0.1,
        })
    }

    /// Simulation instance with explicitly supplied means (e.g. rates fitted
    /// offline), without a parameter vector.
    pub fn with_means(features: Vec<Vec<f64>>, means: Vec<f64>, link: LinkModel) -> Result<Self> {
        validate_features(&features)?;
        if means.len() != features.len() {
            return Err(Error::DimensionMismatch {
                expected: features.len(),
                actual: means.len(),
            });
        }
        Ok(Self {
            features,
            theta: None,
            link,
            means: Some(means),
            noise_level: 0.1,
        })
    }

    /// Features-only instance: usable for planning, not for simulation.
    pub fn features_only(features: Vec<Vec<f64>>, link: LinkModel) -> Result<Self> {
        validate_features(&features)?;
        Ok(Self {
            features,
            theta: None,
            link,
            means: None,
            noise_level: 0.1,
        })
    }

    pub fn theta(&self) -> Option<&[f64]> {
        self.theta.as_deref()
    }

    pub fn has_ground_truth(&self) -> bool {
        self.means.is_some()
    }
}

impl Environment for BanditInstance {
    fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    fn link(&self) -> &LinkModel {
        &self.link
    }

    fn means(&self) -> Option<&[f64]> {
        self.means.as_deref()
    }

    fn pull(&self, arm: usize, rng: &mut SimRng) -> Result<Reward> {
        let means = self.means.as_ref().ok_or(Error::NoGroundTruth)?;
        let mean = *means.get(arm).ok_or(Error::InvalidArm {
            arm,
            num_arms: means.len(),
        })?;
        let bound = self.link.reward_bound;
        let reward = match self.link.kind {
            LinkKind::Logistic => Reward {
                value: if rng.random::<f64>() < mean { 1.0 } else { 0.0 },
                truncated: false,
            },
            LinkKind::Poisson => {
                let raw: f64 = Poisson::new(mean)
                    .map_err(|e| Error::InvalidArgument(format!("poisson mean {mean}: {e}")))?
                    .sample(rng);
                Reward {
                    value: raw.min(bound),
                    truncated: raw > bound,
                }
            }
            LinkKind::Identity => {
                let noise = if self.noise_level > 0.0 {
                    rng.random_range(-self.noise_level..=self.noise_level)
                } else {
                    0.0
                };
                let raw = mean + noise;
                Reward {
                    value: raw.clamp(-bound, bound),
                    truncated: raw.abs() > bound,
                }
            }
        };
        Ok(reward)
    }
}

/// Synthetic instance: `θ ~ N(0, I_d)`, feature entries i.i.d. uniform on
/// `[−1, 1]`. The parameter bound is `‖θ‖₂`.
pub fn sample_instance(k: usize, d: usize, kind: LinkKind, rng: &mut SimRng) -> Result<BanditInstance> {
    if k < 2 || d == 0 {
        return Err(Error::InvalidArgument(format!("need K >= 2 and d >= 1, got K={k}, d={d}")));
    }
    let theta: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
    let features: Vec<Vec<f64>> = (0..k)
        .map(|_| (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect())
        .collect();
    let s = linalg::dot(&theta, &theta).sqrt().max(f64::MIN_POSITIVE);
    let link = LinkModel::from_features(kind, s, &features, None)?;
    BanditInstance::new(features, theta, link)
}

/// Best arm and optimal gaps.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InstanceStats {
    pub best_arm: usize,
    pub optimal_gaps: Vec<f64>,
    pub delta_min: f64,
}

pub fn instance_stats(env: &dyn Environment) -> Result<InstanceStats> {
    let means = env.means().ok_or(Error::NoGroundTruth)?;
    stats_from_means(means)
}

pub fn stats_from_means(means: &[f64]) -> Result<InstanceStats> {
    if means.len() < 2 {
        return Err(Error::InvalidArgument("need at least 2 arms".into()));
    }
    let best_arm = crate::selector::argmax(means.iter().copied()).expect("non-empty");
    let best = means[best_arm];
    let runner_up = means
        .iter()
        .enumerate()
        .filter(|&(a, _)| a != best_arm)
        .map(|(_, &m)| m)
        .fold(f64::NEG_INFINITY, f64::max);
    let optimal_gaps: Vec<f64> = means
        .iter()
        .enumerate()
        .map(|(a, &m)| if a == best_arm { best - runner_up } else { best - m })
        .collect();
    let delta_min = optimal_gaps.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(InstanceStats {
        best_arm,
        optimal_gaps,
        delta_min,
    })
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_rows(path: &Path, has_header: bool) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            let msg = match e.kind() {
                csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                    format!("ragged row: expected {expected_len} fields, found {len}")
                }
                _ => e.to_string(),
            };
            parse_err(path, line, msg)
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let values = rec
            .iter()
            .map(|cell| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(path, line, format!("non-numeric cell {cell:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

/// Reads `arm_id,f1,...,fd` features and, optionally, a single-row
/// `f1,...,fd` parameter file (header line optional).
///
/// With a parameter file the instance supports simulation and its parameter
/// bound defaults to `‖θ‖₂`; without one, `param_bound` must be given.
pub fn load_instance_csv(
    features_path: &Path,
    theta_path: Option<&Path>,
    kind: LinkKind,
    param_bound: Option<f64>,
) -> Result<BanditInstance> {
    let rows = read_rows(features_path, true)?;
    let mut features = Vec::with_capacity(rows.len());
    for (line, row) in rows {
        if row.len() < 2 {
            return Err(parse_err(features_path, line, "expected arm_id and at least one feature"));
        }
        features.push(row[1..].to_vec());
    }
    if features.len() < 2 {
        return Err(parse_err(features_path, 1, format!("need at least 2 arms, found {}", features.len())));
    }
    let d = features[0].len();

    let theta = match theta_path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| Error::Io(format!("{}: {e}", p.display())))?;
            let has_header = text
                .lines()
                .next()
                .map_or(false, |l| l.split(',').any(|c| c.trim().parse::<f64>().is_err()));
            let rows = read_rows(p, has_header)?;
            if rows.len() != 1 {
                return Err(parse_err(p, 1, format!("expected exactly one parameter row, found {}", rows.len())));
            }
            let (line, theta) = rows.into_iter().next().expect("one row");
            if theta.len() != d {
                return Err(parse_err(
                    p,
                    line,
                    format!("parameter has {} entries but features have d = {d}", theta.len()),
                ));
            }
            Some(theta)
        }
        None => None,
    };

    let s = match (param_bound, &theta) {
        (Some(s), _) => s,
        (None, Some(t)) => linalg::dot(t, t).sqrt().max(f64::MIN_POSITIVE),
        (None, None) => {
            return Err(Error::InvalidArgument(
                "param_bound is required when no parameter file is given".into(),
            ))
        }
    };
    let link = LinkModel::from_features(kind, s, &features, None)?;
    match theta {
        Some(t) => BanditInstance::new(features, t, link),
        None => BanditInstance::features_only(features, link),
    }
}

/// Writes the features (and parameter, if known) in the format read by
/// [`load_instance_csv`]. Values use the shortest round-trip representation.
pub fn write_instance_csv(
    instance: &BanditInstance,
    features_path: &Path,
    theta_path: Option<&Path>,
) -> Result<()> {
    let d = instance.dim();
    let mut f = File::create(features_path)?;
    let header: Vec<String> = std::iter::once("arm_id".to_string())
        .chain((1..=d).map(|i| format!("f{i}")))
        .collect();
    writeln!(f, "{}", header.join(","))?;
    for (a, row) in instance.features().iter().enumerate() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
        writeln!(f, "{a},{}", cells.join(","))?;
    }
    if let (Some(path), Some(theta)) = (theta_path, instance.theta()) {
        let mut g = File::create(path)?;
        let header: Vec<String> = (1..=d).map(|i| format!("f{i}")).collect();
        writeln!(g, "{}", header.join(","))?;
        let cells: Vec<String> = theta.iter().map(|v| format!("{v:?}")).collect();
        writeln!(g, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream_rng, Stream};

    fn logistic_with_means(means: Vec<f64>) -> BanditInstance {
        let k = means.len();
        let features: Vec<Vec<f64>> = (0..k).map(|a| vec![a as f64 + 1.0]).collect();
        let link = LinkModel::from_features(LinkKind::Logistic, 1.0, &features, None).unwrap();
        BanditInstance::with_means(features, means, link).unwrap()
    }

    #[test]
    fn stats_examples() {
        let s = stats_from_means(&[0.9, 0.4, 0.1]).unwrap();
        assert_eq!(s.best_arm, 0);
        assert!((s.optimal_gaps[0] - 0.5).abs() < 1e-15);
        assert!((s.optimal_gaps[1] - 0.5).abs() < 1e-15);
        assert!((s.optimal_gaps[2] - 0.8).abs() < 1e-15);
        assert!((s.delta_min - 0.5).abs() < 1e-15);

        let tied = stats_from_means(&[0.3, 0.3, 0.3]).unwrap();
        assert_eq!(tied.best_arm, 0);
        assert_eq!(tied.optimal_gaps, vec![0.0; 3]);
        assert_eq!(tied.delta_min, 0.0);
    }

    #[test]
    fn identity_noiseless_is_exact() {
        let features = vec![vec![1.0, 0.0], vec![0.5, 0.5]];
        let link = LinkModel::from_features(LinkKind::Identity, 2.0, &features, None).unwrap();
        let mut inst = BanditInstance::new(features, vec![1.0, -1.0], link).unwrap();
        inst.noise_level = 0.0;
        let mut rng = stream_rng(3, Stream::Reward);
        for _ in 0..50 {
            assert_eq!(inst.pull(0, &mut rng).unwrap().value, 1.0);
            assert_eq!(inst.pull(1, &mut rng).unwrap().value, 0.0);
        }
    }

    #[test]
    fn logistic_rewards_are_binary_and_unbiased() {
        let inst = logistic_with_means(vec![0.75, 0.2]);
        let mut rng = stream_rng(11, Stream::Reward);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let r = inst.pull(0, &mut rng).unwrap().value;
            assert!(r == 0.0 || r == 1.0);
            sum += r;
        }
        assert!((sum / n as f64 - 0.75).abs() < 0.01);
    }

    #[test]
    fn invalid_arm_and_missing_truth() {
        let inst = logistic_with_means(vec![0.5, 0.2]);
        let mut rng = stream_rng(0, Stream::Reward);
        assert!(matches!(inst.pull(2, &mut rng), Err(Error::InvalidArm { .. })));
        let link = *inst.link();
        let bare = BanditInstance::features_only(inst.features().to_vec(), link).unwrap();
        assert_eq!(bare.pull(0, &mut rng), Err(Error::NoGroundTruth));
        assert_eq!(instance_stats(&bare), Err(Error::NoGroundTruth));
    }

    #[test]
    fn poisson_truncation_is_reported() {
        let features = vec![vec![1.0], vec![0.0]];
        let link = LinkModel::from_features(LinkKind::Poisson, 2.0, &features, Some(3.0)).unwrap();
        let inst = BanditInstance::new(features, vec![2.0], link).unwrap();
        let mut rng = stream_rng(5, Stream::Reward);
        let mut truncated = 0;
        for _ in 0..1000 {
            let r = inst.pull(0, &mut rng).unwrap();
            assert!(r.value <= 3.0);
            truncated += r.truncated as u32;
        }
        // Mean e² ≈ 7.4 is far above the bound, so most draws are clipped.
        assert!(truncated > 500);
    }

    #[test]
    fn sample_instance_is_seeded() {
        let a = sample_instance(5, 3, LinkKind::Logistic, &mut stream_rng(9, Stream::Instance)).unwrap();
        let b = sample_instance(5, 3, LinkKind::Logistic, &mut stream_rng(9, Stream::Instance)).unwrap();
        assert_eq!(a, b);
        let c = sample_instance(5, 3, LinkKind::Logistic, &mut stream_rng(10, Stream::Instance)).unwrap();
        assert_ne!(a, c);
        assert!(sample_instance(1, 3, LinkKind::Logistic, &mut stream_rng(9, Stream::Instance)).is_err());
    }
}

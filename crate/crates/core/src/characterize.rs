//! Turns a set of stack-distance samples into a [`Characterization`]: a
//! handful of discrete atoms plus one continuous family, refined so the fit
//! is accurate above the smallest cache size of interest.
//!
//! Refinement alternates two steps. Every sample below the threshold
//! `ms / ls` is replaced by a draw from the current model conditioned below
//! the threshold, then the model is refit. The replaced samples follow the
//! model by construction, so each refit spends its accuracy on the upper
//! samples, the ones that decide cache misses.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::distributions::{
    fit_error, fit_error_split, mom_fit, ContinuousModel, DiscreteComponent, Family, Moments,
};
use crate::stackdist::SampleSet;
use crate::trace::AccessKind;
use crate::{Error, Result};

pub const JSON_VERSION: u64 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum FamilySelection {
    /// Try every family and re-select the best one after each refinement.
    #[default]
    Auto,
    /// Select among these once; later refinements keep the chosen family.
    Fixed(Vec<Family>),
}

impl FamilySelection {
    pub fn candidates(&self) -> Vec<Family> {
        match self {
            FamilySelection::Auto => Family::ALL.to_vec(),
            FamilySelection::Fixed(f) => {
                let mut f = f.clone();
                f.sort();
                f.dedup();
                f
            }
        }
    }

    pub fn reselects(&self) -> bool {
        matches!(self, FamilySelection::Auto)
    }

    /// Parses `auto` or a comma-separated family list.
    pub fn parse(text: &str) -> Result<Self> {
        if text.trim() == "auto" {
            return Ok(Self::Auto);
        }
        let families = text
            .split(',')
            .map(|name| {
                Family::from_name(name.trim())
                    .ok_or_else(|| Error::BadConfig(format!("unknown family {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if families.is_empty() {
            return Err(Error::BadConfig("empty family list".into()));
        }
        Ok(Self::Fixed(families))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// Smallest cache size (bytes) predictions will be asked for.
    pub min_cache_size: u64,
    pub line_size: u64,
    pub refinement_rounds: usize,
    /// Minimum relative frequency for a distinct value to become an atom.
    pub atom_threshold: f64,
    pub families: FamilySelection,
    pub seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            min_cache_size: 64,
            line_size: 64,
            refinement_rounds: 3,
            atom_threshold: 0.01,
            families: FamilySelection::Auto,
            seed: 0,
        }
    }
}

impl AnalysisConfig {
    pub fn validate(&self) -> Result<()> {
        if !self.line_size.is_power_of_two() {
            return Err(Error::LineSizeNotPowerOfTwo(self.line_size));
        }
        if self.min_cache_size < self.line_size {
            return Err(Error::BadConfig(format!(
                "minimum cache size {} is smaller than the line size {}",
                self.min_cache_size, self.line_size
            )));
        }
        if !self.min_cache_size.is_multiple_of(self.line_size) {
            return Err(Error::BadConfig(format!(
                "minimum cache size {} is not a multiple of the line size {}",
                self.min_cache_size, self.line_size
            )));
        }
        if !(self.atom_threshold > 0.0 && self.atom_threshold < 1.0) {
            return Err(Error::BadConfig(format!(
                "atom threshold {} must lie in (0, 1)",
                self.atom_threshold
            )));
        }
        if self.families.candidates().is_empty() {
            return Err(Error::BadConfig("no candidate families".into()));
        }
        Ok(())
    }

    /// `ms / ls`, the refinement threshold in lines.
    pub fn threshold_lines(&self) -> u64 {
        self.min_cache_size / self.line_size
    }
}

/// Fit errors after one fit: the initial one (`round == 0`) or a refinement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundDiagnostics {
    pub round: usize,
    pub family: Family,
    /// Quantile MSE contribution of samples at or above the threshold.
    pub eps_up: f64,
    /// Contribution of samples below the threshold.
    pub eps_down: f64,
    /// False when the round could not resample (no model mass below the
    /// threshold, or no samples there).
    pub biased: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct RefinementDiagnostics {
    pub rounds: Vec<RoundDiagnostics>,
}

/// A portable description of a program's stack-distance distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct Characterization {
    pub discrete: DiscreteComponent,
    pub continuous: Option<ContinuousModel>,
    pub continuous_weight: f64,
    pub threshold_lines: u64,
    pub line_size: u64,
    pub kind: AccessKind,
    pub sample_count: usize,
    pub sampling_interval: u64,
    pub cold_fraction: f64,
    pub refinement_rounds: usize,
    pub fit_error: f64,
    pub seed: u64,
}

impl Characterization {
    /// A characterization made of one continuous model only.
    pub fn from_model(model: ContinuousModel, line_size: u64) -> Self {
        Self {
            discrete: DiscreteComponent::default(),
            continuous: Some(model),
            continuous_weight: 1.0,
            threshold_lines: 1,
            line_size,
            kind: AccessKind::Data,
            sample_count: 0,
            sampling_interval: 1,
            cold_fraction: 0.0,
            refinement_rounds: 0,
            fit_error: 0.0,
            seed: 0,
        }
    }

    /// A characterization made of atoms only; `atoms` are `(value, probability)`.
    pub fn from_atoms(atoms: Vec<(f64, f64)>, line_size: u64) -> Self {
        let mut c = Self::from_model(ContinuousModel::Uniform { a: 0.0, b: 1.0 }, line_size);
        c.continuous = None;
        c.continuous_weight = 0.0;
        c.discrete = DiscreteComponent {
            atoms,
            total_weight: 1.0,
        };
        c
    }

    /// Weighted mixture of `atoms` (weight `1 − continuous_weight`) and `model`.
    pub fn mixture(
        atoms: Vec<(f64, f64)>,
        model: ContinuousModel,
        continuous_weight: f64,
        line_size: u64,
    ) -> Self {
        let mut c = Self::from_model(model, line_size);
        c.continuous_weight = continuous_weight;
        c.discrete = DiscreteComponent {
            atoms,
            total_weight: 1.0 - continuous_weight,
        };
        c
    }

    /// Mixture `P(X ≤ x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let discrete: f64 = self
            .discrete
            .atoms
            .iter()
            .filter(|&&(v, _)| v <= x)
            .map(|&(_, p)| p)
            .sum();
        let continuous = self.continuous.map_or(0.0, |m| m.cdf(x));
        self.discrete.total_weight * discrete + self.continuous_weight * continuous
    }

    /// Mixture `P(X ≥ x)`; at `x = C` this is the capacity miss ratio.
    pub fn tail_at_least(&self, x: f64) -> f64 {
        let discrete = self.discrete.total_weight * self.discrete.tail_at_least(x);
        let continuous = self
            .continuous
            .map_or(0.0, |m| self.continuous_weight * m.survival(x));
        (discrete + continuous).clamp(0.0, 1.0)
    }

    /// One draw from the mixture, clamped to be non-negative.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let take_atom = match self.continuous {
            None => true,
            Some(_) if self.discrete.is_empty() => false,
            Some(_) => rng.random::<f64>() < self.discrete.total_weight,
        };
        if take_atom {
            self.discrete.draw(rng)
        } else {
            self.continuous.map_or(0.0, |m| m.sample(rng).max(0.0))
        }
    }

    pub fn to_json_value(&self) -> Value {
        let atoms: Vec<Value> = self
            .discrete
            .atoms
            .iter()
            .map(|&(v, p)| json!([v, p]))
            .collect();
        let continuous = match self.continuous {
            None => Value::Null,
            Some(m) => {
                let params: Map<String, Value> = m
                    .params()
                    .into_iter()
                    .map(|(k, v)| (k.to_string(), json!(v)))
                    .collect();
                json!({
                    "family": m.family().name(),
                    "params": params,
                    "weight": self.continuous_weight,
                })
            }
        };
        json!({
            "version": JSON_VERSION,
            "kind": self.kind.name(),
            "line_size": self.line_size,
            "threshold_lines": self.threshold_lines,
            "sample_count": self.sample_count,
            "sampling_interval": self.sampling_interval,
            "cold_fraction": self.cold_fraction,
            "discrete": { "weight": self.discrete.total_weight, "atoms": atoms },
            "continuous": continuous,
            "refinement_rounds": self.refinement_rounds,
            "fit_error": self.fit_error,
            "seed": self.seed,
        })
    }

    /// Canonical, key-sorted, single-line JSON.
    pub fn to_json(&self) -> String {
        // serde_json's default map is ordered, so keys come out sorted.
        self.to_json_value().to_string()
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let bad = |msg: String| Error::BadCharacterization(msg);
        let v: Value = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
        let uint = |key: &str| {
            v.get(key)
                .and_then(Value::as_u64)
                .ok_or_else(|| bad(format!("missing or non-integer {key:?}")))
        };
        let real = |obj: &Value, key: &str| {
            obj.get(key)
                .and_then(Value::as_f64)
                .ok_or_else(|| bad(format!("missing or non-numeric {key:?}")))
        };

        let version = uint("version")?;
        if version != JSON_VERSION {
            return Err(bad(format!("unsupported version {version}")));
        }
        let kind = match v.get("kind").and_then(Value::as_str) {
            Some("instruction") => AccessKind::Instruction,
            Some("data") => AccessKind::Data,
            other => return Err(bad(format!("bad kind {other:?}"))),
        };

        let discrete_v = v
            .get("discrete")
            .ok_or_else(|| bad("missing \"discrete\"".into()))?;
        let atoms = discrete_v
            .get("atoms")
            .and_then(Value::as_array)
            .ok_or_else(|| bad("missing discrete atoms".into()))?
            .iter()
            .map(|pair| match pair.as_array().map(Vec::as_slice) {
                Some([val, p]) => match (val.as_f64(), p.as_f64()) {
                    (Some(val), Some(p)) => Ok((val, p)),
                    _ => Err(bad(format!("bad atom {pair}"))),
                },
                _ => Err(bad(format!("bad atom {pair}"))),
            })
            .collect::<Result<Vec<_>>>()?;
        let discrete = DiscreteComponent {
            atoms,
            total_weight: real(discrete_v, "weight")?,
        };

        let (continuous, continuous_weight) = match v.get("continuous") {
            None | Some(Value::Null) => (None, 0.0),
            Some(c) => {
                let name = c.get("family").and_then(Value::as_str).unwrap_or_default();
                let family = Family::from_name(name)
                    .ok_or_else(|| bad(format!("unknown family {name:?}")))?;
                let params = c
                    .get("params")
                    .ok_or_else(|| bad("missing params".into()))?;
                let model = ContinuousModel::from_params(family, |k| params.get(k)?.as_f64())?;
                (Some(model), real(c, "weight")?)
            }
        };

        let c = Self {
            discrete,
            continuous,
            continuous_weight,
            threshold_lines: uint("threshold_lines")?,
            line_size: uint("line_size")?,
            kind,
            sample_count: uint("sample_count")? as usize,
            sampling_interval: uint("sampling_interval")?,
            cold_fraction: real(&v, "cold_fraction")?,
            refinement_rounds: uint("refinement_rounds")? as usize,
            fit_error: real(&v, "fit_error")?,
            seed: uint("seed")?,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::BadCharacterization(msg));
        if !self.line_size.is_power_of_two() {
            return bad(format!(
                "line size {} is not a power of two",
                self.line_size
            ));
        }
        let w = self.discrete.total_weight + self.continuous_weight;
        if (w - 1.0).abs() > 1e-9 {
            return bad(format!("component weights sum to {w}"));
        }
        if self.continuous.is_none() && self.continuous_weight != 0.0 {
            return bad("continuous weight without a continuous model".into());
        }
        if !self.discrete.atoms.is_empty() {
            let p: f64 = self.discrete.atoms.iter().map(|a| a.1).sum();
            if (p - 1.0).abs() > 1e-9 {
                return bad(format!("atom probabilities sum to {p}"));
            }
            if self.discrete.atoms.windows(2).any(|w| w[0].0 >= w[1].0) {
                return bad("atom values are not strictly increasing".into());
            }
        } else if self.discrete.total_weight > 1e-9 {
            return bad("discrete weight without atoms".into());
        }
        if !(0.0..=1.0).contains(&self.cold_fraction) {
            return bad(format!(
                "cold fraction {} outside [0, 1]",
                self.cold_fraction
            ));
        }
        Ok(())
    }
}

/// Moves every distinct value with relative frequency `≥ atom_threshold`
/// into a [`DiscreteComponent`]; returns it with the remaining samples.
pub fn split_discrete(samples: &[f64], atom_threshold: f64) -> (DiscreteComponent, Vec<f64>) {
    let n = samples.len();
    if n == 0 {
        return (DiscreteComponent::default(), Vec::new());
    }
    let mut counts: HashMap<u64, usize> = HashMap::new();
    for &s in samples {
        *counts.entry(key(s)).or_default() += 1;
    }
    let min_count = atom_threshold * n as f64;
    let atoms: HashMap<u64, usize> = counts
        .into_iter()
        .filter(|&(_, c)| c as f64 >= min_count)
        .collect();
    let residual = samples
        .iter()
        .copied()
        .filter(|&s| !atoms.contains_key(&key(s)))
        .collect();
    let component = DiscreteComponent::from_counts(
        atoms
            .into_iter()
            .map(|(k, c)| (f64::from_bits(k), c))
            .collect(),
        n,
    );
    (component, residual)
}

fn key(x: f64) -> u64 {
    // Fold -0.0 into 0.0.
    (x + 0.0).to_bits()
}

/// Method-of-Moments fits of every candidate family; returns the one with the
/// smallest quantile error. Ties go to the earlier family in
/// [`Family::ALL`] order.
pub fn fit_best(samples: &[f64], families: &[Family]) -> Result<(ContinuousModel, f64)> {
    if samples.len() < 2 {
        return Err(Error::Empty("fitting needs at least two residual samples"));
    }
    let m = Moments::from_samples(samples)?;
    let mut families = families.to_vec();
    families.sort();
    families.dedup();

    let mut best: Option<(ContinuousModel, f64)> = None;
    let mut last_err = None;
    for family in families {
        let model = match mom_fit(family, &m) {
            Ok(model) => model,
            Err(e) => {
                last_err = Some(e);
                continue;
            }
        };
        let err = fit_error(&model, samples)?;
        if !err.is_finite() {
            continue;
        }
        if best.is_none_or(|(_, e)| err < e) {
            best = Some((model, err));
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| Error::Degenerate("no candidate family could be fitted".into()))
    })
}

/// Replaces every sample below `threshold` by a model draw conditioned below
/// it. Samples at or above the threshold keep their values and positions.
pub fn bias<R: Rng + ?Sized>(
    samples: &[f64],
    model: &ContinuousModel,
    threshold: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if samples.iter().any(|&s| s < threshold) && !(model.cdf(threshold) > 0.0) {
        return Err(Error::NullConditioning { threshold });
    }
    samples
        .iter()
        .map(|&s| {
            if s < threshold {
                model.sample_below(threshold, rng)
            } else {
                Ok(s)
            }
        })
        .collect()
}

fn round_diagnostics(
    round: usize,
    model: &ContinuousModel,
    data: &[f64],
    threshold: f64,
    biased: bool,
) -> Result<RoundDiagnostics> {
    let (eps_up, eps_down) = fit_error_split(model, data, threshold)?;
    Ok(RoundDiagnostics {
        round,
        family: model.family(),
        eps_up,
        eps_down,
        biased,
    })
}

/// The refined fit: an initial [`fit_best`] followed by
/// `config.refinement_rounds` rounds of [`bias`] and refit.
pub fn refined_fit(
    samples: &[f64],
    config: &AnalysisConfig,
) -> Result<(ContinuousModel, RefinementDiagnostics)> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    refined_fit_with_rng(samples, config, &mut rng)
}

pub fn refined_fit_with_rng<R: Rng + ?Sized>(
    samples: &[f64],
    config: &AnalysisConfig,
    rng: &mut R,
) -> Result<(ContinuousModel, RefinementDiagnostics)> {
    config.validate()?;
    let threshold = config.threshold_lines() as f64;
    let candidates = config.families.candidates();
    let (mut model, _) = fit_best(samples, &candidates)?;

    let mut diagnostics = RefinementDiagnostics::default();
    diagnostics
        .rounds
        .push(round_diagnostics(0, &model, samples, threshold, false)?);

    let has_lower = samples.iter().any(|&s| s < threshold);
    let mut data = samples.to_vec();
    for round in 1..=config.refinement_rounds {
        let families = if config.families.reselects() {
            candidates.clone()
        } else {
            vec![model.family()]
        };
        let biased = match bias(&data, &model, threshold, rng) {
            Ok(next) => {
                data = next;
                has_lower
            }
            Err(Error::NullConditioning { .. }) => false,
            Err(e) => return Err(e),
        };
        model = fit_best(&data, &families)?.0;
        diagnostics
            .rounds
            .push(round_diagnostics(round, &model, &data, threshold, biased)?);
    }
    Ok((model, diagnostics))
}

/// Full pipeline: atoms, refined continuous fit of the rest, mixture weights.
pub fn characterize(
    samples: &SampleSet,
    cold_fraction: f64,
    config: &AnalysisConfig,
) -> Result<Characterization> {
    characterize_with_diagnostics(samples, cold_fraction, config).map(|(c, _)| c)
}

pub fn characterize_with_diagnostics(
    samples: &SampleSet,
    cold_fraction: f64,
    config: &AnalysisConfig,
) -> Result<(Characterization, RefinementDiagnostics)> {
    config.validate()?;
    if samples.is_empty() {
        return Err(Error::Empty("sample set has no finite distances"));
    }
    if samples.line_size != config.line_size {
        return Err(Error::LineSizeMismatch {
            left: samples.line_size,
            right: config.line_size,
        });
    }
    if !(0.0..=1.0).contains(&cold_fraction) {
        return Err(Error::BadConfig(format!(
            "cold fraction {cold_fraction} outside [0, 1]"
        )));
    }

    let n = samples.len();
    let (mut discrete, residual) = split_discrete(&samples.samples, config.atom_threshold);
    let mut diagnostics = RefinementDiagnostics::default();
    let mut continuous = None;
    let mut fit_err = 0.0;

    if !residual.is_empty() {
        match refined_fit(&residual, config) {
            Ok((model, diag)) => {
                fit_err = fit_error(&model, &residual)?;
                continuous = Some(model);
                diagnostics = diag;
            }
            Err(Error::Empty(_) | Error::Degenerate(_)) => {
                // Nothing continuous to fit: every distinct value becomes an atom.
                discrete = split_discrete(&samples.samples, f64::MIN_POSITIVE).0;
            }
            Err(e) => return Err(e),
        }
    }

    let continuous_weight = if continuous.is_some() {
        residual.len() as f64 / n as f64
    } else {
        0.0
    };
    if continuous.is_none() {
        discrete.total_weight = 1.0;
    }

    let c = Characterization {
        discrete,
        continuous,
        continuous_weight,
        threshold_lines: config.threshold_lines(),
        line_size: config.line_size,
        kind: samples.kind,
        sample_count: n,
        sampling_interval: samples.sampling_interval,
        cold_fraction,
        refinement_rounds: config.refinement_rounds,
        fit_error: fit_err,
        seed: config.seed,
    };
    Ok((c, diagnostics))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(threshold_lines: u64, rounds: usize) -> AnalysisConfig {
        AnalysisConfig {
            min_cache_size: threshold_lines * 64,
            refinement_rounds: rounds,
            ..AnalysisConfig::default()
        }
    }

    fn set(samples: Vec<f64>) -> SampleSet {
        SampleSet::from_values(samples, 64, AccessKind::Data)
    }

    fn gamma_draws(n: usize, seed: u64) -> Vec<f64> {
        let g = ContinuousModel::gamma(5.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| g.sample(&mut rng)).collect()
    }

    #[test]
    fn config_validation() {
        assert!(AnalysisConfig::default().validate().is_ok());
        let bad = [
            AnalysisConfig {
                line_size: 48,
                ..Default::default()
            },
            AnalysisConfig {
                min_cache_size: 32,
                ..Default::default()
            },
            AnalysisConfig {
                min_cache_size: 100,
                ..Default::default()
            },
            AnalysisConfig {
                atom_threshold: 0.0,
                ..Default::default()
            },
            AnalysisConfig {
                atom_threshold: 1.0,
                ..Default::default()
            },
            AnalysisConfig {
                families: FamilySelection::Fixed(vec![]),
                ..Default::default()
            },
        ];
        for c in bad {
            assert!(c.validate().is_err(), "{c:?}");
        }
        assert_eq!(config(16, 0).threshold_lines(), 16);
    }

    #[test]
    fn family_selection_parsing() {
        assert_eq!(
            FamilySelection::parse("auto").unwrap(),
            FamilySelection::Auto
        );
        assert_eq!(
            FamilySelection::parse("gpd, gamma").unwrap().candidates(),
            vec![Family::Gamma, Family::Gpd]
        );
        assert!(FamilySelection::parse("gamma,normal").is_err());
    }

    #[test]
    fn split_examples() {
        let (d, r) = split_discrete(&[1023.0; 40], 0.01);
        assert_eq!(d.atoms, vec![(1023.0, 1.0)]);
        assert_eq!(d.total_weight, 1.0);
        assert!(r.is_empty());

        let (d, r) = split_discrete(&[5.0, 5.0, 5.0, 5.0, 9.0], 0.5);
        assert_eq!(d.atoms, vec![(5.0, 1.0)]);
        assert_eq!(d.total_weight, 0.8);
        assert_eq!(r, vec![9.0]);

        let (d, r) = split_discrete(&[], 0.1);
        assert!(d.is_empty() && r.is_empty());
    }

    #[test]
    fn fit_best_minimal_and_degenerate() {
        let (m, e) = fit_best(&[2.0, 8.0], &Family::ALL).unwrap();
        assert!(e.is_finite() && e >= 0.0, "{m}");
        assert!(fit_best(&[3.0, 3.0, 3.0], &Family::ALL).is_err());
        assert!(fit_best(&[3.0], &Family::ALL).is_err());
    }

    #[test]
    fn fit_best_picks_gamma_for_gamma_draws() {
        let (m, _) = fit_best(&gamma_draws(20_000, 4), &Family::ALL).unwrap();
        assert_eq!(m.family(), Family::Gamma);
        let uniform: Vec<f64> = {
            let u = ContinuousModel::uniform(0.0, 1000.0).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            (0..20_000).map(|_| u.sample(&mut rng)).collect()
        };
        assert_eq!(
            fit_best(&uniform, &Family::ALL).unwrap().0.family(),
            Family::Uniform
        );
    }

    #[test]
    fn bias_contract() {
        let model = ContinuousModel::uniform(0.0, 100.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let above = [60.0, 70.0, 99.0];
        assert_eq!(
            bias(&above, &model, 50.0, &mut rng).unwrap(),
            above.to_vec()
        );

        let out = bias(&[1.0, 2.0, 100.0], &model, 50.0, &mut rng).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out[0] < 50.0 && out[1] < 50.0);
        assert_eq!(out[2], 100.0);

        let shifted = ContinuousModel::uniform(60.0, 100.0).unwrap();
        assert!(matches!(
            bias(&[1.0, 80.0], &shifted, 50.0, &mut rng),
            Err(Error::NullConditioning { .. })
        ));
        assert!(bias(&[80.0], &shifted, 50.0, &mut rng).is_ok());
    }

    #[test]
    fn zero_rounds_equals_plain_fit() {
        let draws = gamma_draws(2000, 7);
        let (m, diag) = refined_fit(&draws, &config(8, 0)).unwrap();
        assert_eq!(m, fit_best(&draws, &Family::ALL).unwrap().0);
        assert_eq!(diag.rounds.len(), 1);
    }

    #[test]
    fn refinement_is_noop_without_lower_samples() {
        let draws: Vec<f64> = gamma_draws(2000, 9).into_iter().map(|x| x + 10.0).collect();
        let (m, diag) = refined_fit(&draws, &config(8, 3)).unwrap();
        assert_eq!(m, fit_best(&draws, &Family::ALL).unwrap().0);
        assert_eq!(diag.rounds.len(), 4);
        assert!(diag.rounds.iter().all(|r| !r.biased && r.eps_down == 0.0));
        assert!(diag.rounds.windows(2).all(|w| w[0].eps_up == w[1].eps_up));
    }

    #[test]
    fn fixed_family_is_held() {
        let cfg = AnalysisConfig {
            families: FamilySelection::Fixed(vec![Family::HalfNormal]),
            ..config(8, 3)
        };
        let (m, diag) = refined_fit(&gamma_draws(1000, 1), &cfg).unwrap();
        assert_eq!(m.family(), Family::HalfNormal);
        assert!(diag.rounds.iter().all(|r| r.family == Family::HalfNormal));
    }

    #[test]
    fn characterize_cyclic_is_pure_discrete() {
        let c = characterize(&set(vec![1023.0; 500]), 0.002, &config(1, 3)).unwrap();
        assert!(c.continuous.is_none());
        assert_eq!(c.continuous_weight, 0.0);
        assert_eq!(c.discrete.atoms, vec![(1023.0, 1.0)]);
        assert_eq!(c.discrete.total_weight, 1.0);
        assert_eq!(c.cold_fraction, 0.002);
        c.validate().unwrap();
    }

    #[test]
    fn characterize_gamma_is_pure_continuous() {
        let c = characterize(&set(gamma_draws(4096, 3)), 0.0, &config(8, 3)).unwrap();
        assert_eq!(c.continuous_weight, 1.0);
        assert!(c.discrete.is_empty());
        assert_eq!(c.continuous.unwrap().family(), Family::Gamma);
    }

    #[test]
    fn unfittable_residual_becomes_atoms() {
        // 1023 dominates; the lone 7 cannot be fit and joins the atoms.
        let mut s = vec![1023.0; 200];
        s.push(7.0);
        let c = characterize(&set(s), 0.0, &config(1, 3)).unwrap();
        assert!(c.continuous.is_none());
        assert_eq!(c.discrete.atoms.len(), 2);
        assert_eq!(c.discrete.total_weight, 1.0);
        c.validate().unwrap();
    }

    #[test]
    fn characterize_errors() {
        assert!(matches!(
            characterize(&set(vec![]), 0.0, &config(1, 0)),
            Err(Error::Empty(_))
        ));
        let mut other = set(vec![1.0, 2.0]);
        other.line_size = 32;
        assert!(matches!(
            characterize(&other, 0.0, &config(1, 0)),
            Err(Error::LineSizeMismatch { .. })
        ));
        assert!(characterize(&set(vec![1.0, 2.0]), 1.5, &config(1, 0)).is_err());
    }

    #[test]
    fn deterministic_given_seed() {
        let s = set(gamma_draws(3000, 5));
        let a = characterize(&s, 0.0, &config(16, 3)).unwrap();
        let b = characterize(&s, 0.0, &config(16, 3)).unwrap();
        assert_eq!(a.to_json(), b.to_json());
    }

    #[test]
    fn json_round_trip_and_shape() {
        let c = Characterization::mixture(
            vec![(10.0, 0.25), (1023.0, 0.75)],
            ContinuousModel::gamma(5.0, 2.0).unwrap(),
            0.5,
            64,
        );
        let text = c.to_json();
        assert!(text.len() < 1024);
        assert!(text.starts_with("{\"cold_fraction\":0.0,\"continuous\":{\"family\":\"gamma\""));
        assert_eq!(Characterization::from_json(&text).unwrap(), c);

        let discrete = Characterization::from_atoms(vec![(1023.0, 1.0)], 64);
        let text = discrete.to_json();
        assert!(text.contains("\"continuous\":null"));
        assert_eq!(Characterization::from_json(&text).unwrap(), discrete);

        assert!(Characterization::from_json("{}").is_err());
        let broken = text.replace("\"version\":1", "\"version\":2");
        assert!(Characterization::from_json(&broken).is_err());
        let broken = text.replace("[1023.0,1.0]", "[1023.0,0.5]");
        assert!(Characterization::from_json(&broken).is_err());
    }

    #[test]
    fn mixture_cdf_monotone_to_one() {
        let c = Characterization::mixture(
            vec![(3.0, 0.5), (40.0, 0.5)],
            ContinuousModel::gpd(0.3, 4.0).unwrap(),
            0.4,
            64,
        );
        let mut prev = 0.0;
        for i in 0..2000 {
            let v = c.cdf(i as f64 * 0.5);
            assert!(v >= prev);
            prev = v;
        }
        assert!((c.cdf(1e12) - 1.0).abs() < 1e-9);
    }
}

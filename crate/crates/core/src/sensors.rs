//! Binary proposition sensors with sensitivity/specificity, their Bayes
//! posteriors, and the noisy labelling function built on top of them.

use rand::Rng;

use crate::error::{Error, Result};
use crate::events::{Label, PropId, ProbLabel};

/// One binary sensor. `sensitivity` = P(detect | occurred),
/// `specificity` = P(no detect | not occurred), `prior` = P(occurred).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SensorSpec {
    pub sensitivity: f64,
    pub specificity: f64,
    pub prior: f64,
}

impl SensorSpec {
    pub fn new(sensitivity: f64, specificity: f64, prior: f64) -> Result<Self> {
        for p in [sensitivity, specificity, prior] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::ProbabilityOutOfRange(p));
            }
        }
        Ok(SensorSpec {
            sensitivity,
            specificity,
            prior,
        })
    }

    pub fn perfect(prior: f64) -> Result<Self> {
        SensorSpec::new(1.0, 1.0, prior)
    }

    /// Sensitivity and specificity both set to `confidence`.
    pub fn with_confidence(confidence: f64, prior: f64) -> Result<Self> {
        SensorSpec::new(confidence, confidence, prior)
    }

    /// Symmetric sensor whose detection posterior equals `target`.
    pub fn targeted(prior: f64, target: f64) -> Result<Self> {
        if target == 1.0 {
            return SensorSpec::perfect(prior);
        }
        SensorSpec::with_confidence(solve_confidence(prior, target)?, prior)
    }
}

/// P(occurred | reading) by Bayes' rule.
pub fn posterior(spec: SensorSpec, detected: bool) -> Result<f64> {
    let (like_true, like_false) = if detected {
        (spec.sensitivity, 1.0 - spec.specificity)
    } else {
        (1.0 - spec.sensitivity, spec.specificity)
    };
    let num = like_true * spec.prior;
    let den = num + like_false * (1.0 - spec.prior);
    if den <= 0.0 {
        return Err(Error::DegenerateSensor);
    }
    Ok(num / den)
}

/// Confidence `c` such that a sensor with sensitivity = specificity = `c`
/// has detection posterior `target` under `prior`.
pub fn solve_confidence(prior: f64, target: f64) -> Result<f64> {
    let infeasible = |confidence| Error::InfeasibleTarget {
        prior,
        target,
        confidence,
    };
    if !(prior > 0.0 && prior < 1.0) || !(target > 0.0 && target < 1.0) {
        return Err(infeasible(f64::NAN));
    }
    let den = prior + target - 2.0 * prior * target;
    if den == 0.0 {
        return Err(infeasible(f64::NAN));
    }
    let c = target * (1.0 - prior) / den;
    if !(0.0..=1.0).contains(&c) {
        return Err(infeasible(c));
    }
    Ok(c)
}

/// One sensor per proposition, with both posteriors precomputed.
#[derive(Clone, Debug, PartialEq)]
pub struct SensorBank {
    specs: Vec<SensorSpec>,
    on_detect: Vec<f64>,
    on_miss: Vec<f64>,
}

impl SensorBank {
    /// Every prior must lie in (0, 1).
    pub fn new(specs: Vec<SensorSpec>) -> Result<Self> {
        let mut on_detect = Vec::with_capacity(specs.len());
        let mut on_miss = Vec::with_capacity(specs.len());
        for s in &specs {
            if !(s.prior > 0.0 && s.prior < 1.0) {
                return Err(Error::ProbabilityOutOfRange(s.prior));
            }
            on_detect.push(posterior(*s, true)?);
            on_miss.push(posterior(*s, false)?);
        }
        Ok(SensorBank {
            specs,
            on_detect,
            on_miss,
        })
    }

    pub fn perfect(priors: &[f64]) -> Result<Self> {
        SensorBank::new(
            priors
                .iter()
                .map(|&p| SensorSpec::perfect(p))
                .collect::<Result<_>>()?,
        )
    }

    /// Sensors in `noisy` get detection posterior `target`; the rest are perfect.
    pub fn targeted(priors: &[f64], noisy: Label, target: f64) -> Result<Self> {
        SensorBank::new(
            priors
                .iter()
                .enumerate()
                .map(|(i, &p)| {
                    if noisy.contains(i as PropId) {
                        SensorSpec::targeted(p, target)
                    } else {
                        SensorSpec::perfect(p)
                    }
                })
                .collect::<Result<_>>()?,
        )
    }

    pub fn specs(&self) -> &[SensorSpec] {
        &self.specs
    }

    pub fn len(&self) -> usize {
        self.specs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.specs.is_empty()
    }

    pub fn posterior_if(&self, id: PropId, detected: bool) -> f64 {
        if detected {
            self.on_detect[id as usize]
        } else {
            self.on_miss[id as usize]
        }
    }
}

/// Noisy labelling function: simulates every sensor on the ground truth and
/// returns the raw detections together with their posteriors.
pub fn sense_detailed<R: Rng + ?Sized>(
    bank: &SensorBank,
    ground_truth: Label,
    rng: &mut R,
) -> (Label, ProbLabel) {
    let mut detected = Label::EMPTY;
    let mut probs = Vec::with_capacity(bank.len());
    for (i, spec) in bank.specs.iter().enumerate() {
        let id = i as PropId;
        let p_detect = if ground_truth.contains(id) {
            spec.sensitivity
        } else {
            1.0 - spec.specificity
        };
        let hit = rng.gen_bool(p_detect);
        if hit {
            detected = detected.with(id);
        }
        probs.push(bank.posterior_if(id, hit));
    }
    (detected, ProbLabel::new(probs).expect("posteriors lie in [0, 1]"))
}

pub fn sense<R: Rng + ?Sized>(bank: &SensorBank, ground_truth: Label, rng: &mut R) -> ProbLabel {
    sense_detailed(bank, ground_truth, rng).1
}

/// Probability of exactly `candidate` under independent propositions.
pub fn label_probability(pl: &ProbLabel, candidate: Label) -> f64 {
    pl.probs()
        .iter()
        .enumerate()
        .map(|(i, &p)| if candidate.contains(i as PropId) { p } else { 1.0 - p })
        .product()
}

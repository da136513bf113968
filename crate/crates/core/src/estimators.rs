//! Linear cross-entropy fidelity estimation, component-product fidelity
//! predictions and distribution-level diagnostics.

use serde::{Deserialize, Serialize};

use crate::circuit::Circuit;
use crate::error::{Error, Result};
use crate::noise::ComponentErrorRates;
use crate::samples::{format_bits, SampleSet};
use crate::simulator::check_normalized;

/// Largest qubit count for which the empirical distribution is compared
/// cell by cell against a model.
pub const MAX_DISTANCE_QUBITS: usize = 14;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct XebEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub n_samples: usize,
}

/// `mean(2^n · P(x_i)) − 1` and the standard error of that mean.
///
/// `lookup` returns the ideal probability of a basis index, or `None` if it
/// is unknown.
pub fn f_xeb<F>(samples: &SampleSet, mut lookup: F) -> Result<XebEstimate>
where
    F: FnMut(u64) -> Option<f64>,
{
    if samples.is_empty() {
        return Err(Error::InsufficientData("F_XEB needs at least one sample".into()));
    }
    let dim = (samples.n as f64).exp2();
    let mut values = Vec::with_capacity(samples.len());
    for &x in &samples.bits {
        let p = lookup(x).ok_or_else(|| Error::MissingProbability(format_bits(x, samples.n)))?;
        values.push(dim * p);
    }
    let (mean, sd) = mean_and_sd(&values);
    Ok(XebEstimate {
        estimate: mean - 1.0,
        std_error: sd / (values.len() as f64).sqrt(),
        n_samples: values.len(),
    })
}

/// [`f_xeb`] against a dense probability array indexed like the samples.
pub fn f_xeb_from_probs(samples: &SampleSet, probs: &[f64]) -> Result<XebEstimate> {
    if probs.len() != 1usize << samples.n {
        return Err(Error::InvalidArgument(format!(
            "{} probabilities for {}-bit samples",
            probs.len(),
            samples.n
        )));
    }
    f_xeb(samples, |x| probs.get(x as usize).copied())
}

/// Sample mean and sample standard deviation (n − 1 denominator; 0 for a
/// single value).
pub(crate) fn mean_and_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// `2^n Σ p² − 1`: the expected F_XEB of exact samples.
pub fn ideal_xeb(probs: &[f64]) -> f64 {
    probs.len() as f64 * probs.iter().map(|p| p * p).sum::<f64>() - 1.0
}

/// Product of `(1 − e)` over all 1-gates, 2-gates and measured qubits,
/// summed in log space. Readout uses the mean of the two flip rates.
pub fn product_fidelity(rates: &ComponentErrorRates, circuit: &Circuit) -> Result<f64> {
    rates.check_covers(circuit)?;
    rates.validate()?;
    let log: f64 = rates.one_qubit.iter().map(|e| (-e).ln_1p()).sum::<f64>()
        + rates.two_qubit.iter().map(|e| (-e).ln_1p()).sum::<f64>()
        + rates.readout.iter().map(|r| (-r.mean()).ln_1p()).sum::<f64>();
    Ok(log.exp())
}

/// Average component error rates.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AveragedRates {
    pub e1: f64,
    pub e2: f64,
    pub eq: f64,
}

impl Default for AveragedRates {
    fn default() -> Self {
        Self {
            e1: 0.0016,
            e2: 0.0062,
            eq: 0.038,
        }
    }
}

/// `(1 − e1)^g1 (1 − e2)^g2 (1 − eq)^n` with the default average rates.
pub fn product_fidelity_averaged(n: usize, g1: usize, g2: usize) -> f64 {
    product_fidelity_averaged_with(n, g1, g2, &AveragedRates::default())
}

pub fn product_fidelity_averaged_with(n: usize, g1: usize, g2: usize, rates: &AveragedRates) -> f64 {
    let log = g1 as f64 * (-rates.e1).ln_1p() + g2 as f64 * (-rates.e2).ln_1p() + n as f64 * (-rates.eq).ln_1p();
    log.exp()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
}

/// One-sample Kolmogorov–Smirnov test of `{2^n p_x}` against Exp(1).
pub fn porter_thomas_check(probs: &[f64]) -> Result<KsResult> {
    check_normalized(probs)?;
    if !probs.len().is_power_of_two() {
        return Err(Error::InvalidArgument(format!("{} is not a power of two", probs.len())));
    }
    let dim = probs.len() as f64;
    let mut scaled: Vec<f64> = probs.iter().map(|p| dim * p).collect();
    scaled.sort_by(f64::total_cmp);
    Ok(ks_exponential(&scaled))
}

/// KS statistic and asymptotic p-value of sorted data against Exp(1).
pub(crate) fn ks_exponential(sorted: &[f64]) -> KsResult {
    let n = sorted.len() as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let cdf = -(-x).exp_m1();
        d = d.max((i + 1) as f64 / n - cdf).max(cdf - i as f64 / n);
    }
    KsResult {
        statistic: d,
        p_value: kolmogorov_sf((n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d),
    }
}

/// Survival function of the Kolmogorov distribution.
fn kolmogorov_sf(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        sum += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

/// Total variation distance between the empirical distribution of
/// `samples` and `phi · P + (1 − phi) · uniform`.
pub fn empirical_model_distance(samples: &SampleSet, probs: &[f64], phi: f64) -> Result<f64> {
    if samples.n > MAX_DISTANCE_QUBITS {
        return Err(Error::InvalidArgument(format!(
            "distance needs n <= {MAX_DISTANCE_QUBITS}, got {}",
            samples.n
        )));
    }
    if !(0.0..=1.0).contains(&phi) {
        return Err(Error::InvalidArgument(format!("fidelity {phi} outside [0, 1]")));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    check_normalized(probs)?;
    if probs.len() != 1usize << samples.n {
        return Err(Error::InvalidArgument(format!(
            "{} probabilities for {}-bit samples",
            probs.len(),
            samples.n
        )));
    }
    let counts = samples.histogram();
    let total = samples.len() as f64;
    let floor = (1.0 - phi) / probs.len() as f64;
    Ok(0.5
        * counts
            .iter()
            .zip(probs)
            .map(|(c, p)| (*c as f64 / total - (phi * p + floor)).abs())
            .sum::<f64>())
}

/// Per-circuit summary written as one JSON line.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FidelityReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub circuit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f_xeb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(default)]
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ideal_xeb: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_phi: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_phi_averaged: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub porter_thomas_ks: Option<KsResult>,
}

impl FidelityReport {
    pub fn with_xeb(mut self, x: &XebEstimate) -> Self {
        self.f_xeb = Some(x.estimate);
        self.std_error = Some(x.std_error);
        self.n_samples = x.n_samples;
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::GridQubit;
    use crate::noise::ReadoutRates;
    use crate::rng::{stream, Purpose};
    use rand::Rng;

    fn set(n: u32, bits: Vec<u64>) -> SampleSet {
        SampleSet::new((0..n).map(|c| GridQubit::new(0, c)).collect(), bits, "t")
    }

    #[test]
    fn uniform_probability_gives_zero() {
        let s = set(3, vec![5]);
        let x = f_xeb(&s, |_| Some(0.125)).unwrap();
        assert_eq!(x.estimate, 0.0);
        assert_eq!(x.std_error, 0.0);
        let s = set(4, vec![1, 2, 3, 9, 9, 15]);
        assert_eq!(f_xeb(&s, |_| Some(1.0 / 16.0)).unwrap().estimate, 0.0);
    }

    #[test]
    fn missing_probability_names_bitstring() {
        let s = set(4, vec![0b0110]);
        match f_xeb(&s, |_| None) {
            Err(Error::MissingProbability(b)) => assert_eq!(b, "0110"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn standard_error_is_sample_sd_over_root_n() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let s = set(2, vec![0, 1, 2, 3]);
        let x = f_xeb_from_probs(&s, &probs).unwrap();
        // values 0.4, 0.8, 1.2, 1.6
        let sd = ((0.36 + 0.04 + 0.04 + 0.36) / 3.0f64).sqrt();
        assert!((x.estimate - 0.0).abs() < 1e-15);
        assert!((x.std_error - sd / 2.0).abs() < 1e-15);
    }

    #[test]
    fn product_fidelity_trivial_cases() {
        let c = crate::circuit::generate_random_circuit(1, 4, 3, crate::layout::PatternKind::Efgh).unwrap();
        assert_eq!(product_fidelity(&ComponentErrorRates::zero(&c), &c).unwrap(), 1.0);
        let single = crate::circuit::generate_random_circuit(1, 1, 0, crate::layout::PatternKind::Efgh).unwrap();
        let mut r = ComponentErrorRates::zero(&single);
        r.one_qubit.clear();
        let bare = Circuit {
            moments: vec![],
            ..single
        };
        r.readout = vec![ReadoutRates::symmetric(0.038)];
        assert!((product_fidelity(&r, &bare).unwrap() - 0.962).abs() < 1e-15);
        r.readout.clear();
        assert!(matches!(product_fidelity(&r, &bare), Err(Error::Coverage(_))));
    }

    #[test]
    fn averaged_trivial_and_headline() {
        assert_eq!(product_fidelity_averaged(0, 0, 0), 1.0);
        let v = product_fidelity_averaged(53, 1113, 430);
        assert!(v > 1e-3 && (v - 1.49e-3).abs() < 1e-5, "{v}");
    }

    #[test]
    fn ks_rejects_uniform() {
        let r = porter_thomas_check(&[1.0 / 1024.0; 1024]).unwrap();
        assert!((r.statistic - (1.0 - (-1.0f64).exp())).abs() < 1e-12);
        assert!(r.p_value < 1e-6);
    }

    #[test]
    fn ks_accepts_exponential_variates() {
        let mut passes = 0;
        for seed in 0..100 {
            let mut rng = stream(seed, Purpose::Synthetic, 0, 0);
            let raw: Vec<f64> = (0..4096).map(|_| -(1.0 - rng.random::<f64>()).ln()).collect();
            let total: f64 = raw.iter().sum();
            let probs: Vec<f64> = raw.iter().map(|v| v / total).collect();
            if porter_thomas_check(&probs).unwrap().p_value > 1e-3 {
                passes += 1;
            }
        }
        assert!(passes >= 99, "{passes}");
    }

    #[test]
    fn kolmogorov_tail_reference_values() {
        // tabulated critical values of the Kolmogorov distribution
        assert!((kolmogorov_sf(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_sf(1.6276) - 0.01).abs() < 1e-4);
        assert!((kolmogorov_sf(1.9495) - 0.001).abs() < 1e-5);
    }

    #[test]
    fn distance_of_single_sample() {
        let probs = [0.1, 0.2, 0.3, 0.4];
        let s = set(2, vec![3]);
        let tv = empirical_model_distance(&s, &probs, 1.0).unwrap();
        assert!((tv - 0.6).abs() < 1e-15);
        let big = SampleSet::new((0..15).map(|c| GridQubit::new(c / 9, c % 9)).collect(), vec![0], "t");
        assert!(empirical_model_distance(&big, &[], 1.0).is_err());
    }
}

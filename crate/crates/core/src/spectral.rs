//! Fourier–Walsh analysis of output distributions.
//!
//! Coefficients use the normalisation `ĥf(S) = 2^{-n} Σ_x (−1)^{⟨S,x⟩} f(x)`,
//! and level `k` collects the characters `S` with `|S| = k`.

use std::fmt::Write as _;
use std::ops::RangeInclusive;

use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::rng::{stream, Purpose};
use crate::samples::SampleSet;

pub const MAX_SPECTRAL_QUBITS: usize = 20;

/// Levels whose reference weight is below this fraction of the largest
/// level weight get no estimate.
pub const WEIGHT_FLOOR: f64 = 1e-3;

/// In-place unnormalised Walsh–Hadamard transform.
pub fn fwht_in_place(values: &mut [f64]) -> Result<()> {
    let len = values.len();
    if !len.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("length {len} is not a power of two")));
    }
    let mut h = 1;
    while h < len {
        for block in values.chunks_exact_mut(2 * h) {
            let (lo, hi) = block.split_at_mut(h);
            for (a, b) in lo.iter_mut().zip(hi.iter_mut()) {
                let (x, y) = (*a, *b);
                *a = x + y;
                *b = x - y;
            }
        }
        h *= 2;
    }
    Ok(())
}

pub fn fwht(values: &[f64]) -> Result<Vec<f64>> {
    let mut out = values.to_vec();
    fwht_in_place(&mut out)?;
    Ok(out)
}

/// Normalised Fourier–Walsh coefficients of a function on `n` bits.
pub fn coefficients(values: &[f64]) -> Result<Vec<f64>> {
    let mut out = fwht(values)?;
    let scale = 1.0 / values.len() as f64;
    out.iter_mut().for_each(|v| *v *= scale);
    Ok(out)
}

fn log2_len(len: usize) -> usize {
    len.trailing_zeros() as usize
}

/// `Σ_{|S|=k} a(S) b(S)` for every level `k`.
fn level_sums(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = log2_len(a.len());
    let mut out = vec![0.0; n + 1];
    for (s, (x, y)) in a.iter().zip(b).enumerate() {
        out[s.count_ones() as usize] += x * y;
    }
    out
}

/// Per-level fidelity estimates of a sample set against the ideal
/// distribution.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelSpectrum {
    pub n: usize,
    /// `None` at level 0 and at levels below the weight floor.
    pub phi_by_level: Vec<Option<f64>>,
    /// `Σ_{|S|=k} ĥp(S)²`.
    pub weights_by_level: Vec<f64>,
    /// `Σ_{|S|=k} ĥq(S) ĥp(S)`.
    pub cross_by_level: Vec<f64>,
    /// Bootstrap standard deviation per level, once computed.
    pub band_sd: Option<Vec<Option<f64>>>,
}

impl LevelSpectrum {
    fn from_sums(weights: Vec<f64>, cross: Vec<f64>) -> Self {
        let n = weights.len() - 1;
        let max = weights[1..].iter().copied().fold(0.0, f64::max);
        let phi = (0..=n)
            .map(|k| (k > 0 && max > 0.0 && weights[k] >= WEIGHT_FLOOR * max).then(|| cross[k] / weights[k]))
            .collect();
        Self {
            n,
            phi_by_level: phi,
            weights_by_level: weights,
            cross_by_level: cross,
            band_sd: None,
        }
    }

    /// Levels with an estimate.
    pub fn usable_levels(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.phi_by_level
            .iter()
            .enumerate()
            .filter_map(|(k, p)| p.map(|v| (k, v)))
    }

    /// `(lo, hi)` of the `width`·σ bootstrap band at level `k`.
    pub fn band(&self, k: usize, width: f64) -> Option<(f64, f64)> {
        let phi = self.phi_by_level[k]?;
        let sd = (*self.band_sd.as_ref()?.get(k)?)?;
        Some((phi - width * sd, phi + width * sd))
    }

    /// Weight-averaged level estimate, `Σ_k w_k phi_k / Σ_k w_k` over
    /// `k ≥ 1`, counting every level regardless of the floor.
    ///
    /// This equals `F_XEB / (2^n Σp² − 1)` for the same samples.
    pub fn weighted_fidelity(&self) -> f64 {
        let w: f64 = self.weights_by_level[1..].iter().sum();
        self.cross_by_level[1..].iter().sum::<f64>() / w
    }

    /// CSV with header `k,phi_k,weight_k,band_lo,band_hi`; absent values
    /// are empty fields. Bands are ±3σ.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,phi_k,weight_k,band_lo,band_hi\n");
        for k in 0..=self.n {
            let phi = self.phi_by_level[k].map(|v| format!("{v:?}")).unwrap_or_default();
            let (lo, hi) = self
                .band(k, 3.0)
                .map(|(l, h)| (format!("{l:?}"), format!("{h:?}")))
                .unwrap_or_default();
            writeln!(out, "{k},{phi},{:?},{lo},{hi}", self.weights_by_level[k]).unwrap();
        }
        out
    }
}

fn check_inputs(samples: &SampleSet, probs: &[f64]) -> Result<()> {
    if samples.n > MAX_SPECTRAL_QUBITS {
        return Err(Error::Capacity(format!(
            "spectral analysis supports up to {MAX_SPECTRAL_QUBITS} qubits, got {}",
            samples.n
        )));
    }
    if samples.is_empty() {
        return Err(Error::InsufficientData("no samples".into()));
    }
    if probs.len() != 1usize << samples.n {
        return Err(Error::InvalidArgument(format!(
            "{} probabilities for {}-bit samples",
            probs.len(),
            samples.n
        )));
    }
    Ok(())
}

fn empirical(counts: &[u64], total: usize) -> Vec<f64> {
    counts.iter().map(|c| *c as f64 / total as f64).collect()
}

/// Per-level normalised cross-correlation between the empirical
/// distribution `q` of `samples` and `probs`:
/// `phi_k = Σ_{|S|=k} ĥq(S) ĥp(S) / Σ_{|S|=k} ĥp(S)²`.
pub fn level_fidelity(samples: &SampleSet, probs: &[f64]) -> Result<LevelSpectrum> {
    check_inputs(samples, probs)?;
    let p_hat = coefficients(probs)?;
    let q_hat = coefficients(&empirical(&samples.histogram(), samples.len()))?;
    Ok(LevelSpectrum::from_sums(
        level_sums(&p_hat, &p_hat),
        level_sums(&q_hat, &p_hat),
    ))
}

/// [`level_fidelity`] plus bootstrap standard deviations from `replicates`
/// multinomial resamplings of the observed counts.
pub fn level_fidelity_with_bands(
    samples: &SampleSet,
    probs: &[f64],
    replicates: usize,
    seed: u64,
) -> Result<LevelSpectrum> {
    let mut spectrum = level_fidelity(samples, probs)?;
    if replicates < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least 2 replicates".into()));
    }
    let p_hat = coefficients(probs)?;
    let counts = samples.histogram();
    let total = samples.len();
    let freq = empirical(&counts, total);
    let n = spectrum.n;
    let mut sum = vec![0.0; n + 1];
    let mut sum_sq = vec![0.0; n + 1];
    for r in 0..replicates {
        let mut rng = stream(seed, Purpose::Bootstrap, r as u64, 0);
        let resampled = multinomial(&freq, total as u64, &mut rng);
        let q_hat = coefficients(&empirical(&resampled, total))?;
        let cross = level_sums(&q_hat, &p_hat);
        for k in 1..=n {
            if spectrum.phi_by_level[k].is_some() {
                let v = cross[k] / spectrum.weights_by_level[k];
                sum[k] += v;
                sum_sq[k] += v * v;
            }
        }
    }
    let m = replicates as f64;
    spectrum.band_sd = Some(
        (0..=n)
            .map(|k| {
                spectrum.phi_by_level[k].map(|_| {
                    let mean = sum[k] / m;
                    ((sum_sq[k] - m * mean * mean) / (m - 1.0)).max(0.0).sqrt()
                })
            })
            .collect(),
    );
    Ok(spectrum)
}

/// Multinomial draw by sequential conditional binomials.
fn multinomial<R: rand::Rng>(probs: &[f64], trials: u64, rng: &mut R) -> Vec<u64> {
    let mut remaining = trials;
    let mut mass = 1.0;
    probs
        .iter()
        .map(|&p| {
            if remaining == 0 || p <= 0.0 {
                return 0;
            }
            let ratio = if mass <= p { 1.0 } else { (p / mass).clamp(0.0, 1.0) };
            let k = Binomial::new(remaining, ratio).expect("ratio in [0, 1]").sample(rng);
            remaining -= k;
            mass -= p;
            k
        })
        .collect()
}

/// Predicted per-level fidelity under independent symmetric readout flips:
/// `phi` times the average over `|S| = k` of `Π_{i∈S} (1 − 2 e_i)`.
///
/// `rates[i]` belongs to the i-th qubit of the order. With `reference`
/// (the ideal probabilities) the average is weighted by `ĥp(S)²`; levels
/// where that weight vanishes fall back to the plain average.
pub fn readout_decay_curve(phi: f64, rates: &[f64], reference: Option<&[f64]>) -> Result<Vec<f64>> {
    let n = rates.len();
    if let Some(e) = rates.iter().find(|e| !(0.0..=0.5).contains(*e)) {
        return Err(Error::InvalidArgument(format!("readout rate {e} outside [0, 0.5]")));
    }
    let damp: Vec<f64> = rates.iter().map(|e| 1.0 - 2.0 * e).collect();

    // elementary symmetric polynomials of the damping factors
    let mut esp = vec![0.0; n + 1];
    esp[0] = 1.0;
    for (i, d) in damp.iter().enumerate() {
        for k in (1..=i + 1).rev() {
            esp[k] += esp[k - 1] * d;
        }
    }
    let mut binom = vec![1.0; n + 1];
    for k in 1..=n {
        binom[k] = binom[k - 1] * (n + 1 - k) as f64 / k as f64;
    }
    let mut curve: Vec<f64> = (0..=n).map(|k| phi * esp[k] / binom[k]).collect();

    if let Some(probs) = reference {
        if probs.len() != 1usize << n {
            return Err(Error::InvalidArgument(format!(
                "{} reference probabilities for {n} rates",
                probs.len()
            )));
        }
        let p_hat = coefficients(probs)?;
        let mut num = vec![0.0; n + 1];
        let mut den = vec![0.0; n + 1];
        for (s, c) in p_hat.iter().enumerate() {
            let w = c * c;
            let prod: f64 = (0..n).filter(|i| s >> (n - 1 - i) & 1 == 1).map(|i| damp[i]).product();
            let k = s.count_ones() as usize;
            num[k] += w * prod;
            den[k] += w;
        }
        for k in 0..=n {
            if den[k] > 0.0 {
                curve[k] = phi * num[k] / den[k];
            }
        }
    }
    Ok(curve)
}

/// Result of the log-linear fit `log phi_k = log phi + k log(1 − 2e)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SecondaryFit {
    pub phi_hat: f64,
    pub e_hat: f64,
    pub levels_used: usize,
}

impl SecondaryFit {
    /// The F_XEB-comparable fidelity implied by the fit: the fitted decay
    /// averaged over levels `k ≥ 1` with the spectrum's reference weights.
    pub fn implied_xeb_fidelity(&self, spectrum: &LevelSpectrum) -> f64 {
        let w = &spectrum.weights_by_level;
        let total: f64 = w[1..].iter().sum();
        let decay = 1.0 - 2.0 * self.e_hat;
        self.phi_hat * (1..w.len()).map(|k| w[k] * decay.powi(k as i32)).sum::<f64>() / total
    }
}

/// Least-squares fit over the usable levels in `k_range` with a positive
/// estimate.
pub fn fit_secondary_fidelity(spectrum: &LevelSpectrum, k_range: RangeInclusive<usize>) -> Result<SecondaryFit> {
    let points: Vec<(f64, f64)> = spectrum
        .usable_levels()
        .filter(|(k, v)| k_range.contains(k) && *v > 0.0)
        .map(|(k, v)| (k as f64, v.ln()))
        .collect();
    if points.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} usable levels in {k_range:?}, need 3",
            points.len()
        )));
    }
    let m = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / m;
    let my = points.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    Ok(SecondaryFit {
        phi_hat: intercept.exp(),
        e_hat: (1.0 - slope.exp()) / 2.0,
        levels_used: points.len(),
    })
}

/// A spectrum built from exact per-level values, with unit weights.
pub fn synthetic_spectrum(phi_by_level: &[f64]) -> LevelSpectrum {
    let n = phi_by_level.len() - 1;
    let weights = vec![1.0; n + 1];
    let cross: Vec<f64> = phi_by_level.to_vec();
    LevelSpectrum::from_sums(weights, cross)
}

//! Discrete power laws `r^-k / H_R(k)` over ranks `1..=R`, their continuous
//! normalizers, products over `n` positions and a subset-sampled exponent
//! estimator.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QdError, Result};
use crate::regression::ols;

/// Generalized harmonic number `H_R(k) = sum_{i=1}^R i^-k`.
///
/// Summed in ascending index order with Kahan compensation, so `k` near zero
/// at `R ~ 100` keeps full precision and `H_R(0) == R` exactly.
pub fn harmonic_number(r: u64, k: f64) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for i in 1..=r {
        let term = (i as f64).powf(-k);
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Continuous normalizer `h_R(k) = ∫_1^R r^-k dr`.
pub fn continuous_h(r: u64, k: f64) -> f64 {
    continuous_h_ln(r as f64, k)
}

/// `h` for a real upper limit, given directly; `ln R` drives both branches.
pub(crate) fn continuous_h_ln(r: f64, k: f64) -> f64 {
    let ln_r = r.ln();
    let t = 1.0 - k;
    if t.abs() < 1e-9 {
        // expm1(t L)/t = L (1 + tL/2 + (tL)^2/6 + ...)
        let x = t * ln_r;
        ln_r * (1.0 + x / 2.0 + x * x / 6.0)
    } else {
        (t * ln_r).exp_m1() / t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLawSpec {
    r: u64,
    k: f64,
}

impl PowerLawSpec {
    pub fn new(r: u64, k: f64) -> Result<Self> {
        if r < 1 {
            return Err(QdError::domain("alphabet size R must be at least 1"));
        }
        if !(k >= 0.0) || !k.is_finite() {
            return Err(QdError::domain(format!(
                "exponent k must be finite and >= 0, got {k}"
            )));
        }
        Ok(PowerLawSpec { r, k })
    }

    pub fn r(&self) -> u64 {
        self.r
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn harmonic(&self) -> f64 {
        harmonic_number(self.r, self.k)
    }

    pub fn pmf(&self, rank: u64) -> Result<f64> {
        self.check_rank(rank)?;
        Ok((rank as f64).powf(-self.k) / self.harmonic())
    }

    pub fn ln_pmf(&self, rank: u64) -> Result<f64> {
        self.check_rank(rank)?;
        Ok(-self.k * (rank as f64).ln() - self.harmonic().ln())
    }

    /// The full probability vector, index `i` holding rank `i + 1`.
    pub fn pmf_vec(&self) -> Vec<f64> {
        let h = self.harmonic();
        (1..=self.r).map(|i| (i as f64).powf(-self.k) / h).collect()
    }

    pub fn sampler(&self) -> Sampler {
        Sampler::new(&self.pmf_vec())
    }

    /// `count` i.i.d. ranks, reproducible for a fixed seed.
    pub fn sample(&self, seed: u64, count: usize) -> Vec<u64> {
        let sampler = self.sampler();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..count)
            .map(|_| sampler.draw(&mut rng) as u64 + 1)
            .collect()
    }

    fn check_rank(&self, rank: u64) -> Result<()> {
        if rank < 1 || rank > self.r {
            return Err(QdError::domain(format!(
                "rank {rank} outside 1..={}",
                self.r
            )));
        }
        Ok(())
    }
}

/// Inverse-CDF table over a finite distribution; `O(log R)` per draw.
#[derive(Debug, Clone)]
pub struct Sampler {
    cdf: Vec<f64>,
}

impl Sampler {
    pub fn new(probs: &[f64]) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        // Absorb rounding so that every u in [0,1) lands in the table.
        if let Some(last) = cdf.last_mut() {
            *last = f64::INFINITY;
        }
        Sampler { cdf }
    }

    /// Zero-based index of the drawn outcome.
    pub fn draw<G: Rng + ?Sized>(&self, rng: &mut G) -> usize {
        let u: f64 = rng.gen();
        self.index_of(u)
    }

    pub(crate) fn index_of(&self, u: f64) -> usize {
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }
}

/// Independent product of `n` copies of one power law (joint pmf of rank vectors).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductPowerLaw {
    pub base: PowerLawSpec,
    pub n: usize,
}

impl ProductPowerLaw {
    pub fn new(base: PowerLawSpec, n: usize) -> Result<Self> {
        if n < 1 {
            return Err(QdError::domain("sequence length n must be at least 1"));
        }
        Ok(ProductPowerLaw { base, n })
    }

    pub fn ln_joint_pmf(&self, ranks: &[u64]) -> Result<f64> {
        if ranks.len() != self.n {
            return Err(QdError::domain(format!(
                "rank vector has length {}, expected {}",
                ranks.len(),
                self.n
            )));
        }
        let ln_h = self.base.harmonic().ln();
        let mut acc = -(self.n as f64) * ln_h;
        for &r in ranks {
            self.base.check_rank(r)?;
            acc -= self.base.k * (r as f64).ln();
        }
        Ok(acc)
    }

    pub fn joint_pmf(&self, ranks: &[u64]) -> Result<f64> {
        self.ln_joint_pmf(ranks).map(f64::exp)
    }
}

/// Estimate the exponent seen after restricting the power law to a random
/// subset of its ranks.
///
/// Each trial draws a uniform `subset_size`-subset of ranks, renormalizes their
/// masses and keeps them in rank order; the renormalized vectors are averaged
/// over trials and a single log-log least-squares line is fitted over subset
/// ranks `1..=subset_size`. The returned value is minus the fitted slope.
pub fn subset_exponent_estimate(
    spec: &PowerLawSpec,
    subset_size: usize,
    seed: u64,
    trials: usize,
) -> Result<f64> {
    let r = spec.r as usize;
    if subset_size > r {
        return Err(QdError::domain(format!(
            "subset size {subset_size} exceeds R = {r}"
        )));
    }
    if subset_size < 2 {
        return Err(QdError::domain(
            "a slope needs at least two ranks in the subset",
        ));
    }
    if trials < 1 {
        return Err(QdError::domain("trials must be at least 1"));
    }
    let pmf = spec.pmf_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = vec![0.0; subset_size];
    let mut picked = Vec::with_capacity(subset_size);
    for _ in 0..trials {
        picked.clear();
        picked.extend(index::sample(&mut rng, r, subset_size));
        picked.sort_unstable();
        let mass: f64 = picked.iter().map(|&i| pmf[i]).sum();
        for (slot, &i) in acc.iter_mut().zip(&picked) {
            *slot += pmf[i] / mass;
        }
    }
    Ok(fit_profile_exponent(&acc))
}

/// Minus the log-log OLS slope of a profile indexed by rank `1..`.
pub(crate) fn fit_profile_exponent(profile: &[f64]) -> f64 {
    let xs: Vec<f64> = (1..=profile.len()).map(|i| (i as f64).ln()).collect();
    let ys: Vec<f64> = profile.iter().map(|p| p.ln()).collect();
    -ols(&xs, &ys).slope
}

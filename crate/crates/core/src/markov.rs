//! Metropolis-Hastings resampling step, its acceptance defect, and the
//! Euler-Maruyama Langevin step.

use rand::Rng;
use rand_distr::{Beta, Distribution, Exp, Gamma, Normal, StandardNormal, Uniform};
use statrs::distribution::{Beta as SBeta, Continuous, ContinuousCDF, Gamma as SGamma, Normal as SNormal};

use crate::error::{Error, Result};

/// One-dimensional density family; [`DensityModel`] takes products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Density1 {
    Uniform { low: f64, high: f64 },
    Gaussian { mean: f64, sd: f64 },
    Exponential { rate: f64 },
    /// Requires `shape ≥ 1`.
    Gamma { shape: f64, scale: f64 },
    /// Requires `a, b ≥ 1`.
    Beta { a: f64, b: f64 },
}

impl Density1 {
    fn validate(self) -> Result<Self> {
        let ok = match self {
            Density1::Uniform { low, high } => low < high && low.is_finite() && high.is_finite(),
            Density1::Gaussian { sd, mean } => sd > 0.0 && sd.is_finite() && mean.is_finite(),
            Density1::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Density1::Gamma { shape, scale } => shape >= 1.0 && scale > 0.0 && shape.is_finite() && scale.is_finite(),
            Density1::Beta { a, b } => a >= 1.0 && b >= 1.0 && a.is_finite() && b.is_finite(),
        };
        if ok {
            Ok(self)
        } else {
            Err(Error::InvalidArgument(format!("density parameters out of range: {self:?}")))
        }
    }

    pub fn log_density(&self, x: f64) -> f64 {
        match *self {
            Density1::Uniform { low, high } => {
                if (low..=high).contains(&x) {
                    -(high - low).ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Density1::Gaussian { mean, sd } => SNormal::new(mean, sd).unwrap().ln_pdf(x),
            Density1::Exponential { rate } => {
                if x >= 0.0 {
                    rate.ln() - rate * x
                } else {
                    f64::NEG_INFINITY
                }
            }
            Density1::Gamma { shape, scale } => {
                if x > 0.0 {
                    SGamma::new(shape, 1.0 / scale).unwrap().ln_pdf(x)
                } else if x == 0.0 && shape == 1.0 {
                    -scale.ln()
                } else {
                    f64::NEG_INFINITY
                }
            }
            Density1::Beta { a, b } => {
                if (0.0..=1.0).contains(&x) {
                    let v = SBeta::new(a, b).unwrap().ln_pdf(x);
                    if v.is_nan() { f64::NEG_INFINITY } else { v }
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            Density1::Uniform { low, high } => Uniform::new(low, high).unwrap().sample(rng),
            Density1::Gaussian { mean, sd } => Normal::new(mean, sd).unwrap().sample(rng),
            Density1::Exponential { rate } => Exp::new(rate).unwrap().sample(rng),
            Density1::Gamma { shape, scale } => Gamma::new(shape, scale).unwrap().sample(rng),
            Density1::Beta { a, b } => Beta::new(a, b).unwrap().sample(rng),
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match *self {
            Density1::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Density1::Gaussian { mean, sd } => SNormal::new(mean, sd).unwrap().cdf(x),
            Density1::Exponential { rate } => {
                if x <= 0.0 {
                    0.0
                } else {
                    -(-rate * x).exp_m1()
                }
            }
            Density1::Gamma { shape, scale } => SGamma::new(shape, 1.0 / scale).unwrap().cdf(x),
            Density1::Beta { a, b } => SBeta::new(a, b).unwrap().cdf(x.clamp(0.0, 1.0)),
        }
    }

    /// `ρ'(x)` for `ρ = −log f`, where it is globally Lipschitz.
    fn potential_gradient(&self, x: f64) -> Option<f64> {
        match *self {
            Density1::Gaussian { mean, sd } => Some((x - mean) / (sd * sd)),
            _ => None,
        }
    }
}

/// Product density `f(x) = Π_i f_1(x_i)` on `R^d`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityModel {
    pub component: Density1,
    pub dim: usize,
}

impl DensityModel {
    pub fn new(component: Density1, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidArgument("dimension must be positive".into()));
        }
        Ok(Self { component: component.validate()?, dim })
    }

    pub fn standard_gaussian(dim: usize) -> Self {
        Self { component: Density1::Gaussian { mean: 0.0, sd: 1.0 }, dim }
    }

    pub fn unit_box(dim: usize) -> Self {
        Self { component: Density1::Uniform { low: 0.0, high: 1.0 }, dim }
    }

    /// Registry lookup by name with standard parameters.
    pub fn by_name(name: &str, dim: usize) -> Result<Self> {
        let c = match name {
            "uniform" => Density1::Uniform { low: 0.0, high: 1.0 },
            "gaussian" => Density1::Gaussian { mean: 0.0, sd: 1.0 },
            "exponential" => Density1::Exponential { rate: 1.0 },
            "gamma" => Density1::Gamma { shape: 2.0, scale: 1.0 },
            "beta" => Density1::Beta { a: 2.0, b: 2.0 },
            other => return Err(Error::UnsupportedLaw(other.to_string())),
        };
        Self::new(c, dim)
    }

    pub fn name(&self) -> &'static str {
        match self.component {
            Density1::Uniform { .. } => "uniform",
            Density1::Gaussian { .. } => "gaussian",
            Density1::Exponential { .. } => "exponential",
            Density1::Gamma { .. } => "gamma",
            Density1::Beta { .. } => "beta",
        }
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        x.iter().map(|&xi| self.component.log_density(xi)).sum()
    }

    pub fn density(&self, x: &[f64]) -> f64 {
        self.log_density(x).exp()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.dim).map(|_| self.component.sample(rng)).collect()
    }

    /// Marginal CDF of one coordinate.
    pub fn marginal_cdf(&self, x: f64) -> f64 {
        self.component.cdf(x)
    }

    /// `∇ρ(x)`; available for Gaussian components.
    pub fn potential_gradient(&self, x: &[f64]) -> Option<Vec<f64>> {
        x.iter().map(|&xi| self.component.potential_gradient(xi)).collect()
    }
}

fn gaussian_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// `X + tW` if `U ≤ f(X + tW)/f(X)`, else `X`, with `W` standard Gaussian.
pub fn mh_step<R: Rng + ?Sized>(x: &[f64], t: f64, f: &DensityModel, rng: &mut R) -> Result<Vec<f64>> {
    if !(t > 0.0) {
        return Err(Error::InvalidArgument(format!("step size must be positive, got {t}")));
    }
    let lx = f.log_density(x);
    if lx == f64::NEG_INFINITY {
        return Err(Error::ZeroDensityAtStart);
    }
    let w = gaussian_vec(f.dim, rng);
    let y: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + t * b).collect();
    let u: f64 = rng.random();
    let log_ratio = f.log_density(&y) - lx;
    Ok(if log_ratio >= 0.0 || u.ln() <= log_ratio { y } else { x.to_vec() })
}

/// Monte Carlo estimate of `E[||W||^p (1 − f(X + sW)/f(X))₊]`, `X ~ f`.
pub fn acceptance_defect<R: Rng + ?Sized>(f: &DensityModel, s: f64, p: f64, samples: usize, rng: &mut R) -> Result<f64> {
    if !(s >= 0.0) || samples == 0 {
        return Err(Error::InvalidArgument("need s >= 0 and samples >= 1".into()));
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for _ in 0..samples {
        let x = f.sample(rng);
        let w = gaussian_vec(f.dim, rng);
        let y: Vec<f64> = x.iter().zip(&w).map(|(a, b)| a + s * b).collect();
        let ratio = (f.log_density(&y) - f.log_density(&x)).exp();
        let defect = (1.0 - ratio).max(0.0);
        if defect > 0.0 {
            let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
            total += if p == 0.0 { defect } else { norm.powf(p) * defect };
        }
    }
    Ok(total / samples as f64)
}

/// `steps` Euler-Maruyama updates `y ← y − ∇ρ(y) dt + √(2dt) Z`.
pub fn langevin_step<R: Rng + ?Sized>(
    y: &[f64],
    dt: f64,
    steps: usize,
    model: &DensityModel,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(dt > 0.0) {
        return Err(Error::InvalidArgument(format!("dt must be positive, got {dt}")));
    }
    let noise = (2.0 * dt).sqrt();
    let mut y = y.to_vec();
    for _ in 0..steps {
        let g = model
            .potential_gradient(&y)
            .ok_or_else(|| Error::InvalidArgument(format!("no potential gradient for {}", model.name())))?;
        for (yi, gi) in y.iter_mut().zip(g) {
            let z: f64 = StandardNormal.sample(rng);
            *yi += -gi * dt + noise * z;
        }
    }
    Ok(y)
}

/// Fourth-to-squared-second moment ratio of `∇ρ(Y)` per coordinate, a
/// sub-Gamma diagnostic with no pass threshold.
pub fn gradient_moment_ratio<R: Rng + ?Sized>(model: &DensityModel, samples: usize, rng: &mut R) -> Result<f64> {
    let (mut m2, mut m4) = (0.0, 0.0);
    for _ in 0..samples {
        let y = model.sample(rng);
        let g = model
            .potential_gradient(&y)
            .ok_or_else(|| Error::InvalidArgument(format!("no potential gradient for {}", model.name())))?;
        let v = g[0] * g[0];
        m2 += v;
        m4 += v * v;
    }
    let n = samples as f64;
    Ok((m4 / n) / (m2 / n).powi(2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_from;
    use crate::stats::ks_one_sample;

    #[test]
    fn uniform_rejects_outside_moves() {
        let f = DensityModel::unit_box(1);
        let mut rng = rng_from(1);
        for _ in 0..2000 {
            let y = mh_step(&[0.5], 2.0, &f, &mut rng).unwrap();
            assert!((0.0..=1.0).contains(&y[0]));
        }
        assert!(matches!(mh_step(&[1.5], 0.1, &f, &mut rng), Err(Error::ZeroDensityAtStart)));
    }

    #[test]
    fn flat_density_always_accepts_inside() {
        // Tiny steps from the center never leave the box, so the ratio is 1.
        let f = DensityModel::unit_box(2);
        let mut rng = rng_from(2);
        for _ in 0..100 {
            let y = mh_step(&[0.5, 0.5], 1e-6, &f, &mut rng).unwrap();
            assert_ne!(y, vec![0.5, 0.5]);
        }
    }

    #[test]
    fn mh_preserves_every_registered_density() {
        let mut rng = rng_from(3);
        for name in ["uniform", "gaussian", "exponential", "gamma", "beta"] {
            let f = DensityModel::by_name(name, 1).unwrap();
            let out: Vec<f64> = (0..10_000)
                .map(|_| {
                    let x = f.sample(&mut rng);
                    mh_step(&x, 0.5, &f, &mut rng).unwrap()[0]
                })
                .collect();
            let r = ks_one_sample(&out, |x| f.marginal_cdf(x)).unwrap();
            assert!(r.p_value > 0.001, "{name}: {r:?}");
        }
    }

    #[test]
    fn defect_is_zero_at_zero_step() {
        let f = DensityModel::standard_gaussian(1);
        assert_eq!(acceptance_defect(&f, 0.0, 0.0, 10, &mut rng_from(4)).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_defect_slope_is_one_over_pi() {
        let f = DensityModel::standard_gaussian(1);
        let mut rng = rng_from(5);
        for s in [0.01, 0.02, 0.04] {
            let r = acceptance_defect(&f, s, 0.0, 200_000, &mut rng).unwrap() / s;
            assert!((r - 1.0 / std::f64::consts::PI).abs() < 0.03, "s={s}: {r}");
        }
    }

    #[test]
    fn uniform_defect_is_linear() {
        let f = DensityModel::unit_box(1);
        let mut rng = rng_from(6);
        let s = [0.01, 0.02, 0.04, 0.08];
        let y: Vec<f64> = s.iter().map(|&s| acceptance_defect(&f, s, 0.0, 200_000, &mut rng).unwrap()).collect();
        // Least-squares line through the points and its R².
        let n = s.len() as f64;
        let (mx, my) = (s.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
        let sxy: f64 = s.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let sxx: f64 = s.iter().map(|a| (a - mx).powi(2)).sum();
        let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
        let r2 = sxy * sxy / (sxx * syy);
        assert!(r2 > 0.9, "{r2}");
        // 2 E[W₊] = √(2/π).
        assert!((sxy / sxx - (2.0 / std::f64::consts::PI).sqrt()).abs() < 0.1);
    }

    #[test]
    fn langevin_drift_free_at_mode() {
        let f = DensityModel::standard_gaussian(3);
        assert_eq!(f.potential_gradient(&[0.0; 3]).unwrap(), vec![0.0; 3]);
        assert!(langevin_step(&[0.5], 0.1, 1, &DensityModel::unit_box(1), &mut rng_from(7)).is_err());
    }

    #[test]
    fn langevin_small_dt_is_near_stationary() {
        let f = DensityModel::standard_gaussian(1);
        let mut rng = rng_from(8);
        let out: Vec<f64> = (0..10_000)
            .map(|_| {
                let y = f.sample(&mut rng);
                langevin_step(&y, 1e-3, 100, &f, &mut rng).unwrap()[0]
            })
            .collect();
        let r = ks_one_sample(&out, |x| f.marginal_cdf(x)).unwrap();
        assert!(r.p_value > 0.01, "{r:?}");
    }

    #[test]
    fn registry_rejects_unknown_and_bad_parameters() {
        assert!(DensityModel::by_name("cauchy", 1).is_err());
        assert!(DensityModel::new(Density1::Gamma { shape: 0.5, scale: 1.0 }, 1).is_err());
        assert!(DensityModel::new(Density1::Beta { a: 0.5, b: 2.0 }, 1).is_err());
    }
}

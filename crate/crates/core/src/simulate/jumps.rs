//! Time-changed symmetric tempered-stable jumps.
//!
//! The Lévy density at time `t` is `c·e^{-λ|x|}/|x|^{α+1}·V_t`. Jumps larger
//! than a cutoff `ε` are simulated exactly as a compound Poisson process with
//! intensity `V·Λ_ε`; the small jumps are replaced by a centred Gaussian with
//! the same variance `V·s²_ε`. The measure is symmetric, so neither part
//! needs a drift compensator.

use rand_distr::{Distribution, Poisson};

use crate::error::{Error, Result};
use crate::numeric;
use crate::rng::RandomStream;

const QUAD_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemperedStable {
    pub alpha: f64,
    pub lambda: f64,
    pub c: f64,
}

impl TemperedStable {
    pub fn new(alpha: f64, lambda: f64, c: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 2.0) {
            return Err(Error::domain(format!("alpha must lie in (0,2), got {alpha}")));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(Error::domain(format!("lambda must be positive, got {lambda}")));
        }
        if !(c >= 0.0 && c.is_finite()) {
            return Err(Error::domain(format!("c must be non-negative, got {c}")));
        }
        Ok(Self { alpha, lambda, c })
    }

    /// `∫x²ν(dx)` per unit variance.
    pub fn second_moment(&self) -> f64 {
        numeric::jump_second_moment(self.alpha, self.lambda, self.c)
    }

    /// `Λ_ε = 2c∫_ε^∞ e^{-λx}x^{-α-1}dx`, the big-jump intensity per unit variance.
    pub fn tail_intensity(&self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        if self.c == 0.0 {
            return Ok(0.0);
        }
        let (a, le) = (self.alpha, self.lambda * eps);
        // x = ε·e^t, with e^{-λε} factored out of the integrand.
        let upper = (1.0 + 745.0 / le).ln();
        let integral = numeric::integrate(
            |t| (-a * t - le * t.exp_m1()).exp(),
            0.0,
            upper,
            QUAD_TOL,
        )
        .map_err(|e| quad_error("tail intensity", self, eps, e))?;
        Ok(2.0 * self.c * eps.powf(-a) * (-le).exp() * integral)
    }

    /// `s²_ε = 2c∫_0^ε x^{1-α}e^{-λx}dx`, the small-jump variance per unit variance.
    pub fn small_jump_variance(&self, eps: f64) -> Result<f64> {
        check_eps(eps)?;
        if self.c == 0.0 {
            return Ok(0.0);
        }
        let (b, le) = (2.0 - self.alpha, self.lambda * eps);
        // x = ε·e^{-t}
        let upper = 45.0 / b;
        let integral = numeric::integrate(
            |t| (-b * t - le * (-t).exp()).exp(),
            0.0,
            upper,
            QUAD_TOL,
        )
        .map_err(|e| quad_error("small-jump variance", self, eps, e))?;
        Ok(2.0 * self.c * eps.powf(b) * integral)
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::domain(format!("jump cutoff must be positive, got {eps}")));
    }
    Ok(())
}

fn quad_error(what: &str, p: &TemperedStable, eps: f64, e: Error) -> Error {
    Error::Numeric(format!(
        "{what} quadrature failed for alpha={}, lambda={}, c={}, eps={eps:e}: {e}",
        p.alpha, p.lambda, p.c
    ))
}

/// How the small/big jump cutoff is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffRule {
    /// Target ratio `s²_ε / ∫x²ν(dx)`.
    pub small_variance_fraction: f64,
    /// Upper bound on the expected number of big jumps per step at `v_ref`.
    pub max_jumps_per_step: f64,
    pub v_ref: f64,
    pub delta_n: f64,
}

impl CutoffRule {
    pub fn new(v_ref: f64, delta_n: f64) -> Self {
        Self {
            small_variance_fraction: 1e-4,
            max_jumps_per_step: 2.0,
            v_ref,
            delta_n,
        }
    }
}

// Bisection in log ε for a monotone function of ε.
fn solve_log_eps<F: Fn(f64) -> Result<f64>>(f: F, lambda: f64, increasing: bool) -> Result<f64> {
    let (mut lo, mut hi) = ((1e-20 / lambda).ln(), (10.0 / lambda).ln());
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let v = f(mid.exp())?;
        if (v > 0.0) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    Ok((0.5 * (lo + hi)).exp())
}

/// Jump generator with cached `Λ_ε` and `s²_ε`.
#[derive(Debug, Clone)]
pub struct JumpSampler {
    pub params: TemperedStable,
    pub eps: f64,
    /// `Λ_ε` per unit variance per unit time.
    pub tail_rate: f64,
    /// `s²_ε` per unit variance per unit time.
    pub small_var: f64,
}

impl JumpSampler {
    pub fn new(params: TemperedStable, eps: f64) -> Result<Self> {
        Ok(Self {
            params,
            eps,
            tail_rate: params.tail_intensity(eps)?,
            small_var: params.small_jump_variance(eps)?,
        })
    }

    /// Cutoff with `s²_ε` at the target fraction of the total jump variance,
    /// raised if needed so the expected big-jump count per step at `v_ref`
    /// stays below `max_jumps_per_step`.
    pub fn with_cutoff_rule(params: TemperedStable, rule: CutoffRule) -> Result<Self> {
        if params.c == 0.0 {
            return Self::new(params, 1.0 / params.lambda);
        }
        let target = rule.small_variance_fraction * params.second_moment();
        let mut eps = solve_log_eps(
            |e| Ok(params.small_jump_variance(e)? - target),
            params.lambda,
            true,
        )?;
        let per_step = |e: f64| -> Result<f64> {
            Ok(params.tail_intensity(e)? * rule.v_ref * rule.delta_n)
        };
        if rule.v_ref > 0.0 && per_step(eps)? > rule.max_jumps_per_step {
            eps = solve_log_eps(
                |e| Ok(rule.max_jumps_per_step - per_step(e)?),
                params.lambda,
                true,
            )?;
        }
        Self::new(params, eps)
    }

    fn big_jump_size(&self, stream: &mut RandomStream) -> f64 {
        let (a, l, eps) = (self.params.alpha, self.params.lambda, self.eps);
        // Pareto(α) proposal on (ε, ∞), thinned by the tempering factor.
        let x = loop {
            let x = eps * stream.uniform_open0().powf(-1.0 / a);
            if stream.uniform() < (-l * (x - eps)).exp() {
                break x;
            }
        };
        if stream.uniform() < 0.5 {
            -x
        } else {
            x
        }
    }

    /// Jump increment over one step of length `dt` with spot variance `v`.
    pub fn step(&self, v: f64, dt: f64, stream: &mut RandomStream) -> f64 {
        if self.params.c == 0.0 {
            return 0.0;
        }
        let v = v.max(0.0);
        let mut total = 0.0;
        if self.small_var > 0.0 {
            total += (v * dt * self.small_var).sqrt() * stream.normal();
        }
        let mean = v * dt * self.tail_rate;
        if mean > 0.0 {
            let count = Poisson::new(mean)
                .map(|p| p.sample(stream) as u64)
                .unwrap_or(0);
            for _ in 0..count {
                total += self.big_jump_size(stream);
            }
        }
        total
    }

    pub fn increments(&self, variance_path: &[f64], dt: f64, stream: &mut RandomStream) -> Vec<f64> {
        variance_path
            .iter()
            .map(|&v| self.step(v, dt, stream))
            .collect()
    }
}

/// Per-step jump sums over a variance path sampled at spacing `delta_n`.
pub fn simulate_jump_increments(
    alpha: f64,
    lambda: f64,
    c: f64,
    variance_path: &[f64],
    delta_n: f64,
    eps_cut: f64,
    stream: &mut RandomStream,
) -> Result<Vec<f64>> {
    let params = TemperedStable::new(alpha, lambda, c)?;
    if c == 0.0 {
        return Ok(vec![0.0; variance_path.len()]);
    }
    let sampler = JumpSampler::new(params, eps_cut)?;
    Ok(sampler.increments(variance_path, delta_n, stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::jump_scale_from;
    use crate::rng::rng_stream;

    #[test]
    fn zero_scale_gives_zero_increments() {
        let mut s = rng_stream(1, 0, 0);
        let v = vec![0.02; 1000];
        let inc = simulate_jump_increments(0.5, 500.0, 0.0, &v, 1e-6, 1e-5, &mut s).unwrap();
        assert!(inc.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn cutoff_split_preserves_second_moment() {
        for &alpha in &[0.5, 1.0, 1.5] {
            let c = jump_scale_from(alpha, 500.0).unwrap();
            let p = TemperedStable::new(alpha, 500.0, c).unwrap();
            for &eps in &[1e-7_f64, 1e-5, 1e-3] {
                // ∫_ε^∞ x² ν(dx) by quadrature, plus s²_ε, equals the closed form.
                let big = 2.0
                    * c
                    * numeric::integrate(
                        |t: f64| {
                            let x = eps * t.exp();
                            x * x * (-500.0 * x).exp() * x.powf(-alpha - 1.0) * x
                        },
                        0.0,
                        (1.0 + 745.0 / (500.0 * eps)).ln(),
                        1e-12,
                    )
                    .unwrap();
                let total = big + p.small_jump_variance(eps).unwrap();
                assert!((total / p.second_moment() - 1.0).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn default_cutoff_meets_targets() {
        let dn = crate::model::default_delta_n();
        let c = jump_scale_from(0.5, 500.0).unwrap();
        let p = TemperedStable::new(0.5, 500.0, c).unwrap();
        let s = JumpSampler::with_cutoff_rule(p, CutoffRule::new(0.02, dn)).unwrap();
        assert!((s.small_var / p.second_moment() - 1e-4).abs() < 1e-8);
        assert!(s.tail_rate * 0.02 * dn < 2.0);

        let c = jump_scale_from(1.5, 500.0).unwrap();
        let p = TemperedStable::new(1.5, 500.0, c).unwrap();
        let s = JumpSampler::with_cutoff_rule(p, CutoffRule::new(0.02, dn)).unwrap();
        // the count cap binds for infinite-variation jumps
        assert!((s.tail_rate * 0.02 * dn / 2.0 - 1.0).abs() < 1e-8);
        assert!(s.small_var / p.second_moment() < 0.1);
    }
}

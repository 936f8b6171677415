//! Radially symmetric edge-weight families and their normalization.
//!
//! A weight is written `w(r) = C * w~(r / sigma)`. The scale `C` is fixed by
//! the continuous second-moment constraint
//!
//! ```text
//! integral_0^R r^(p+1) w(r) dr = R^p
//! ```
//!
//! which, in terms of the scaled radius `z = R / sigma`, becomes
//! `C = z^p / (sigma^2 * W~[p, z])` with `W~[p, z] = integral_0^z v^(p+1) w~(v) dv`.
//! The continuous constraint is used as-is; discrete lattice corrections are
//! only reported (see [`gauss_circle_count`]).

use core::f64::consts::PI;

use crate::error::{Error, Result};

/// Weight family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum WeightFamily {
    /// `C * exp(-r^2 / (2 sigma^2))`, truncated to `r <= R`.
    Gaussian,
    /// `C * (sigma / r)^(2 + epsilon)`.
    Polynomial,
}

/// Fully resolved weight parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightSpec {
    pub family: WeightFamily,
    /// State dimension `p`.
    pub dim: u32,
    /// Graph radius `R`.
    pub radius: f64,
    /// Decay length `sigma`.
    pub sigma: f64,
    /// Super-quadratic exponent; unused by the Gaussian family.
    pub epsilon: f64,
    /// Weight scale `C`.
    pub scale: f64,
}

impl WeightSpec {
    /// Gaussian weights with the scale derived from the moment constraint.
    pub fn gaussian(dim: u32, radius: f64, sigma: f64) -> Result<Self> {
        let mut spec = WeightSpec {
            family: WeightFamily::Gaussian,
            dim,
            radius,
            sigma,
            epsilon: 0.0,
            scale: 1.0,
        };
        spec.validate()?;
        spec.scale = weight_scale(&spec)?;
        Ok(spec)
    }

    /// Polynomial weights; `epsilon = None` selects the default `p / 2`.
    pub fn polynomial(dim: u32, radius: f64, sigma: f64, epsilon: Option<f64>) -> Result<Self> {
        let mut spec = WeightSpec {
            family: WeightFamily::Polynomial,
            dim,
            radius,
            sigma,
            epsilon: epsilon.unwrap_or(dim as f64 / 2.0),
            scale: 1.0,
        };
        spec.validate()?;
        spec.scale = weight_scale(&spec)?;
        Ok(spec)
    }

    /// Overrides the derived scale.
    pub fn with_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::param("scale", "must be finite and positive"));
        }
        self.scale = scale;
        Ok(self)
    }

    /// Scaled radius `z = R / sigma`.
    pub fn z(&self) -> f64 {
        self.radius / self.sigma
    }

    fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::param("p", "state dimension must be at least 1"));
        }
        if !(self.radius.is_finite() && self.radius > 0.0) {
            return Err(Error::param("R", "radius must be finite and positive"));
        }
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::param("sigma", "decay length must be finite and positive"));
        }
        if self.family == WeightFamily::Polynomial
            && !(self.epsilon >= 0.0 && self.epsilon < self.dim as f64)
        {
            return Err(Error::param("epsilon", "polynomial family needs 0 <= epsilon < p"));
        }
        Ok(())
    }
}

/// Weight parameters as written in configuration: `None` means "auto".
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct WeightConfig {
    pub family: WeightFamily,
    /// `None` uses the graph radius.
    pub radius: Option<f64>,
    /// `None` uses the resolved radius (`z = 1`).
    pub sigma: Option<f64>,
    /// `None` uses `p / 2` for the polynomial family.
    pub epsilon: Option<f64>,
    /// `None` derives `C` from the moment constraint.
    pub scale: Option<f64>,
}

impl WeightConfig {
    pub fn polynomial(epsilon: Option<f64>) -> Self {
        WeightConfig {
            family: WeightFamily::Polynomial,
            radius: None,
            sigma: None,
            epsilon,
            scale: None,
        }
    }

    pub fn gaussian(sigma: Option<f64>) -> Self {
        WeightConfig {
            family: WeightFamily::Gaussian,
            radius: None,
            sigma,
            epsilon: None,
            scale: None,
        }
    }

    /// Resolves the auto fields against a graph of dimension `dim` and radius `graph_radius`.
    pub fn resolve(&self, dim: u32, graph_radius: f64) -> Result<WeightSpec> {
        let radius = self.radius.unwrap_or(graph_radius);
        let sigma = self.sigma.unwrap_or(radius);
        let spec = match self.family {
            WeightFamily::Gaussian => WeightSpec::gaussian(dim, radius, sigma)?,
            WeightFamily::Polynomial => WeightSpec::polynomial(dim, radius, sigma, self.epsilon)?,
        };
        match self.scale {
            Some(c) => spec.with_scale(c),
            None => Ok(spec),
        }
    }
}

/// Scaled Gaussian moment `W~[p, z] = integral_0^z v^(p+1) exp(-v^2/2) dv`.
///
/// Seeded by the closed forms for `p = -2, -1, 0` and advanced with
/// `W~[p] = p W~[p-2] - z^p exp(-z^2/2)`. The `p = -2` row is defined as zero.
///
/// While the integrand is still rising (`z^2 < p + 2`) the upward recursion
/// cancels badly, so the alternating power series of `exp` is summed instead.
pub fn gaussian_moment(p: i32, z: f64) -> Result<f64> {
    if p < -2 {
        return Err(Error::param("p", "Gaussian moments are defined for p >= -2"));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::param("z", "scaled radius must be finite and positive"));
    }
    let tail = libm::exp(-0.5 * z * z);
    let seed_odd = libm::sqrt(PI / 2.0) * libm::erf(z / core::f64::consts::SQRT_2);
    let seed_even = -libm::expm1(-0.5 * z * z);
    match p {
        -2 => return Ok(0.0),
        -1 => return Ok(seed_odd),
        0 => return Ok(seed_even),
        _ => {}
    }
    if z * z < (p + 2) as f64 {
        return Ok(moment_series(p, z));
    }
    let (mut order, mut value) = if p % 2 == 0 { (0, seed_even) } else { (-1, seed_odd) };
    while order < p {
        order += 2;
        value = order as f64 * value - libm::pow(z, order as f64) * tail;
    }
    Ok(value)
}

/// `sum_k (-z^2/2)^k / k! * z^(p+2) / (p + 2 + 2k)`.
fn moment_series(p: i32, z: f64) -> f64 {
    let x = -0.5 * z * z;
    let lead = libm::pow(z, (p + 2) as f64);
    let (mut coef, mut sum) = (1.0, 0.0);
    for k in 0..200 {
        let term = coef / (p + 2 + 2 * k) as f64;
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
        coef *= x / (k + 1) as f64;
    }
    lead * sum
}

/// Scaled polynomial moment `z^(p - epsilon) / (p - epsilon)`.
pub fn polynomial_moment(p: i32, z: f64, epsilon: f64) -> Result<f64> {
    if p <= 0 {
        return Err(Error::param("p", "polynomial moments are undefined for p <= 0"));
    }
    if !(epsilon >= 0.0 && epsilon < p as f64) {
        return Err(Error::param("epsilon", "moment diverges unless 0 <= epsilon < p"));
    }
    if !(z.is_finite() && z > 0.0) {
        return Err(Error::param("z", "scaled radius must be finite and positive"));
    }
    let k = p as f64 - epsilon;
    Ok(libm::pow(z, k) / k)
}

/// Scaled moment of the family of `spec`, evaluated at its `z`.
pub fn scaled_moment(spec: &WeightSpec) -> Result<f64> {
    match spec.family {
        WeightFamily::Gaussian => gaussian_moment(spec.dim as i32, spec.z()),
        WeightFamily::Polynomial => polynomial_moment(spec.dim as i32, spec.z(), spec.epsilon),
    }
}

/// Weight scale `C = z^p / (sigma^2 W~[p, z])`.
pub fn weight_scale(spec: &WeightSpec) -> Result<f64> {
    if !(spec.sigma > 0.0) || !(spec.radius > 0.0) {
        return Err(Error::param("sigma/R", "degenerate weight scale"));
    }
    let z = spec.z();
    let moment = scaled_moment(spec)?;
    Ok(libm::pow(z, spec.dim as f64) / (spec.sigma * spec.sigma * moment))
}

/// Evaluates the weight at distance `r > 0`.
pub fn eval_weight(spec: &WeightSpec, r: f64) -> Result<f64> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::param("r", "weights are evaluated at positive distances only"));
    }
    Ok(match spec.family {
        WeightFamily::Gaussian => {
            if r > spec.radius {
                0.0
            } else {
                let s = r / spec.sigma;
                spec.scale * libm::exp(-0.5 * s * s)
            }
        }
        WeightFamily::Polynomial => spec.scale * libm::pow(spec.sigma / r, 2.0 + spec.epsilon),
    })
}

/// Scaled radius at which the Gaussian moment integrand `v^(p+1) exp(-v^2/2)`
/// changes curvature for the last time, after which it decays to zero.
///
/// The integrand's second derivative vanishes where
/// `v^4 - (2p + 3) v^2 + p(p + 1) = 0`; this returns the larger root.
pub fn inflection_radius(p: u32) -> Result<f64> {
    if p == 0 {
        return Err(Error::param("p", "must be at least 1"));
    }
    let p = p as f64;
    Ok(libm::sqrt(p + 1.5 + libm::sqrt(2.0 * p + 2.25)))
}

/// Largest integer `k >= 0` with `k^2 <= x`.
fn floor_sqrt(x: f64) -> i64 {
    if x < 0.0 {
        return -1;
    }
    let mut k = libm::floor(libm::sqrt(x)) as i64;
    while (k as f64) * (k as f64) > x {
        k -= 1;
    }
    while ((k + 1) as f64) * ((k + 1) as f64) <= x {
        k += 1;
    }
    k
}

/// Number of integer lattice points in `Z^p` with squared norm at most `R^2`.
///
/// `p = 2` uses `1 + 4 * sum_{i=0}^{floor R} floor(sqrt(R^2 - i^2))`; `p = 1, 3`
/// enumerate directly.
pub fn gauss_circle_count(radius: f64, p: u32) -> Result<u64> {
    if !(radius.is_finite() && radius >= 0.0) {
        return Err(Error::param("R", "must be finite and nonnegative"));
    }
    let r2 = radius * radius;
    let rmax = floor_sqrt(r2);
    match p {
        1 => Ok((2 * rmax + 1) as u64),
        2 => {
            let quadrant: i64 = (0..=rmax).map(|i| floor_sqrt(r2 - (i * i) as f64)).sum();
            Ok((1 + 4 * quadrant) as u64)
        }
        3 => {
            let mut count: u64 = 0;
            for i in -rmax..=rmax {
                for j in -rmax..=rmax {
                    let rest = r2 - (i * i + j * j) as f64;
                    if rest >= 0.0 {
                        count += (2 * floor_sqrt(rest) + 1) as u64;
                    }
                }
            }
            Ok(count)
        }
        _ => Err(Error::param("p", "lattice counting supports p in {1, 2, 3}")),
    }
}

/// Volume and surface area of the `p`-ball of radius `R`.
///
/// Uses the factorial forms: `V_p = pi^(p/2) / (p/2)!` for even `p` and
/// `V_p = 2^p ((p-1)/2)! pi^((p-1)/2) / (p (p-1)!)` for odd `p`, with `S_p = p V_p`.
pub fn ball_volume_surface(p: u32, radius: f64) -> Result<(f64, f64)> {
    if p == 0 {
        return Err(Error::param("p", "must be at least 1"));
    }
    if !(radius.is_finite() && radius > 0.0) {
        return Err(Error::param("R", "must be finite and positive"));
    }
    let fact = |k: u32| (1..=k).fold(1.0f64, |acc, v| acc * v as f64);
    let unit = if p.is_multiple_of(2) {
        libm::pow(PI, (p / 2) as f64) / fact(p / 2)
    } else {
        let half = (p - 1) / 2;
        libm::pow(2.0, p as f64) * fact(half) * libm::pow(PI, half as f64) / (p as f64 * fact(p - 1))
    };
    let volume = unit * libm::pow(radius, p as f64);
    let surface = p as f64 * unit * libm::pow(radius, p as f64 - 1.0);
    Ok((volume, surface))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::integrate;
    use approx::assert_relative_eq;

    fn gaussian_quadrature(p: i32, z: f64, tol: f64) -> f64 {
        integrate(&|v: f64| v.powi(p + 1) * (-0.5 * v * v).exp(), 0.0, z, tol)
    }

    #[test]
    fn gaussian_table_rows() {
        assert_eq!(gaussian_moment(-2, 3.0).unwrap(), 0.0);
        // 1 - e^{-1/2}
        assert_relative_eq!(gaussian_moment(0, 1.0).unwrap(), 0.3934693402873666, max_relative = 1e-14);
        // 2 - 6 e^{-2}
        let w2 = gaussian_moment(2, 2.0).unwrap();
        assert_relative_eq!(w2, 1.187988300580324, max_relative = 1e-14);
        let w0 = gaussian_moment(0, 2.0).unwrap();
        assert_relative_eq!(w2, 2.0 * w0 - 4.0 * (-2.0f64).exp(), max_relative = 1e-14);
        // p = 1 row via Phi
        assert_relative_eq!(gaussian_moment(1, 1.0).unwrap(), 0.24909373217951538, max_relative = 1e-13);
    }

    #[test]
    fn gaussian_recursion_matches_quadrature() {
        for p in 1..=8 {
            for &z in &[0.1, 0.25, 0.5, 1.0, 2.0, 3.0, 4.0, 8.0] {
                let rec = gaussian_moment(p, z).unwrap();
                let quad = gaussian_quadrature(p, z, 1e-16 * rec);
                assert_relative_eq!(rec, quad, max_relative = 1e-11);
            }
        }
    }

    #[test]
    fn series_and_recursion_agree_at_the_switch() {
        for p in 1..=8 {
            let z = libm::sqrt((p + 2) as f64);
            let below = moment_series(p, z);
            let above = gaussian_moment(p, z).unwrap();
            assert_relative_eq!(below, above, max_relative = 1e-12);
        }
    }

    #[test]
    fn gaussian_moment_errors() {
        assert!(gaussian_moment(-3, 1.0).is_err());
        assert!(gaussian_moment(1, 0.0).is_err());
    }

    #[test]
    fn polynomial_moment_rows() {
        assert_eq!(polynomial_moment(1, 3.0, 0.0).unwrap(), 3.0);
        let quad = integrate(&|v: f64| v.powi(3) * v.powf(-3.0), 0.0, 2.0, 1e-14);
        assert_relative_eq!(polynomial_moment(2, 2.0, 1.0).unwrap(), quad, max_relative = 1e-12);
        assert_relative_eq!(polynomial_moment(2, 2.0, 1.0).unwrap(), 2.0);
        assert!(polynomial_moment(2, 2.0, 2.0).is_err());
        assert!(polynomial_moment(0, 2.0, 0.0).is_err());
        assert!(polynomial_moment(-1, 2.0, 0.0).is_err());
    }

    #[test]
    fn polynomial_closed_form_weight() {
        for &sigma in &[0.1, 1.0, 7.5] {
            let s = WeightSpec::polynomial(1, 4.0, sigma, Some(0.0)).unwrap();
            for &r in &[0.3, 1.0, 2.0] {
                assert_relative_eq!(eval_weight(&s, r).unwrap(), 1.0 / (r * r), max_relative = 1e-12);
            }
            let s = WeightSpec::polynomial(2, 2.0, sigma, Some(1.0)).unwrap();
            for &r in &[0.3, 1.0, 2.0] {
                assert_relative_eq!(eval_weight(&s, r).unwrap(), 2.0 / (r * r * r), max_relative = 1e-12);
            }
        }
        let s = WeightSpec::polynomial(1, 1.0, 1.0, Some(0.0)).unwrap();
        assert_relative_eq!(eval_weight(&s, 2.0).unwrap(), 0.25, max_relative = 1e-15);
    }

    #[test]
    fn gaussian_scale_at_unit_z() {
        let sigma = 1.7;
        let s = WeightSpec::gaussian(2, sigma, sigma).unwrap();
        let expected = (1.0 / (sigma * sigma)) / (2.0 - 3.0 * (-0.5f64).exp());
        assert_relative_eq!(s.scale, expected, max_relative = 1e-14);
        let quad = gaussian_quadrature(2, 1.0, 1e-14);
        assert_relative_eq!(s.scale, 1.0 / (sigma * sigma * quad), max_relative = 1e-12);
    }

    #[test]
    fn gaussian_eval_and_truncation() {
        let s = WeightSpec::gaussian(2, 3.0, 1.0).unwrap();
        assert_relative_eq!(eval_weight(&s, 1.0).unwrap(), s.scale * (-0.5f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(eval_weight(&s, 1e-12).unwrap(), s.scale, max_relative = 1e-12);
        assert_eq!(eval_weight(&s, 3.0 + 1e-9).unwrap(), 0.0);
        assert!(eval_weight(&s, 0.0).is_err());
        assert!(eval_weight(&s, -1.0).is_err());
    }

    #[test]
    fn moment_constraint_identity() {
        for p in 1..=3u32 {
            for &z in &[0.5, 1.0, 2.0, 4.0] {
                let radius = 2.0;
                let sigma = radius / z;
                let specs = [
                    WeightSpec::gaussian(p, radius, sigma).unwrap(),
                    WeightSpec::polynomial(p, radius, sigma, None).unwrap(),
                ];
                for s in specs {
                    let integrand = |r: f64| {
                        if r == 0.0 {
                            0.0
                        } else {
                            r.powi(p as i32 + 1) * eval_weight(&s, r).unwrap()
                        }
                    };
                    // the polynomial integrand has an integrable r^(p/2 - 1) singularity
                    let value = if s.family == WeightFamily::Polynomial {
                        let k = p as f64 - s.epsilon;
                        let u = |t: f64| {
                            let r = t.powf(1.0 / k);
                            integrand(r) * r.powf(1.0 - k) / k
                        };
                        integrate(&u, 0.0, radius.powf(k), 1e-13)
                    } else {
                        integrate(&integrand, 0.0, radius, 1e-13)
                    };
                    assert_relative_eq!(value, radius.powi(p as i32), max_relative = 1e-8);
                }
            }
        }
    }

    #[test]
    fn spec_validation() {
        assert!(WeightSpec::polynomial(2, 1.0, 1.0, Some(2.0)).is_err());
        assert!(WeightSpec::polynomial(2, 1.0, 0.0, None).is_err());
        assert!(WeightSpec::gaussian(2, 0.0, 1.0).is_err());
        assert_eq!(WeightSpec::polynomial(4, 1.0, 1.0, None).unwrap().epsilon, 2.0);
        let cfg = WeightConfig::polynomial(None);
        let s = cfg.resolve(2, 3.0).unwrap();
        assert_eq!((s.radius, s.sigma, s.epsilon), (3.0, 3.0, 1.0));
    }

    /// Second derivative of the Gaussian moment integrand by central differences.
    fn integrand_curvature(p: u32, v: f64) -> f64 {
        let g = |t: f64| t.powi(p as i32 + 1) * (-0.5 * t * t).exp();
        let h = 1e-4;
        (g(v + h) - 2.0 * g(v) + g(v - h)) / (h * h)
    }

    fn last_sign_change(p: u32) -> f64 {
        let (mut lo, mut hi) = (((p + 1) as f64).sqrt(), 8.0);
        assert!(integrand_curvature(p, lo) < 0.0 && integrand_curvature(p, hi) > 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if integrand_curvature(p, mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn inflection_matches_numeric_sign_change() {
        assert_relative_eq!(inflection_radius(1).unwrap(), 2.135779205069857, max_relative = 1e-12);
        assert_relative_eq!(inflection_radius(2).unwrap(), 6.0f64.sqrt(), max_relative = 1e-12);
        for p in 1..=6 {
            assert!((inflection_radius(p).unwrap() - last_sign_change(p)).abs() < 1e-5);
            assert!(inflection_radius(p + 1).unwrap() > inflection_radius(p).unwrap());
        }
        assert!(inflection_radius(0).is_err());
    }

    fn brute_lattice(radius: f64, p: u32) -> u64 {
        let r = radius.floor() as i64;
        let r2 = radius * radius;
        let mut count = 0;
        match p {
            2 => {
                for i in -r..=r {
                    for j in -r..=r {
                        if ((i * i + j * j) as f64) <= r2 {
                            count += 1;
                        }
                    }
                }
            }
            3 => {
                for i in -r..=r {
                    for j in -r..=r {
                        for k in -r..=r {
                            if ((i * i + j * j + k * k) as f64) <= r2 {
                                count += 1;
                            }
                        }
                    }
                }
            }
            _ => {
                for i in -r..=r {
                    if ((i * i) as f64) <= r2 {
                        count += 1;
                    }
                }
            }
        }
        count
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(gauss_circle_count(1.0, 2).unwrap(), 5);
        assert_eq!(gauss_circle_count(2.0, 2).unwrap(), 13);
        for p in 1..=3 {
            assert_eq!(gauss_circle_count(0.0, p).unwrap(), 1);
        }
        for r in 0..=30 {
            for &frac in &[0.0, 0.5, 0.99] {
                let radius = r as f64 + frac;
                assert_eq!(gauss_circle_count(radius, 2).unwrap(), brute_lattice(radius, 2));
                assert_eq!(gauss_circle_count(radius, 1).unwrap(), brute_lattice(radius, 1));
            }
        }
        for r in 0..=12 {
            assert_eq!(gauss_circle_count(r as f64, 3).unwrap(), brute_lattice(r as f64, 3));
        }
        assert!(gauss_circle_count(1.0, 4).is_err());
    }

    #[test]
    fn ball_constants() {
        let (v, s) = ball_volume_surface(2, 1.0).unwrap();
        assert_relative_eq!(v, PI, max_relative = 1e-15);
        assert_relative_eq!(s, 2.0 * PI, max_relative = 1e-15);
        let (v, s) = ball_volume_surface(3, 1.0).unwrap();
        assert_relative_eq!(v, 4.0 * PI / 3.0, max_relative = 1e-15);
        assert_relative_eq!(s, 4.0 * PI, max_relative = 1e-15);
        assert_eq!(ball_volume_surface(1, 2.0).unwrap(), (4.0, 2.0));
        for p in 1..=9u32 {
            let radius = 1.3;
            let (v, s) = ball_volume_surface(p, radius).unwrap();
            let gamma_form = PI.powf(p as f64 / 2.0) / libm::tgamma(p as f64 / 2.0 + 1.0) * radius.powi(p as i32);
            assert_relative_eq!(v, gamma_form, max_relative = 1e-13);
            assert_relative_eq!(s * radius, p as f64 * v, max_relative = 1e-13);
        }
    }
}

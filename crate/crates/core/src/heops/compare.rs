use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::poly::{poly_eval, poly_eval_scalar, PolyCoeffs};
use crate::error::{HeError, Result};
use crate::slotvec::{CipherHandle, Evaluator, SlotVector};

/// Comparator shape: which `g_n`/`f_n` pair, and how many times each is
/// composed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompConfig {
    pub n: u32,
    pub dg: u32,
    pub df: u32,
}

impl Default for CompConfig {
    /// `(3, 3, 3)`. On the scalar grid it is exact to rounding; cheaper
    /// shapes such as `(3, 2, 1)` also meet the 0.01 bound, with less margin
    /// for the small inputs `relu_approx` sees near zero.
    fn default() -> Self {
        Self { n: 3, dg: 3, df: 3 }
    }
}

impl fmt::Display for CompConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.n, self.dg, self.df)
    }
}

impl FromStr for CompConfig {
    type Err = HeError;

    /// Parses `n,dg,df`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let parse = |p: &str| {
            p.parse::<u32>()
                .map_err(|_| HeError::Config(format!("bad comparator config {s:?}, expected n,dg,df")))
        };
        if parts.len() != 3 {
            return Err(HeError::Config(format!("bad comparator config {s:?}, expected n,dg,df")));
        }
        let cfg = Self {
            n: parse(parts[0])?,
            dg: parse(parts[1])?,
            df: parse(parts[2])?,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl CompConfig {
    pub fn new(n: u32, dg: u32, df: u32) -> Result<Self> {
        let cfg = Self { n, dg, df };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=4).contains(&self.n) {
            return Err(HeError::Config(format!(
                "comparator index {} outside 1..=4",
                self.n
            )));
        }
        Ok(())
    }

    fn polys(&self) -> Result<(PolyCoeffs, PolyCoeffs)> {
        self.validate()?;
        Ok((PolyCoeffs::g(self.n)?, PolyCoeffs::f(self.n)?))
    }

    /// Levels consumed by [`comp_b`].
    pub fn depth(&self) -> Result<u32> {
        let (g, f) = self.polys()?;
        Ok(self.dg * g.depth() + self.df * f.depth() + 1)
    }
}

/// `g_n` applied `dg` times then `f_n` applied `df` times, then `(x + 1) / 2`.
fn compose(ev: &dyn Evaluator, x: CipherHandle, cfg: &CompConfig) -> Result<CipherHandle> {
    let (g, f) = cfg.polys()?;
    let needed = cfg.depth()?;
    if x.level() < needed {
        return Err(ev.params().depth_error(needed, x.level()));
    }
    let n = x.slot_count();
    let mut x = x;
    for _ in 0..cfg.dg {
        x = poly_eval(ev, &x, &g)?;
    }
    for _ in 0..cfg.df {
        x = poly_eval(ev, &x, &f)?;
    }
    let shifted = ev.add_plain(&x, &SlotVector::constant(1.0, n)?)?;
    ev.mult_plain(&shifted, &SlotVector::constant(0.5, n)?)
}

fn compose_scalar(x: f64, g: &PolyCoeffs, f: &PolyCoeffs, cfg: &CompConfig) -> f64 {
    let mut x = x;
    for _ in 0..cfg.dg {
        x = poly_eval_scalar(x, g);
    }
    for _ in 0..cfg.df {
        x = poly_eval_scalar(x, f);
    }
    (x + 1.0) * 0.5
}

/// Approximate comparison: close to 1 where `a > b`, close to 0 where
/// `a < b`, exactly 0.5 where they are equal. Requires `a - b` in [-1, 1].
pub fn comp_b(
    ev: &dyn Evaluator,
    a: &CipherHandle,
    b: &CipherHandle,
    cfg: &CompConfig,
) -> Result<CipherHandle> {
    cfg.validate()?;
    let x = ev.sub(a, b)?;
    compose(ev, x, cfg)
}

/// Scalar image of [`comp_b`].
pub fn comp_b_scalar(a: f64, b: f64, cfg: &CompConfig) -> Result<f64> {
    let (g, f) = cfg.polys()?;
    Ok(compose_scalar(a - b, &g, &f, cfg))
}

fn check_bound(bound: f64) -> Result<()> {
    if !(bound.is_finite() && bound > 0.0) {
        return Err(HeError::Config(format!(
            "activation bound must be positive and finite, got {bound}"
        )));
    }
    Ok(())
}

/// `x * comp(x / B, 0)`, an approximation of `max(0, x)` for `|x| <= B`.
///
/// Comparing against an encryption of zero would only add noise, so the
/// comparator runs directly on `x / B`. Consumes `cfg.depth() + 2` levels.
pub fn relu_approx(
    ev: &dyn Evaluator,
    c: &CipherHandle,
    cfg: &CompConfig,
    bound: f64,
) -> Result<CipherHandle> {
    check_bound(bound)?;
    let needed = cfg.depth()? + 2;
    if c.level() < needed {
        return Err(ev.params().depth_error(needed, c.level()));
    }
    let scaled = ev.mult_plain(c, &SlotVector::constant(1.0 / bound, c.slot_count())?)?;
    let gate = compose(ev, scaled, cfg)?;
    ev.mult(c, &gate)
}

/// Scalar image of [`relu_approx`]. Builds its polynomials once per call;
/// use [`ReluApproxScalar`] in loops.
pub fn relu_approx_scalar(x: f64, cfg: &CompConfig, bound: f64) -> Result<f64> {
    Ok(ReluApproxScalar::new(*cfg, bound)?.eval(x))
}

/// Prepared scalar image of [`relu_approx`].
#[derive(Debug, Clone)]
pub struct ReluApproxScalar {
    cfg: CompConfig,
    inv_bound: f64,
    g: PolyCoeffs,
    f: PolyCoeffs,
}

impl ReluApproxScalar {
    pub fn new(cfg: CompConfig, bound: f64) -> Result<Self> {
        check_bound(bound)?;
        let (g, f) = cfg.polys()?;
        Ok(Self {
            cfg,
            inv_bound: 1.0 / bound,
            g,
            f,
        })
    }

    pub fn eval(&self, x: f64) -> f64 {
        x * compose_scalar(x * self.inv_bound, &self.g, &self.f, &self.cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::slotvec::{ClearBackend, Decryptor, Encryptor, HEParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid() -> Vec<(f64, f64)> {
        let pts: Vec<f64> = (0..=40).map(|i| -1.0 + i as f64 * 0.05).collect();
        let mut out = Vec::new();
        for &a in &pts {
            for &b in &pts {
                let d = (a - b).abs();
                if (0.05 - 1e-12..=1.0).contains(&d) {
                    out.push((a, b));
                }
            }
        }
        out
    }

    fn grid_error(cfg: &CompConfig) -> f64 {
        grid()
            .into_iter()
            .map(|(a, b)| {
                let ind = if a > b { 1.0 } else { 0.0 };
                (comp_b_scalar(a, b, cfg).unwrap() - ind).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn config_depths() {
        let depth = |n, dg, df| CompConfig::new(n, dg, df).unwrap().depth().unwrap();
        assert_eq!(depth(1, 1, 0), 4);
        assert_eq!(depth(3, 3, 3), 25);
        assert_eq!(depth(4, 1, 1), 11);
        assert!(CompConfig::new(0, 1, 1).is_err());
        assert!(CompConfig::new(5, 1, 1).is_err());
    }

    #[test]
    fn config_parses() {
        assert_eq!("3,2,1".parse::<CompConfig>().unwrap(), CompConfig { n: 3, dg: 2, df: 1 });
        assert!("3,2".parse::<CompConfig>().is_err());
        assert!("7,2,1".parse::<CompConfig>().is_err());
        assert_eq!(CompConfig::default().to_string(), "3,3,3");
    }

    #[test]
    fn default_config_meets_grid_bound() {
        assert!(grid_error(&CompConfig::default()) <= 0.01);
    }

    #[test]
    fn more_f_iterations_never_hurt() {
        for n in 1..=4 {
            for dg in 0..=3 {
                let mut prev = f64::INFINITY;
                for df in 0..=4 {
                    let err = grid_error(&CompConfig::new(n, dg, df).unwrap());
                    assert!(err <= prev + 1e-15, "n={n} dg={dg} df={df}: {err} > {prev}");
                    prev = err;
                }
            }
        }
    }

    #[test]
    fn equal_inputs_give_half_and_antisymmetry() {
        let cfg = CompConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a: f64 = rng.random_range(-1.0..1.0);
            let b = a + rng.random_range(-1.0..1.0);
            assert_eq!(comp_b_scalar(a, a, &cfg).unwrap(), 0.5);
            let s = comp_b_scalar(a, b, &cfg).unwrap() + comp_b_scalar(b, a, &cfg).unwrap();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn encrypted_comparator_matches_scalar() {
        let cfg = CompConfig::new(2, 1, 1).unwrap();
        let params = HEParams::for_depth(2, 30, cfg.depth().unwrap() + 2).unwrap();
        let backend = ClearBackend::new(params).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = [0.5, -0.2, 0.3, 0.0];
        let b = [0.1, 0.4, 0.3, -0.9];
        let ca = backend.encrypt(&SlotVector::from_real(&a).unwrap(), &mut rng).unwrap();
        let cb = backend.encrypt(&SlotVector::from_real(&b).unwrap(), &mut rng).unwrap();
        let out = comp_b(&backend, &ca, &cb, &cfg).unwrap();
        assert_eq!(params.depth_budget() - out.level(), cfg.depth().unwrap());
        let got = backend.decrypt(&out).unwrap().real_parts();
        let expect: Vec<f64> = a.iter().zip(&b).map(|(&x, &y)| comp_b_scalar(x, y, &cfg).unwrap()).collect();
        assert_eq!(got, expect);
        assert_eq!(got[2], 0.5);

        let relu = relu_approx(&backend, &ca, &cfg, 2.0).unwrap();
        assert_eq!(relu.level(), 0);
        let got = backend.decrypt(&relu).unwrap().real_parts();
        let expect: Vec<f64> = a.iter().map(|&x| relu_approx_scalar(x, &cfg, 2.0).unwrap()).collect();
        assert_eq!(got, expect);
        assert!(matches!(relu_approx(&backend, &ca, &cfg, 0.0), Err(HeError::Config(_))));
    }

    #[test]
    fn relu_scalar_shape() {
        let cfg = CompConfig::default();
        let relu = ReluApproxScalar::new(cfg, 8.0).unwrap();
        assert_eq!(relu.eval(0.0), 0.0);
        assert!((relu.eval(8.0) - 8.0).abs() < 1e-6);
        assert!(relu.eval(-8.0).abs() < 1e-6);
    }
}

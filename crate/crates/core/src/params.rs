//! The parameter constraint system: inputs, the tight derived assignment,
//! row-by-row validation, and the four preset configurations.
//!
//! Derivation is generic over the scalar so it can be run in `f32` for
//! sensitivity checks; the simulator itself consumes the `f64` form through
//! [`TickParams`].

use num_rational::Ratio;
use num_traits::{Float, FromPrimitive, ToPrimitive};
use std::fmt;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamsError {
    #[error("fixed point did not settle: {0}")]
    NonConvergence(String),
    #[error("invalid system parameters: {0}")]
    InvariantViolation(String),
    #[error("alpha is undefined for f0 = 0")]
    DivisionByZero,
    #[error("unknown case {0:?}; expected I, II, III or IV")]
    UnknownCase(String),
}

/// The four published configurations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Case {
    I,
    II,
    III,
    IV,
}

impl Case {
    pub const ALL: [Case; 4] = [Case::I, Case::II, Case::III, Case::IV];

    pub fn name(self) -> &'static str {
        match self {
            Case::I => "I",
            Case::II => "II",
            Case::III => "III",
            Case::IV => "IV",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl std::str::FromStr for Case {
    type Err = ParamsError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "I" | "1" => Ok(Case::I),
            "II" | "2" => Ok(Case::II),
            "III" | "3" => Ok(Case::III),
            "IV" | "4" => Ok(Case::IV),
            other => Err(ParamsError::UnknownCase(other.to_string())),
        }
    }
}

impl fmt::Display for Case {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Physical inputs. Durations are in seconds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams<T> {
    pub n0: usize,
    pub f0: usize,
    pub n1: usize,
    pub f1: usize,
    pub rho: T,
    pub eps0: T,
    pub eps2: T,
    pub delta_p: T,
    pub delta_d: T,
    pub delta0: T,
    /// Stabilization time of the underlying reading protocol.
    pub big_delta0: T,
    /// External reference precision; must be at least `eps2 / 2`.
    pub e0: T,
    /// Nominal hardware tick.
    pub tick: T,
}

impl<T: Float + FromPrimitive> SystemParams<T> {
    pub fn check(&self) -> Result<(), ParamsError> {
        let bad = |m: String| Err(ParamsError::InvariantViolation(m));
        if self.f0 == 0 || self.f1 == 0 {
            return bad(format!("f0 = {} and f1 = {} must both be at least 1", self.f0, self.f1));
        }
        if self.n0 <= 5 * self.f0 {
            return bad(format!("need n0 > 5 f0, got n0 = {}, f0 = {}", self.n0, self.f0));
        }
        if self.n1 <= 2 * self.f1 {
            return bad(format!("need n1 > 2 f1, got n1 = {}, f1 = {}", self.n1, self.f1));
        }
        if !(self.rho >= T::zero() && self.rho < T::one()) {
            return bad("rho must lie in [0, 1)".into());
        }
        let durations = [
            ("eps0", self.eps0),
            ("eps2", self.eps2),
            ("delta_p", self.delta_p),
            ("delta_d", self.delta_d),
            ("delta0", self.delta0),
            ("Delta0", self.big_delta0),
            ("e0", self.e0),
            ("tick", self.tick),
        ];
        for (name, v) in durations {
            if !(v > T::zero() && v.is_finite()) {
                return bad(format!("{name} must be a positive finite duration"));
            }
        }
        let two = T::from_f64(2.0).unwrap();
        if self.eps2 / two > self.e0 {
            return bad("need eps2 / 2 <= e0".into());
        }
        Ok(())
    }
}

/// Input block of a preset configuration.
pub fn preset<T: Float + FromPrimitive>(case: Case) -> SystemParams<T> {
    let (n0, f0, n1, f1) = match case {
        Case::I => (6, 1, 3, 1),
        Case::II => (100, 3, 3, 1),
        Case::III => (6, 1, 5, 2),
        Case::IV => (100, 3, 3, 1),
    };
    let (rho, eps0, eps2, dp, dd, d0) = match case {
        Case::I | Case::II => (1e-4, 1e-6, 0.05, 1e-4, 1e-3, 1.0),
        Case::III | Case::IV => (1e-6, 1e-7, 0.001, 2e-5, 1e-4, 5e-5),
    };
    let c = |x: f64| T::from_f64(x).unwrap();
    SystemParams {
        n0,
        f0,
        n1,
        f1,
        rho: c(rho),
        eps0: c(eps0),
        eps2: c(eps2),
        delta_p: c(dp),
        delta_d: c(dd),
        delta0: c(d0),
        big_delta0: c(1.0),
        e0: c(eps2 / 2.0),
        tick: c(8e-9),
    }
}

/// Preset lookup by name.
pub fn preset_named<T: Float + FromPrimitive>(name: &str) -> Result<SystemParams<T>, ParamsError> {
    Ok(preset(name.parse::<Case>()?))
}

/// `alpha = 1 / (floor((n0 - 2 f0 - 1) / f0) + 1)` as an exact fraction.
pub fn compute_alpha(n0: usize, f0: usize) -> Result<Ratio<u64>, ParamsError> {
    if f0 == 0 {
        return Err(ParamsError::DivisionByZero);
    }
    let denom = (n0 as u64 - 2 * f0 as u64 - 1) / f0 as u64 + 1;
    Ok(Ratio::new(1, denom))
}

/// The solved constant set.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedParams<T> {
    pub delta: [T; 18],
    pub delta_i: T,
    pub tau0: T,
    pub tau_max: u64,
    pub k_pls: u32,
    pub alpha: T,
    pub alpha_exact: Ratio<u64>,
    pub eps_b: T,
    pub theta: [T; 6],
    pub sigma: [T; 15],
    pub t_min: T,
    pub t_max: T,
    pub big_delta_c: T,
    pub eps1: T,
    pub rho1: T,
    pub big_delta1: T,
    pub eta1: T,
    pub eta2: T,
    pub tick: T,
    pub iterations: usize,
}

impl<T: Float> DerivedParams<T> {
    /// `delta_k`, one-based.
    pub fn d(&self, k: usize) -> T {
        self.delta[k]
    }

    /// `theta_k`, one-based.
    pub fn th(&self, k: usize) -> T {
        self.theta[k]
    }

    /// `sigma_k`, one-based.
    pub fn s(&self, k: usize) -> T {
        self.sigma[k]
    }
}

impl<T: Float + ToPrimitive> DerivedParams<T> {
    /// Seconds to ticks, rounding up.
    pub fn to_ticks(&self, seconds: T) -> u64 {
        let q = (seconds / self.tick).to_f64().unwrap();
        q.ceil().max(0.0) as u64
    }

    /// `eps1` as printed in reports: two significant digits.
    pub fn eps1_reported(&self) -> f64 {
        round_sig(self.eps1.to_f64().unwrap(), 2)
    }

    pub fn tick_params(&self, sys: &SystemParams<T>) -> TickParams {
        let f = |x: T| x.to_f64().unwrap();
        let mut delta = [0u64; 18];
        for (k, slot) in delta.iter_mut().enumerate().skip(1) {
            *slot = self.to_ticks(self.delta[k]);
        }
        TickParams {
            n0: sys.n0,
            f0: sys.f0,
            n1: sys.n1,
            f1: sys.f1,
            tick: f(self.tick),
            rho: f(sys.rho),
            tau0: self.to_ticks(self.tau0),
            tau_max: self.tau_max,
            k_pls: self.k_pls as u64,
            delta,
            delta_i: self.to_ticks(self.delta_i),
            q_clear: self.to_ticks(self.tau0 + (T::one() + sys.rho) * sys.delta_d),
        }
    }
}

/// Rounds to `digits` significant decimal digits.
pub fn round_sig(x: f64, digits: i32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor() as i32;
    let scale = 10f64.powi(digits - 1 - mag);
    (x * scale).round() / scale
}

/// The integer-tick view consumed by the protocol and the engine.
#[derive(Debug, Clone, PartialEq)]
pub struct TickParams {
    pub n0: usize,
    pub f0: usize,
    pub n1: usize,
    pub f1: usize,
    pub tick: f64,
    pub rho: f64,
    pub tau0: u64,
    pub tau_max: u64,
    pub k_pls: u64,
    /// `delta[k]` is `delta_k` in ticks; index 0 is unused.
    pub delta: [u64; 18],
    pub delta_i: u64,
    /// Q_DETECTOR clearing threshold `tau0 + (1 + rho) delta_d`.
    pub q_clear: u64,
}

impl TickParams {
    /// Length of one pulse cycle, `k_pls * tau0`.
    pub fn cycle(&self) -> u64 {
        self.k_pls * self.tau0
    }
}

/// Solves the constraint system with every inequality set tight.
pub fn derive_params<T>(sys: &SystemParams<T>) -> Result<DerivedParams<T>, ParamsError>
where
    T: Float + FromPrimitive + fmt::Debug,
{
    sys.check()?;
    let c = |x: f64| T::from_f64(x).unwrap();
    let one = T::one();
    let two = c(2.0);
    let (r, e0, e2, dp, dd, d0) = (sys.rho, sys.eps0, sys.eps2, sys.delta_p, sys.delta_d, sys.delta0);
    let alpha_exact = compute_alpha(sys.n0, sys.f0)?;
    let alpha = c(*alpha_exact.numer() as f64) / c(*alpha_exact.denom() as f64);
    let up = one + r;
    let dn = one - r;

    let mut delta = [T::zero(); 18];
    let mut theta = [T::zero(); 6];
    let mut sigma = [T::zero(); 15];
    let mut d_i = e2;
    let mut tau0 = one;
    let mut k: u32 = 3;
    let mut eps1 = two * e2;
    let mut eps_b;
    let mut t_min;
    let mut t_max;
    let tol = c(1e-9).max(c(8.0) * T::epsilon());
    let mut iterations = 0;

    loop {
        iterations += 1;
        let old = [d_i, tau0, eps1];
        let kt = c(k as f64);

        theta[1] = two * d_i / dn + dp;
        delta[2] = theta[1] * up;
        delta[1] = (theta[1] + dd) * up;
        theta[2] = theta[1] + delta[2] / dn + dp;
        theta[3] = theta[2] + d0;
        delta[3] = theta[3] * up + delta[1];
        theta[4] = (delta[3] - delta[1] + two * d_i) / dn + dp;
        delta[4] = theta[1] * up + two * r * theta[4];
        theta[5] = theta[4] + delta[4] / dn + dp;
        delta[5] = d_i + two * r * theta[2] + two * e0;
        delta[6] = d_i + two * r * theta[4] + c(4.0) * e0;

        delta[13] = eps1 + dd * up;
        sigma[7] = delta[13] / dn + dd;
        delta[10] = (sigma[7] + dd) * up;
        delta[11] = delta[10] + dp;
        delta[8] = delta[11] * dn / up - e0;
        delta[7] = eps1 + (dd + delta[11] / dn + dp) * up + e0;
        delta[12] = delta[7] + delta[8] + delta[11] + two * dp;
        sigma[3] = two * dp + delta[11] / dn;
        sigma[8] = delta[11] / up;
        // The published configurations are reproduced with delta_p here.
        sigma[9] = (sigma[3] - sigma[8] + dp) * up;
        sigma[10] = delta[12] * up;
        sigma[11] = (delta[7] + sigma[9] + two * r * sigma[10]) * up + dp;
        delta[16] = sigma[11] + dd * up;
        delta[17] = delta[16] + dp;
        delta[9] = delta[12] + delta[17] * dn / up - e0;
        sigma[4] = two * dp + delta[17] / dn;
        sigma[12] = sigma[3] + sigma[4] + sigma[10] + sigma[11] + d0;

        tau0 = (delta[6] + (theta[5] + d0) * up).max(delta[12] + d_i + (sigma[12] + d0) * up);
        t_min = (tau0 - delta[6]) / up - dp;
        t_max = (tau0 + delta[6]) / dn + dp;
        delta[14] = kt * (tau0 + two * d_i) + dp;
        delta[15] = kt * (tau0 - two * d_i) - dp;
        eps_b = c(11.0) * e0 + r * (c(3.0) * theta[1] + two * theta[5] + c(4.0) * theta[4] - c(4.0) * theta[3] + t_max);
        d_i = (sigma[11] + two * e0 + two * r * tau0).max(e2 + two * r * kt * t_max);

        let target = eps_b / (one - alpha);
        let mut kk: u32 = 1;
        while alpha.powi(kk as i32 - 1) * d_i > target {
            kk += 1;
            if kk > 10_000 {
                return Err(ParamsError::NonConvergence("k_pls unbounded".into()));
            }
        }
        k = kk.max(3);
        eps1 = c(4.0) * eps_b / (one - alpha);

        let new = [d_i, tau0, eps1];
        if new.iter().any(|v| !v.is_finite() || *v <= T::zero()) || tau0 > c(1e12) {
            return Err(ParamsError::NonConvergence(format!(
                "values diverged after {iterations} iterations (delta_I = {d_i:?}, tau0 = {tau0:?})"
            )));
        }
        let change = old.iter().zip(new.iter()).map(|(a, b)| ((*a - *b) / *b).abs()).fold(T::zero(), T::max);
        if change < tol {
            break;
        }
        if iterations >= 1000 {
            return Err(ParamsError::NonConvergence(format!(
                "no fixed point after 1000 iterations (last relative change {change:?})"
            )));
        }
    }

    let kt = c(k as f64);
    sigma[1] = delta[10] / dn + dd;
    sigma[2] = delta[15] / up - dd - delta[10] / dn;
    sigma[5] = sigma[7] + delta[14] / dn + dp;
    sigma[6] = sigma[1] + sigma[2] + sigma[3] + (tau0 + delta[1] + d_i) * up + dp;
    sigma[13] = two * d_i / dn + dp + sigma[6];
    sigma[14] = sigma[6] + (kt - one) * t_max;

    let eta1 = two.powi(3 * (sys.f1 as i32 - sys.n1 as i32) + 1);
    let eta2 = two.powi(sys.f1 as i32 - sys.n1 as i32 + 1);
    let big_delta_c = delta[14] / dn + dp;
    let big_delta1 = big_delta_c + c(3.0) * kt * tau0 / eta1 + sigma[14];
    let rho1 = r + eps1 / t_min;

    let tick_f = sys.tick;
    let ticks = |x: T| (x / tick_f).ceil().to_f64().unwrap() as u64;
    let unit = 4 * k as u64 * ticks(tau0);
    let need = 4 * ticks(delta[14]);
    let tau_max = need.div_ceil(unit).max(1) * unit;

    Ok(DerivedParams {
        delta,
        delta_i: d_i,
        tau0,
        tau_max,
        k_pls: k,
        alpha,
        alpha_exact,
        eps_b,
        theta,
        sigma,
        t_min,
        t_max,
        big_delta_c,
        eps1,
        rho1,
        big_delta1,
        eta1,
        eta2,
        tick: tick_f,
        iterations,
    })
}

/// One failed constraint row.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub table: u8,
    pub row: u8,
    pub text: &'static str,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let table = if self.table == 1 { "I" } else { "II" };
        write!(f, "table {table} row {}: {} (lhs = {:e}, rhs = {:e})", self.row, self.text, self.lhs, self.rhs)
    }
}

enum Rel {
    Ge,
    Gt,
    Eq,
}

/// Re-checks every constraint row against the stored values.
///
/// Duration rows compare after conversion to ticks: inequalities compare the
/// ceiled tick counts, equalities allow one tick of rounding. Dimensionless
/// rows compare with a relative slack of `1e-9`.
pub fn validate<T>(sys: &SystemParams<T>, d: &DerivedParams<T>) -> Vec<Violation>
where
    T: Float + FromPrimitive,
{
    let f = |x: T| x.to_f64().unwrap();
    let r = f(sys.rho);
    let (e0, e2, dp, dd, d0) = (f(sys.eps0), f(sys.eps2), f(sys.delta_p), f(sys.delta_d), f(sys.delta0));
    let up = 1.0 + r;
    let dn = 1.0 - r;
    let de = |k: usize| f(d.delta[k]);
    let th = |k: usize| f(d.theta[k]);
    let s = |k: usize| f(d.sigma[k]);
    let di = f(d.delta_i);
    let tau0 = f(d.tau0);
    let k = d.k_pls as f64;
    let (tmin, tmax) = (f(d.t_min), f(d.t_max));
    let alpha = f(d.alpha);
    let tick = f(d.tick);
    let eps1 = f(d.eps1);
    let epsb = f(d.eps_b);

    let ticks = |x: f64| (x / tick).ceil();
    let slack = 1.0 / (1.0 - alpha);
    let mut rows: Vec<(u8, u8, &'static str, f64, Rel, f64)> = vec![
        (1, 1, "delta1 >= (theta1 + delta_d)(1 + rho)", de(1), Rel::Ge, (th(1) + dd) * up),
        (1, 2, "delta2 >= theta1 (1 + rho)", de(2), Rel::Ge, th(1) * up),
        (1, 3, "delta3 >= theta3 (1 + rho) + delta1", de(3), Rel::Ge, th(3) * up + de(1)),
        (1, 4, "delta4 >= theta1 (1 + rho) + 2 rho theta4", de(4), Rel::Ge, th(1) * up + 2.0 * r * th(4)),
        (1, 5, "delta5 >= delta_I + 2 rho theta2 + 2 eps0", de(5), Rel::Ge, di + 2.0 * r * th(2) + 2.0 * e0),
        (1, 6, "delta6 >= delta_I + 2 rho theta4 + 4 eps0", de(6), Rel::Ge, di + 2.0 * r * th(4) + 4.0 * e0),
        (
            1,
            7,
            "delta7 >= eps1 + (delta_d + delta11/(1 - rho) + delta_p)(1 + rho) + eps0",
            de(7),
            Rel::Ge,
            eps1 + (dd + de(11) / dn + dp) * up + e0,
        ),
        (1, 8, "delta8 = delta11 (1 - rho)/(1 + rho) - eps0", de(8), Rel::Eq, de(11) * dn / up - e0),
        (1, 9, "delta9 = delta12 + delta17 (1 - rho)/(1 + rho) - eps0", de(9), Rel::Eq, de(12) + de(17) * dn / up - e0),
        (1, 10, "delta10 >= (sigma7 + delta_d)(1 + rho)", de(10), Rel::Ge, (s(7) + dd) * up),
        (1, 11, "delta11 >= delta10 + delta_p", de(11), Rel::Ge, de(10) + dp),
        (1, 12, "delta12 >= delta7 + delta8 + delta11 + 2 delta_p", de(12), Rel::Ge, de(7) + de(8) + de(11) + 2.0 * dp),
        (1, 13, "delta13 >= eps1 + delta_d (1 + rho)", de(13), Rel::Ge, eps1 + dd * up),
        (1, 14, "delta14 >= k_pls (tau0 + 2 delta_I) + delta_p", de(14), Rel::Ge, k * (tau0 + 2.0 * di) + dp),
        (1, 15, "delta15 = k_pls (tau0 - 2 delta_I) - delta_p", de(15), Rel::Eq, k * (tau0 - 2.0 * di) - dp),
        (1, 15, "delta15 >= (3 sigma1 + sigma3)(1 + rho)", de(15), Rel::Ge, (3.0 * s(1) + s(3)) * up),
        (1, 16, "delta16 >= sigma11 + delta_d (1 + rho)", de(16), Rel::Ge, s(11) + dd * up),
        (1, 17, "delta17 >= delta16 + delta_p", de(17), Rel::Ge, de(16) + dp),
        (
            1,
            20,
            "tau0 >= max{delta6 + (theta5 + delta0)(1 + rho), delta12 + delta_I + (sigma12 + delta0)(1 + rho)}",
            tau0,
            Rel::Ge,
            (de(6) + (th(5) + d0) * up).max(de(12) + di + (s(12) + d0) * up),
        ),
        (2, 1, "theta1 = 2 delta_I/(1 - rho) + delta_p", th(1), Rel::Eq, 2.0 * di / dn + dp),
        (2, 2, "theta2 = theta1 + delta2/(1 - rho) + delta_p", th(2), Rel::Eq, th(1) + de(2) / dn + dp),
        (2, 3, "theta3 = theta2 + delta0", th(3), Rel::Eq, th(2) + d0),
        (
            2,
            4,
            "theta4 = (delta3 - delta1 + 2 delta_I)/(1 - rho) + delta_p",
            th(4),
            Rel::Eq,
            (de(3) - de(1) + 2.0 * di) / dn + dp,
        ),
        (2, 5, "theta5 = theta4 + delta4/(1 - rho) + delta_p", th(5), Rel::Eq, th(4) + de(4) / dn + dp),
        (2, 6, "sigma1 = delta10/(1 - rho) + delta_d", s(1), Rel::Eq, de(10) / dn + dd),
        (
            2,
            7,
            "sigma2 = delta15/(1 + rho) - delta_d - delta10/(1 - rho)",
            s(2),
            Rel::Eq,
            de(15) / up - dd - de(10) / dn,
        ),
        (2, 8, "sigma2 >= (k_pls - 1)(tau0 + 2 delta_I)/(1 - rho)", s(2), Rel::Ge, (k - 1.0) * (tau0 + 2.0 * di) / dn),
        (2, 9, "sigma3 = 2 delta_p + delta11/(1 - rho)", s(3), Rel::Eq, 2.0 * dp + de(11) / dn),
        (2, 10, "sigma4 = 2 delta_p + delta17/(1 - rho)", s(4), Rel::Eq, 2.0 * dp + de(17) / dn),
        (2, 11, "sigma5 = sigma7 + delta14/(1 - rho) + delta_p", s(5), Rel::Eq, s(7) + de(14) / dn + dp),
        (
            2,
            12,
            "sigma6 = sigma1 + sigma2 + sigma3 + (tau0 + delta1 + delta_I)(1 + rho) + delta_p",
            s(6),
            Rel::Eq,
            s(1) + s(2) + s(3) + (tau0 + de(1) + di) * up + dp,
        ),
        (2, 13, "sigma7 = delta13/(1 - rho) + delta_d", s(7), Rel::Eq, de(13) / dn + dd),
        (2, 14, "sigma8 = delta11/(1 + rho)", s(8), Rel::Eq, de(11) / up),
        (2, 15, "sigma9 = (sigma3 - sigma8 + delta_p)(1 + rho)", s(9), Rel::Eq, (s(3) - s(8) + dp) * up),
        (2, 16, "sigma10 = delta12 (1 + rho)", s(10), Rel::Eq, de(12) * up),
        (
            2,
            17,
            "sigma11 = (delta7 + sigma9 + 2 rho sigma10)(1 + rho) + delta_p",
            s(11),
            Rel::Eq,
            (de(7) + s(9) + 2.0 * r * s(10)) * up + dp,
        ),
        (
            2,
            18,
            "sigma12 = sigma3 + sigma4 + sigma10 + sigma11 + delta0",
            s(12),
            Rel::Eq,
            s(3) + s(4) + s(10) + s(11) + d0,
        ),
        (2, 19, "sigma13 = 2 delta_I/(1 - rho) + delta_p + sigma6", s(13), Rel::Eq, 2.0 * di / dn + dp + s(6)),
        (2, 20, "sigma14 = sigma6 + (k_pls - 1) T_max", s(14), Rel::Eq, s(6) + (k - 1.0) * tmax),
        (
            2,
            22,
            "eps_b = 11 eps0 + rho (3 theta1 + 2 theta5 + 4 theta4 - 4 theta3 + T_max)",
            epsb,
            Rel::Eq,
            11.0 * e0 + r * (3.0 * th(1) + 2.0 * th(5) + 4.0 * th(4) - 4.0 * th(3) + tmax),
        ),
        (
            2,
            23,
            "delta_I >= max{sigma11 + 2 eps0 + 2 rho tau0, eps2 + 2 rho k_pls T_max}",
            di,
            Rel::Ge,
            (s(11) + 2.0 * e0 + 2.0 * r * tau0).max(e2 + 2.0 * r * k * tmax),
        ),
        (2, 24, "T_min = (tau0 - delta6)/(1 + rho) - delta_p", tmin, Rel::Eq, (tau0 - de(6)) / up - dp),
        (2, 25, "T_max = (tau0 + delta6)/(1 - rho) + delta_p", tmax, Rel::Eq, (tau0 + de(6)) / dn + dp),
        (2, 26, "Delta_C = delta14/(1 - rho) + delta_p", f(d.big_delta_c), Rel::Eq, de(14) / dn + dp),
        (2, 27, "eps1 > 2 eps_b/(1 - alpha)", eps1, Rel::Gt, 2.0 * epsb * slack),
        (
            2,
            28,
            "Delta1 = Delta_C + 3 k_pls tau0/eta1 + sigma14",
            f(d.big_delta1),
            Rel::Eq,
            f(d.big_delta_c) + 3.0 * k * tau0 / f(d.eta1) + s(14),
        ),
    ];
    let mut out: Vec<Violation> = rows
        .drain(..)
        .filter(|(_, _, _, lhs, rel, rhs)| {
            let (a, b) = (ticks(*lhs), ticks(*rhs));
            !match rel {
                Rel::Ge => a >= b,
                Rel::Gt => lhs > rhs,
                Rel::Eq => (a - b).abs() <= 1.0,
            }
        })
        .map(|(table, row, text, lhs, _, rhs)| Violation { table, row, text, lhs, rhs })
        .collect();

    let tau0_ticks = ticks(tau0) as u64;
    let need = 4 * ticks(de(14)) as u64;
    let unit = 4 * d.k_pls as u64 * tau0_ticks;
    if d.tau_max < need || unit == 0 || !d.tau_max.is_multiple_of(unit) {
        out.push(Violation {
            table: 1,
            row: 18,
            text: "tau_max >= 4 delta14 and tau_max mod (4 k_pls tau0) = 0",
            lhs: d.tau_max as f64,
            rhs: need as f64,
        });
    }
    let room = eps1 / 2.0 - epsb * slack;
    let k_need = if room > 0.0 && alpha > 0.0 && alpha < 1.0 {
        let lg = (room / di).ln() / alpha.ln();
        (1.0 + (lg - 1e-9).ceil()).max(3.0)
    } else {
        f64::INFINITY
    };
    if k < k_need {
        out.push(Violation {
            table: 1,
            row: 19,
            text: "k_pls >= max{1 + ceil(log_alpha((eps1/2 - eps_b/(1 - alpha))/delta_I)), 3}",
            lhs: k,
            rhs: k_need,
        });
    }

    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * b.abs().max(f64::MIN_POSITIVE);
    let exact_alpha = compute_alpha(sys.n0, sys.f0).map(|a| *a.numer() as f64 / *a.denom() as f64).unwrap_or(f64::NAN);
    if !close(alpha, exact_alpha) || d.alpha_exact != compute_alpha(sys.n0, sys.f0).unwrap_or(Ratio::new(0, 1)) {
        out.push(Violation {
            table: 2,
            row: 21,
            text: "alpha = 1/(floor((n0 - 2 f0 - 1)/f0) + 1)",
            lhs: alpha,
            rhs: exact_alpha,
        });
    }
    let rho1 = r + eps1 / tmin;
    if !close(f(d.rho1), rho1) {
        out.push(Violation { table: 2, row: 27, text: "rho1 = rho + eps1/T_min", lhs: f(d.rho1), rhs: rho1 });
    }
    out.sort_by_key(|v| (v.table, v.row));
    out
}

/// Named scalar rows in the layout of the published configuration table.
pub fn report_rows<T: Float>(d: &DerivedParams<T>) -> Vec<(String, f64)> {
    let f = |x: T| x.to_f64().unwrap();
    let mut rows: Vec<(String, f64)> = (1..=17).map(|k| (format!("delta{k}"), f(d.delta[k]))).collect();
    rows.push(("delta_I".into(), f(d.delta_i)));
    rows.push(("tau0".into(), f(d.tau0)));
    rows.push(("alpha".into(), f(d.alpha)));
    rows.push(("k_pls".into(), d.k_pls as f64));
    rows.push(("eta1".into(), f(d.eta1)));
    rows.push(("eps1".into(), f(d.eps1)));
    rows.push(("rho1".into(), f(d.rho1)));
    rows.push(("Delta_C".into(), f(d.big_delta_c)));
    rows.push(("Delta1".into(), f(d.big_delta1)));
    rows
}

/// Every scalar, for machine-readable export.
pub fn all_rows<T: Float>(d: &DerivedParams<T>) -> Vec<(String, f64)> {
    let f = |x: T| x.to_f64().unwrap();
    let mut rows = report_rows(d);
    rows.push(("tau_max_ticks".into(), d.tau_max as f64));
    rows.push(("eps_b".into(), f(d.eps_b)));
    for k in 1..=5 {
        rows.push((format!("theta{k}"), f(d.theta[k])));
    }
    for k in 1..=14 {
        rows.push((format!("sigma{k}"), f(d.sigma[k])));
    }
    rows.push(("T_min".into(), f(d.t_min)));
    rows.push(("T_max".into(), f(d.t_max)));
    rows.push(("eta2".into(), f(d.eta2)));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_examples() {
        assert_eq!(compute_alpha(6, 1).unwrap(), Ratio::new(1, 4));
        assert_eq!(compute_alpha(100, 3).unwrap(), Ratio::new(1, 32));
        assert_eq!(compute_alpha(11, 2).unwrap(), Ratio::new(1, 4));
        assert_eq!(compute_alpha(6, 0), Err(ParamsError::DivisionByZero));
    }

    #[test]
    fn presets_are_valid() {
        for case in [Case::I, Case::II] {
            let sys = preset::<f64>(case);
            let d = derive_params(&sys).unwrap();
            assert!(validate(&sys, &d).is_empty(), "{case}: {:?}", validate(&sys, &d));
        }
    }

    // The published configurations for the two fast cases keep only
    // about two rounds inside the separation window, short of k_pls - 1.
    #[test]
    fn fast_presets_break_only_the_separation_window_row() {
        for case in [Case::III, Case::IV] {
            let sys = preset::<f64>(case);
            let d = derive_params(&sys).unwrap();
            let v = validate(&sys, &d);
            assert_eq!(v.len(), 1, "{case}: {v:?}");
            assert_eq!((v[0].table, v[0].row), (2, 8));
        }
    }

    #[test]
    fn halved_delta1_names_row_one() {
        let sys = preset::<f64>(Case::I);
        let mut d = derive_params(&sys).unwrap();
        d.delta[1] *= 0.5;
        let v = validate(&sys, &d);
        assert!(v.iter().any(|v| v.table == 1 && v.row == 1));
    }

    #[test]
    fn small_ring_names_row_eighteen() {
        let sys = preset::<f64>(Case::I);
        let mut d = derive_params(&sys).unwrap();
        d.tau_max = 3 * d.to_ticks(d.delta[14]);
        let v = validate(&sys, &d);
        assert!(v.iter().any(|v| v.table == 1 && v.row == 18));
    }

    #[test]
    fn rejects_bad_inputs() {
        let mut sys = preset::<f64>(Case::I);
        sys.f0 = 0;
        assert!(matches!(derive_params(&sys), Err(ParamsError::InvariantViolation(_))));
        let mut sys = preset::<f64>(Case::I);
        sys.n0 = 5;
        assert!(matches!(derive_params(&sys), Err(ParamsError::InvariantViolation(_))));
        let mut sys = preset::<f64>(Case::I);
        sys.rho = 0.5;
        assert!(matches!(derive_params(&sys), Err(ParamsError::NonConvergence(_))));
    }

    #[test]
    fn eta_identity() {
        for (n1, f1) in [(3usize, 1usize), (5, 2), (7, 3), (4, 1)] {
            let eta1 = 2f64.powi(3 * (f1 as i32 - n1 as i32) + 1);
            assert_eq!(eta1 * 2f64.powi(3 * (n1 - f1) as i32 - 1), 1.0);
        }
    }

    #[test]
    fn f32_matches_f64() {
        for case in Case::ALL {
            let a = derive_params(&preset::<f32>(case)).unwrap();
            let b = derive_params(&preset::<f64>(case)).unwrap();
            assert_eq!(a.k_pls, b.k_pls);
            let rel = ((a.tau0 as f64) - b.tau0).abs() / b.tau0;
            assert!(rel < 1e-4, "{case}: {rel}");
        }
    }

    #[test]
    fn round_sig_examples() {
        assert_eq!(round_sig(0.003305, 2), 0.0033);
        assert_eq!(round_sig(978.39, 4), 978.4);
    }
}

//! Continuous-time position rules and their closed-form values.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::market::map_positions_to_original;

/// Order `a` of a power mean, extended by `±∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerOrder {
    Finite(f64),
    PlusInfinity,
    MinusInfinity,
}

impl PowerOrder {
    fn rank(&self) -> (i8, f64) {
        match *self {
            PowerOrder::MinusInfinity => (-1, 0.0),
            PowerOrder::Finite(a) => (0, a),
            PowerOrder::PlusInfinity => (1, 0.0),
        }
    }
}

impl From<f64> for PowerOrder {
    fn from(a: f64) -> Self {
        if a == f64::INFINITY {
            PowerOrder::PlusInfinity
        } else if a == f64::NEG_INFINITY {
            PowerOrder::MinusInfinity
        } else {
            PowerOrder::Finite(a)
        }
    }
}

impl PartialOrd for PowerOrder {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        let (ra, a) = self.rank();
        let (rb, b) = other.rank();
        match ra.cmp(&rb) {
            Ordering::Equal => a.partial_cmp(&b),
            o => Some(o),
        }
    }
}

impl fmt::Display for PowerOrder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PowerOrder::Finite(a) => write!(f, "{a}"),
            PowerOrder::PlusInfinity => f.write_str("inf"),
            PowerOrder::MinusInfinity => f.write_str("-inf"),
        }
    }
}

impl FromStr for PowerOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "inf" | "+inf" | "infinity" | "+infinity" => Ok(PowerOrder::PlusInfinity),
            "-inf" | "-infinity" => Ok(PowerOrder::MinusInfinity),
            other => other
                .parse::<f64>()
                .ok()
                .filter(|a| a.is_finite())
                .map(PowerOrder::Finite)
                .ok_or_else(|| Error::domain(format!("invalid power order \"{other}\""))),
        }
    }
}

// Finite orders serialize as numbers, infinite ones as "inf" / "-inf".
impl Serialize for PowerOrder {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            PowerOrder::Finite(a) => serializer.serialize_f64(*a),
            other => serializer.serialize_str(&other.to_string()),
        }
    }
}

impl<'de> Deserialize<'de> for PowerOrder {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Int(i64),
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(deserializer)? {
            Raw::Int(a) => Ok(PowerOrder::Finite(a as f64)),
            Raw::Num(a) => Ok(PowerOrder::from(a)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

fn check_prices(x: &[f64]) -> Result<()> {
    if x.is_empty() {
        return Err(Error::domain("power mean of an empty vector"));
    }
    if let Some(bad) = x.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
        return Err(Error::domain(format!("prices must be positive, got {bad}")));
    }
    Ok(())
}

fn max_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn min_of(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Power mean `M_a(x)` of positive entries.
///
/// Finite orders are evaluated in log space around the max (`a > 0`) or min
/// (`a < 0`) element:
/// `ln M = ln x* + ln(1 + mean(expm1(a ln(x/x*)))) / a`,
/// so large `|a|` cannot overflow and tiny `|a|` tends to the geometric mean.
pub fn power_mean(x: &[f64], a: PowerOrder) -> Result<f64> {
    check_prices(x)?;
    Ok(power_mean_unchecked(x, a))
}

fn power_mean_unchecked(x: &[f64], a: PowerOrder) -> f64 {
    let d = x.len() as f64;
    match a {
        PowerOrder::PlusInfinity => max_of(x),
        PowerOrder::MinusInfinity => min_of(x),
        PowerOrder::Finite(a) if a == 0.0 => (x.iter().map(|v| v.ln()).sum::<f64>() / d).exp(),
        PowerOrder::Finite(a) => {
            let pivot = if a > 0.0 { max_of(x) } else { min_of(x) };
            let mean_excess = x.iter().map(|v| (a * (v / pivot).ln()).exp_m1()).sum::<f64>() / d;
            pivot * (mean_excess.ln_1p() / a).exp()
        }
    }
}

/// Shares of the `a`-portfolio, whose value is `M_a(S)`.
pub fn salopek_hat_positions(s_t: &[f64], a: PowerOrder) -> Result<Vec<f64>> {
    if s_t.len() < 2 {
        return Err(Error::domain(format!(
            "Salopek portfolios need at least two risky assets, got {}",
            s_t.len()
        )));
    }
    check_prices(s_t)?;
    Ok(hat_positions_with_mean(s_t, a, power_mean_unchecked(s_t, a)))
}

fn hat_positions_with_mean(s_t: &[f64], a: PowerOrder, mean: f64) -> Vec<f64> {
    let d = s_t.len() as f64;
    let extreme = |target: f64| {
        let m = s_t.iter().filter(|&&v| v == target).count() as f64;
        s_t.iter()
            .map(|&v| if v == target { 1.0 / m } else { 0.0 })
            .collect()
    };
    match a {
        PowerOrder::PlusInfinity => extreme(mean),
        PowerOrder::MinusInfinity => extreme(mean),
        PowerOrder::Finite(order) => s_t
            .iter()
            .map(|&v| (v / mean).powf(order - 1.0) / d)
            .collect(),
    }
}

fn check_orders(alpha: PowerOrder, beta: PowerOrder) -> Result<()> {
    if alpha < beta {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "Salopek orders need alpha < beta, got ({alpha}, {beta})"
        )))
    }
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma.is_finite() {
        Ok(())
    } else {
        Err(Error::domain(format!("gamma must be positive, got {gamma}")))
    }
}

/// Long `γ` β-portfolios, short `γ` α-portfolios.
pub fn salopek_positions(
    s_t: &[f64],
    alpha: PowerOrder,
    beta: PowerOrder,
    gamma: f64,
) -> Result<Vec<f64>> {
    check_orders(alpha, beta)?;
    check_gamma(gamma)?;
    let long = salopek_hat_positions(s_t, beta)?;
    let short = salopek_hat_positions(s_t, alpha)?;
    Ok(long
        .iter()
        .zip(&short)
        .map(|(l, s)| gamma * (l - s))
        .collect())
}

/// `γ (M_β(S) − M_α(S))`.
pub fn salopek_value_continuous(
    s_t: &[f64],
    alpha: PowerOrder,
    beta: PowerOrder,
    gamma: f64,
) -> Result<f64> {
    check_orders(alpha, beta)?;
    check_gamma(gamma)?;
    Ok(gamma * (power_mean(s_t, beta)? - power_mean(s_t, alpha)?))
}

/// Risk-free and risky holdings `(Ψ⁰, Ψ¹)` of the single-asset rule.
pub fn shiryaev_positions(s0: f64, s_t: f64, gamma: f64) -> (f64, f64) {
    let psi0 = gamma * (s0 * s0 - s_t * s_t) / s0;
    let psi1 = 2.0 * gamma * (s_t - s0) / s0;
    (psi0, psi1)
}

/// `γ (S_t − s0)² / s0`.
pub fn shiryaev_value_continuous(s0: f64, s_t: f64, gamma: f64) -> f64 {
    let gap = s_t - s0;
    gamma * gap * gap / s0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "lowercase")]
pub enum StrategySpec {
    Shiryaev {
        gamma: f64,
    },
    Salopek {
        alpha: PowerOrder,
        beta: PowerOrder,
        gamma: f64,
    },
}

impl StrategySpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StrategySpec::Shiryaev { gamma } => check_gamma(gamma),
            StrategySpec::Salopek { alpha, beta, gamma } => {
                check_orders(alpha, beta)?;
                check_gamma(gamma)
            }
        }
    }

    pub fn gamma(&self) -> f64 {
        match *self {
            StrategySpec::Shiryaev { gamma } | StrategySpec::Salopek { gamma, .. } => gamma,
        }
    }

    pub fn with_gamma(self, gamma: f64) -> Self {
        match self {
            StrategySpec::Shiryaev { .. } => StrategySpec::Shiryaev { gamma },
            StrategySpec::Salopek { alpha, beta, .. } => StrategySpec::Salopek { alpha, beta, gamma },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StrategySpec::Shiryaev { .. } => "shiryaev",
            StrategySpec::Salopek { .. } => "salopek",
        }
    }

    /// Default number of risky assets for the strategy.
    pub fn default_assets(&self) -> usize {
        match self {
            StrategySpec::Shiryaev { .. } => 1,
            StrategySpec::Salopek { .. } => 2,
        }
    }

    pub fn check_dimension(&self, d: usize) -> Result<()> {
        match self {
            StrategySpec::Shiryaev { .. } if d != 1 => Err(Error::domain(format!(
                "Shiryaev trades exactly one risky asset, market has {d}"
            ))),
            StrategySpec::Salopek { .. } if d < 2 => Err(Error::domain(format!(
                "Salopek needs at least two risky assets, market has {d}"
            ))),
            _ => Ok(()),
        }
    }

    /// Holdings `(Ψ⁰, Ψ¹, …, Ψᵈ)` at prices `current`, for a market that
    /// started at `initial`.
    ///
    /// Salopek positions are computed in the market rescaled to the common
    /// start `initial[0]` and mapped back; with equal starts the rescaling is
    /// the identity.
    pub fn positions(&self, initial: &[f64], current: &[f64]) -> Result<Vec<f64>> {
        self.check_dimension(current.len())?;
        match *self {
            StrategySpec::Shiryaev { gamma } => {
                let (psi0, psi1) = shiryaev_positions(initial[0], current[0], gamma);
                Ok(vec![psi0, psi1])
            }
            StrategySpec::Salopek { alpha, beta, gamma } => {
                let factors = common_start_factors(initial);
                let rescaled: Vec<f64> = current.iter().zip(&factors).map(|(s, c)| s * c).collect();
                let shares = salopek_positions(&rescaled, alpha, beta, gamma)?;
                let mut out = Vec::with_capacity(current.len() + 1);
                out.push(0.0);
                out.extend(map_positions_to_original(&shares, &factors)?);
                Ok(out)
            }
        }
    }

    /// Holdings and closed-form value together, sharing the power means.
    pub fn positions_and_value(&self, initial: &[f64], current: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check_dimension(current.len())?;
        match *self {
            StrategySpec::Shiryaev { gamma } => {
                let (psi0, psi1) = shiryaev_positions(initial[0], current[0], gamma);
                Ok((vec![psi0, psi1], shiryaev_value_continuous(initial[0], current[0], gamma)))
            }
            StrategySpec::Salopek { alpha, beta, gamma } => {
                check_orders(alpha, beta)?;
                check_gamma(gamma)?;
                let factors = common_start_factors(initial);
                let rescaled: Vec<f64> = current.iter().zip(&factors).map(|(s, c)| s * c).collect();
                check_prices(&rescaled)?;
                let m_beta = power_mean_unchecked(&rescaled, beta);
                let m_alpha = power_mean_unchecked(&rescaled, alpha);
                let long = hat_positions_with_mean(&rescaled, beta, m_beta);
                let short = hat_positions_with_mean(&rescaled, alpha, m_alpha);
                let mut out = Vec::with_capacity(current.len() + 1);
                out.push(0.0);
                out.extend(long.iter().zip(&short).zip(&factors).map(|((l, s), c)| gamma * (l - s) * c));
                Ok((out, gamma * (m_beta - m_alpha)))
            }
        }
    }

    /// Closed-form continuous-time value at prices `current`.
    pub fn continuous_value(&self, initial: &[f64], current: &[f64]) -> Result<f64> {
        self.check_dimension(current.len())?;
        match *self {
            StrategySpec::Shiryaev { gamma } => {
                Ok(shiryaev_value_continuous(initial[0], current[0], gamma))
            }
            StrategySpec::Salopek { alpha, beta, gamma } => {
                let factors = common_start_factors(initial);
                let rescaled: Vec<f64> = current.iter().zip(&factors).map(|(s, c)| s * c).collect();
                salopek_value_continuous(&rescaled, alpha, beta, gamma)
            }
        }
    }
}

fn common_start_factors(initial: &[f64]) -> Vec<f64> {
    let target = initial[0];
    initial.iter().map(|s| if *s == target { 1.0 } else { target / s }).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use PowerOrder::*;

    fn rel_close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn joint_evaluation_matches_separate_calls() {
        let specs = [
            StrategySpec::Shiryaev { gamma: 3.0 },
            StrategySpec::Salopek { alpha: Finite(-30.0), beta: Finite(30.0), gamma: 100.0 },
            StrategySpec::Salopek { alpha: MinusInfinity, beta: Finite(0.0), gamma: 2.0 },
            StrategySpec::Salopek { alpha: Finite(-1.0), beta: PlusInfinity, gamma: 2.0 },
        ];
        for spec in specs {
            let (initial, current): (Vec<f64>, Vec<f64>) = if spec.default_assets() == 1 {
                (vec![100.0], vec![107.0])
            } else {
                (vec![100.0, 80.0], vec![93.0, 88.0])
            };
            let (pos, value) = spec.positions_and_value(&initial, &current).unwrap();
            let sep = spec.positions(&initial, &current).unwrap();
            for (a, b) in pos.iter().zip(&sep) {
                assert!(rel_close(*a, *b, 1e-14) || (a - b).abs() < 1e-12, "{spec:?}: {a} vs {b}");
            }
            assert!(rel_close(value, spec.continuous_value(&initial, &current).unwrap(), 1e-14));
        }
    }

    #[test]
    fn power_mean_examples() {
        assert!(rel_close(power_mean(&[2.0, 4.0], Finite(1.0)).unwrap(), 3.0, 1e-15));
        assert!(rel_close(power_mean(&[1.0, 4.0], Finite(0.0)).unwrap(), 2.0, 1e-15));
        assert_eq!(power_mean(&[3.0, 7.0], MinusInfinity).unwrap(), 3.0);
        assert_eq!(power_mean(&[3.0, 7.0], PlusInfinity).unwrap(), 7.0);
        assert!(rel_close(
            power_mean(&[100.0, 200.0], Finite(-1.0)).unwrap(),
            133.333_333_333_333_33,
            1e-14
        ));
        assert!(rel_close(
            power_mean(&[100.0, 200.0], Finite(2.0)).unwrap(),
            158.113_883_008_418_97,
            1e-14
        ));
    }

    #[test]
    fn power_mean_rejects_nonpositive() {
        assert!(power_mean(&[1.0, 0.0], Finite(1.0)).is_err());
        assert!(power_mean(&[1.0, -2.0], PlusInfinity).is_err());
        assert!(power_mean(&[], Finite(1.0)).is_err());
    }

    #[test]
    fn power_mean_survives_extreme_orders() {
        let x = [1e-200, 1e200, 3.0];
        for a in [-300.0, -30.0, 30.0, 300.0] {
            let m = power_mean(&x, Finite(a)).unwrap();
            assert!(m.is_finite() && m >= 1e-200 && m <= 1e200, "a={a} m={m}");
        }
        // tiny orders approach the geometric mean
        let geo = power_mean(&[2.0, 8.0], Finite(0.0)).unwrap();
        let tiny = power_mean(&[2.0, 8.0], Finite(1e-300)).unwrap();
        assert!(rel_close(geo, tiny, 1e-14));
    }

    #[test]
    fn power_order_parsing_and_ordering() {
        assert_eq!("inf".parse::<PowerOrder>().unwrap(), PlusInfinity);
        assert_eq!("-inf".parse::<PowerOrder>().unwrap(), MinusInfinity);
        assert_eq!("-30".parse::<PowerOrder>().unwrap(), Finite(-30.0));
        assert!("abc".parse::<PowerOrder>().is_err());
        assert!(MinusInfinity < Finite(-1e300));
        assert!(Finite(1e300) < PlusInfinity);
        assert!(MinusInfinity < PlusInfinity);
        assert!(!(Finite(2.0) < Finite(2.0)));
        assert_eq!(PowerOrder::from(f64::NEG_INFINITY), MinusInfinity);
    }

    #[test]
    fn power_order_serde() {
        #[derive(Serialize, Deserialize)]
        struct W {
            a: PowerOrder,
            b: PowerOrder,
            c: PowerOrder,
        }
        let w: W = toml::from_str("a = -30\nb = \"inf\"\nc = 2.5").unwrap();
        assert_eq!((w.a, w.b, w.c), (Finite(-30.0), PlusInfinity, Finite(2.5)));
        let back = serde_json::to_string(&W { a: MinusInfinity, b: Finite(3.0), c: PlusInfinity }).unwrap();
        assert_eq!(back, r#"{"a":"-inf","b":3.0,"c":"inf"}"#);
    }

    #[test]
    fn shiryaev_examples() {
        assert_eq!(shiryaev_positions(100.0, 100.0, 1.0), (0.0, 0.0));
        let (p0, p1) = shiryaev_positions(100.0, 110.0, 1.0);
        assert!(rel_close(p0, -21.0, 1e-14) && rel_close(p1, 0.2, 1e-14));
        let (p0, p1) = shiryaev_positions(100.0, 110.0, 100.0);
        assert!(rel_close(p0, -2100.0, 1e-14) && rel_close(p1, 20.0, 1e-14));
        let (p0, p1) = shiryaev_positions(100.0, 90.0, 1.0);
        assert!(p1 < 0.0 && p0 > 0.0);

        assert_eq!(shiryaev_value_continuous(100.0, 100.0, 1.0), 0.0);
        assert!(rel_close(shiryaev_value_continuous(100.0, 110.0, 1.0), 1.0, 1e-14));
        assert!(rel_close(shiryaev_value_continuous(100.0, 90.0, 100.0), 100.0, 1e-14));
    }

    #[test]
    fn hat_position_examples() {
        for a in [-7.0, 0.0, 0.5, 3.0] {
            let h = salopek_hat_positions(&[42.0, 42.0, 42.0], Finite(a)).unwrap();
            assert!(h.iter().all(|v| rel_close(*v, 1.0 / 3.0, 1e-14)));
        }
        let h = salopek_hat_positions(&[10.0, 300.0, 7.0], Finite(1.0)).unwrap();
        assert!(h.iter().all(|v| rel_close(*v, 1.0 / 3.0, 1e-15)));
        let h = salopek_hat_positions(&[100.0, 200.0], Finite(-1.0)).unwrap();
        assert!(rel_close(h[0], 0.888_888_888_888_888_9, 1e-14));
        assert!(rel_close(h[1], 0.222_222_222_222_222_2, 1e-14));

        assert_eq!(salopek_hat_positions(&[5.0, 9.0, 9.0], PlusInfinity).unwrap(), vec![0.0, 0.5, 0.5]);
        assert_eq!(salopek_hat_positions(&[5.0, 9.0, 9.0], MinusInfinity).unwrap(), vec![1.0, 0.0, 0.0]);
        assert!(salopek_hat_positions(&[5.0], Finite(2.0)).is_err());
    }

    #[test]
    fn salopek_examples() {
        let z = salopek_positions(&[100.0, 100.0], Finite(-30.0), Finite(30.0), 100.0).unwrap();
        assert!(z.iter().all(|v| v.abs() < 1e-12));
        let z = salopek_positions(&[100.0, 100.0], MinusInfinity, PlusInfinity, 100.0).unwrap();
        assert_eq!(z, vec![0.0, 0.0]);

        let p = salopek_positions(&[110.0, 90.0], MinusInfinity, PlusInfinity, 1.0).unwrap();
        assert_eq!(p, vec![1.0, -1.0]);

        let p = salopek_positions(&[100.0, 200.0], Finite(-1.0), Finite(2.0), 1.0).unwrap();
        assert!(rel_close(p[0], -0.572_661_122_872_051, 1e-13));
        assert!(rel_close(p[1], 0.410_233_309_811_453_6, 1e-13));

        assert!(salopek_positions(&[1.0, 2.0], Finite(2.0), Finite(2.0), 1.0).is_err());
        assert!(salopek_positions(&[1.0, 2.0], PlusInfinity, Finite(2.0), 1.0).is_err());
        assert!(salopek_positions(&[1.0, 2.0], Finite(1.0), Finite(2.0), 0.0).is_err());

        assert_eq!(salopek_value_continuous(&[50.0, 50.0], Finite(-3.0), Finite(4.0), 1.0).unwrap(), 0.0);
        assert_eq!(
            salopek_value_continuous(&[110.0, 90.0], MinusInfinity, PlusInfinity, 1.0).unwrap(),
            20.0
        );
        assert!(rel_close(
            salopek_value_continuous(&[100.0, 200.0], Finite(-1.0), Finite(2.0), 1.0).unwrap(),
            24.780_549_675_085_633,
            1e-13
        ));
        assert!(salopek_value_continuous(&[1.0, 2.0], Finite(3.0), Finite(2.0), 1.0).is_err());
    }

    #[test]
    fn spec_dispatch() {
        let sh = StrategySpec::Shiryaev { gamma: 1.0 };
        assert_eq!(sh.positions(&[100.0], &[110.0]).unwrap().len(), 2);
        assert!(sh.positions(&[100.0, 100.0], &[110.0, 90.0]).is_err());
        let sa = StrategySpec::Salopek { alpha: MinusInfinity, beta: PlusInfinity, gamma: 2.0 };
        assert!(sa.positions(&[100.0], &[110.0]).is_err());
        assert_eq!(sa.positions(&[100.0, 100.0], &[110.0, 90.0]).unwrap(), vec![0.0, 2.0, -2.0]);
        assert_eq!(sa.continuous_value(&[100.0, 100.0], &[110.0, 90.0]).unwrap(), 40.0);
        assert!(StrategySpec::Salopek { alpha: Finite(1.0), beta: Finite(1.0), gamma: 1.0 }
            .validate()
            .is_err());
    }

    #[test]
    fn unequal_starts_use_rescaled_market() {
        let spec = StrategySpec::Salopek { alpha: Finite(-30.0), beta: Finite(30.0), gamma: 100.0 };
        let initial = [100.0, 200.0];
        // zero positions at the (rescaled) start
        let p = spec.positions(&initial, &initial).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-10));
        let current = [120.0, 170.0];
        let p = spec.positions(&initial, &current).unwrap();
        let dot: f64 = p[1..].iter().zip(&current).map(|(a, b)| a * b).sum();
        let v = spec.continuous_value(&initial, &current).unwrap();
        assert!(rel_close(dot, v, 1e-12));
        assert_eq!(spec.continuous_value(&initial, &initial).unwrap(), 0.0);
    }

    fn finite_order() -> impl Strategy<Value = f64> {
        prop_oneof![-40.0f64..40.0, Just(0.0), Just(1.0)]
    }

    fn prices(d: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(1.0f64..500.0, d)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2000))]

        #[test]
        fn power_mean_is_monotone(x in prices(4), a in finite_order(), b in finite_order()) {
            let (a, b) = if a <= b { (a, b) } else { (b, a) };
            let ma = power_mean(&x, Finite(a)).unwrap();
            let mb = power_mean(&x, Finite(b)).unwrap();
            let lo = min_of(&x);
            let hi = max_of(&x);
            let tol = 1e-12 * hi;
            prop_assert!(lo <= ma + tol && ma <= mb + tol && mb <= hi + tol);
        }

        #[test]
        fn power_mean_is_homogeneous(x in prices(3), a in finite_order(), c in 0.01f64..100.0) {
            let scaled: Vec<f64> = x.iter().map(|v| c * v).collect();
            let lhs = power_mean(&scaled, Finite(a)).unwrap();
            let rhs = c * power_mean(&x, Finite(a)).unwrap();
            prop_assert!(rel_close(lhs, rhs, 1e-12));
        }

        #[test]
        fn shiryaev_value_identity(s0 in 1.0f64..500.0, growth in 0.3f64..3.0, gamma in 0.01f64..1e3) {
            let s_t = s0 * growth;
            let (p0, p1) = shiryaev_positions(s0, s_t, gamma);
            let v = shiryaev_value_continuous(s0, s_t, gamma);
            prop_assert!(v >= 0.0);
            // dot product cancels s0·γ; compare on the position scale
            prop_assert!((p0 + p1 * s_t - v).abs() <= 1e-12 * (p0.abs() + (p1 * s_t).abs()));
        }

        #[test]
        fn hat_value_identity(x in prices(3), a in prop_oneof![finite_order().prop_map(Finite), Just(PlusInfinity), Just(MinusInfinity)]) {
            let h = salopek_hat_positions(&x, a).unwrap();
            prop_assert!(h.iter().all(|v| *v >= 0.0));
            let dot: f64 = h.iter().zip(&x).map(|(p, s)| p * s).sum();
            prop_assert!(rel_close(dot, power_mean(&x, a).unwrap(), 1e-12));
        }

        #[test]
        fn salopek_value_identity(x in prices(2), a in finite_order(), width in 0.5f64..30.0, gamma in 0.1f64..200.0) {
            let (alpha, beta) = (Finite(a), Finite(a + width));
            let p = salopek_positions(&x, alpha, beta, gamma).unwrap();
            let v = salopek_value_continuous(&x, alpha, beta, gamma).unwrap();
            prop_assert!(v >= 0.0);
            let dot: f64 = p.iter().zip(&x).map(|(p, s)| p * s).sum();
            // each leg is accurate relative to its own value M_a
            let legs = gamma * (power_mean(&x, alpha).unwrap() + power_mean(&x, beta).unwrap());
            prop_assert!((dot - v).abs() <= 1e-12 * legs);
        }

        #[test]
        fn gamma_scaling_is_linear(x in prices(2), c in 0.1f64..50.0) {
            let base = salopek_positions(&x, Finite(-5.0), Finite(7.0), 1.0).unwrap();
            let scaled = salopek_positions(&x, Finite(-5.0), Finite(7.0), c).unwrap();
            for (b, s) in base.iter().zip(&scaled) {
                prop_assert!((c * b - s).abs() <= 1e-12 * s.abs().max(1e-300) + 1e-300);
            }
            let v1 = shiryaev_value_continuous(x[0], x[1], 1.0);
            prop_assert!(rel_close(c * v1, shiryaev_value_continuous(x[0], x[1], c), 1e-12) || v1 == 0.0);
        }
    }

    #[test]
    fn limit_consistency() {
        let x = [60.0, 100.0, 150.0];
        let spread = 90.0;
        let mut prev_hi = f64::INFINITY;
        let mut prev_lo = f64::INFINITY;
        for a in [10.0, 20.0, 50.0] {
            let hi = (power_mean(&x, PlusInfinity).unwrap() - power_mean(&x, Finite(a)).unwrap()).abs();
            let lo = (power_mean(&x, Finite(-a)).unwrap() - power_mean(&x, MinusInfinity).unwrap()).abs();
            assert!(hi < prev_hi && lo < prev_lo);
            prev_hi = hi;
            prev_lo = lo;
        }
        assert!(prev_hi <= 0.05 * spread && prev_lo <= 0.05 * spread);
    }
}

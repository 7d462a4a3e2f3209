//! Serializable catalog of scalar functions on `[0, ∞)`, used by the
//! Gneiting class and by the monotonicity probes.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "fn", rename_all = "snake_case", deny_unknown_fields)]
pub enum Func1 {
    /// `e^{-c t}`
    ExpDecay { c: f64 },
    /// `(1 + c t)^{-tau}`
    PowerDecay { c: f64, tau: f64 },
    /// `a + b t^beta`
    Power { a: f64, b: f64, beta: f64 },
    /// `a + b t`
    Affine { a: f64, b: f64 },
    /// `(1 + a t)^beta`
    OnePlusPower { a: f64, beta: f64 },
    /// `ln(1 + t)`
    Log1p,
    /// `ln(e + t)`
    LogEPlus,
    /// `sech(t)^r`
    SechPower { r: f64 },
    /// `sin(omega t)`
    Sine { omega: f64 },
    /// Piecewise-linear interpolation through `(xs[i], ys[i])`, constant
    /// beyond the end points.
    Table { xs: Vec<f64>, ys: Vec<f64> },
}

impl Func1 {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Func1::ExpDecay { c } => (-c * t).exp(),
            Func1::PowerDecay { c, tau } => (1.0 + c * t).powf(-tau),
            Func1::Power { a, b, beta } => a + b * t.powf(*beta),
            Func1::Affine { a, b } => a + b * t,
            Func1::OnePlusPower { a, beta } => (1.0 + a * t).powf(*beta),
            Func1::Log1p => t.ln_1p(),
            Func1::LogEPlus => (std::f64::consts::E + t).ln(),
            Func1::SechPower { r } => t.cosh().powf(-r),
            Func1::Sine { omega } => (omega * t).sin(),
            Func1::Table { xs, ys } => table_lookup(xs, ys, t),
        }
    }

    /// Evaluates and rejects non-finite values.
    pub fn eval_checked(&self, t: f64) -> Result<f64> {
        let v = self.eval(t);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::Numerical {
                message: format!("function value {v} at t = {t}"),
                partial: v,
            })
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |name: &str, v: f64| {
            if v.is_finite() {
                Ok(())
            } else {
                Err(Error::Parameter(format!("{name} must be finite")))
            }
        };
        match self {
            Func1::ExpDecay { c } => finite("c", *c),
            Func1::PowerDecay { c, tau } => {
                finite("c", *c)?;
                finite("tau", *tau)?;
                if *c < 0.0 {
                    return Err(Error::Parameter("power_decay needs c >= 0".into()));
                }
                Ok(())
            }
            Func1::Power { a, b, beta } => {
                finite("a", *a)?;
                finite("b", *b)?;
                finite("beta", *beta)
            }
            Func1::Affine { a, b } => {
                finite("a", *a)?;
                finite("b", *b)
            }
            Func1::OnePlusPower { a, beta } => {
                finite("a", *a)?;
                finite("beta", *beta)?;
                if *a < 0.0 {
                    return Err(Error::Parameter("one_plus_power needs a >= 0".into()));
                }
                Ok(())
            }
            Func1::SechPower { r } => finite("r", *r),
            Func1::Sine { omega } => finite("omega", *omega),
            Func1::Log1p | Func1::LogEPlus => Ok(()),
            Func1::Table { xs, ys } => {
                if xs.is_empty() || xs.len() != ys.len() {
                    return Err(Error::Parameter(
                        "table needs equally many, and at least one, xs and ys".into(),
                    ));
                }
                if xs.windows(2).any(|w| !(w[0] < w[1])) {
                    return Err(Error::Parameter("table xs must be strictly increasing".into()));
                }
                if xs.iter().chain(ys).any(|v| !v.is_finite()) {
                    return Err(Error::Parameter("table entries must be finite".into()));
                }
                Ok(())
            }
        }
    }
}

fn table_lookup(xs: &[f64], ys: &[f64], t: f64) -> f64 {
    if t <= xs[0] {
        return ys[0];
    }
    let last = xs.len() - 1;
    if t >= xs[last] {
        return ys[last];
    }
    let k = xs.partition_point(|&x| x <= t);
    let (x0, x1) = (xs[k - 1], xs[k]);
    let w = (t - x0) / (x1 - x0);
    ys[k - 1] * (1.0 - w) + ys[k] * w
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn catalog_values() {
        assert_eq!(Func1::ExpDecay { c: 2.0 }.eval(0.0), 1.0);
        assert!((Func1::PowerDecay { c: 1.0, tau: 1.0 }.eval(1.0) - 0.5).abs() < 1e-15);
        assert_eq!(Func1::Power { a: 1.0, b: 1.0, beta: 0.5 }.eval(4.0), 3.0);
        assert_eq!(Func1::Affine { a: 1.0, b: 2.0 }.eval(3.0), 7.0);
        assert!((Func1::LogEPlus.eval(0.0) - 1.0).abs() < 1e-15);
        assert!((Func1::SechPower { r: 2.0 }.eval(1.0) - 1.0f64.cosh().powi(-2)).abs() < 1e-15);
        let tab = Func1::Table { xs: vec![0.0, 1.0, 3.0], ys: vec![1.0, 3.0, 0.0] };
        assert_eq!(tab.eval(0.5), 2.0);
        assert_eq!(tab.eval(2.0), 1.5);
        assert_eq!(tab.eval(9.0), 0.0);
    }

    #[test]
    fn json_shape() {
        let f: Func1 = serde_json::from_str(r#"{"fn":"power_decay","c":1.0,"tau":0.5}"#).unwrap();
        assert_eq!(f, Func1::PowerDecay { c: 1.0, tau: 0.5 });
        let g: Func1 = serde_json::from_str(r#"{"fn":"log_e_plus"}"#).unwrap();
        assert_eq!(g, Func1::LogEPlus);
        assert!(serde_json::from_str::<Func1>(r#"{"fn":"exp_decay","c":1.0,"extra":2}"#).is_err());
    }

    #[test]
    fn table_validation() {
        assert!(Func1::Table { xs: vec![1.0, 0.0], ys: vec![0.0, 0.0] }.validate().is_err());
        assert!(Func1::Table { xs: vec![], ys: vec![] }.validate().is_err());
    }
}

//! VIX from simulated states, European option prices and Black-76 implied
//! volatilities.

use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{domain, Error, Result};
use crate::model::Model;
use crate::numerics::{precompute_step, DriftMatrix, StepPrecompute};
use crate::sim::PathState;

/// Default VIX window: one month.
pub const ONE_MONTH: f64 = 1.0 / 12.0;

#[derive(Debug, Clone, PartialEq)]
pub struct VixSpec {
    pub maturity: f64,
    pub horizon: f64,
    pub strikes: Vec<f64>,
}

impl VixSpec {
    pub fn new(maturity: f64, horizon: f64, strikes: Vec<f64>) -> Result<Self> {
        if !(horizon > 0.0) {
            return domain(format!("VIX horizon must be positive, got {horizon}"));
        }
        if strikes.iter().any(|k| !(*k > 0.0)) {
            return domain("strikes must be positive");
        }
        Ok(Self {
            maturity,
            horizon,
            strikes,
        })
    }
}

/// `VIX_T = sqrt(E[X_{T, T+Theta} | U_T] / Theta)`, analytic in the state at `T`.
#[derive(Debug, Clone)]
pub struct VixEvaluator {
    pub maturity: f64,
    pub horizon: f64,
    window: StepPrecompute,
}

impl VixEvaluator {
    pub fn new(model: &Model, maturity: f64, horizon: f64) -> Result<Self> {
        if !(horizon > 0.0) {
            return domain(format!("VIX horizon must be positive, got {horizon}"));
        }
        if maturity < model.params.t0 {
            return domain("VIX maturity precedes t0");
        }
        let drift = DriftMatrix::new(&model.params);
        let window = precompute_step(model, &drift, maturity, maturity + horizon)?;
        Ok(Self {
            maturity,
            horizon,
            window,
        })
    }

    /// `E[X_{T, T+Theta} | U_T = u]`, possibly negative for states with negative variance.
    pub fn conditional_integrated_variance(&self, state: &PathState) -> f64 {
        self.window.conditional_mean(&state.u)
    }

    /// VIX level and whether a negative conditional mean was clamped to zero.
    pub fn evaluate(&self, state: &PathState) -> (f64, bool) {
        let m = self.conditional_integrated_variance(state);
        if m < 0.0 {
            (0.0, true)
        } else {
            ((m / self.horizon).sqrt(), false)
        }
    }
}

/// VIX for a single state; builds the window precompute each call.
pub fn vix_from_state(state: &PathState, model: &Model, maturity: f64, horizon: f64) -> Result<f64> {
    Ok(VixEvaluator::new(model, maturity, horizon)?.evaluate(state).0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn payoff(self, underlying: f64, strike: f64) -> f64 {
        match self {
            OptionKind::Call => (underlying - strike).max(0.0),
            OptionKind::Put => (strike - underlying).max(0.0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OptionKind::Call => "call",
            OptionKind::Put => "put",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PriceQuote {
    pub price: f64,
    pub std_err: f64,
    pub implied_vol: Option<f64>,
    /// Delta-method standard error of the implied vol, `std_err / vega`.
    pub implied_vol_se: Option<f64>,
    pub n_paths: usize,
}

/// Discounted Monte Carlo price with standard error `sd / sqrt(n)`.
pub fn price_european(samples: &[f64], strike: f64, maturity: f64, rate: f64, kind: OptionKind) -> Result<PriceQuote> {
    if samples.is_empty() {
        return domain("no samples to price");
    }
    let n = samples.len() as f64;
    let df = (-rate * maturity).exp();
    let payoffs: Vec<f64> = samples.iter().map(|&s| df * kind.payoff(s, strike)).collect();
    let mean = payoffs.iter().sum::<f64>() / n;
    let var = if samples.len() > 1 {
        payoffs.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    Ok(PriceQuote {
        price: mean,
        std_err: (var / n).sqrt(),
        implied_vol: None,
        implied_vol_se: None,
        n_paths: samples.len(),
    })
}

/// Black-76 price of an option on a forward.
pub fn black76_price(forward: f64, strike: f64, maturity: f64, rate: f64, vol: f64, kind: OptionKind) -> f64 {
    let df = (-rate * maturity).exp();
    let sd = vol * maturity.sqrt();
    if sd <= 0.0 {
        return df * kind.payoff(forward, strike);
    }
    let std = Normal::standard();
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    let d2 = d1 - sd;
    match kind {
        OptionKind::Call => df * (forward * std.cdf(d1) - strike * std.cdf(d2)),
        OptionKind::Put => df * (strike * std.cdf(-d2) - forward * std.cdf(-d1)),
    }
}

/// Black-76 vega, `dPrice/dVol`.
pub fn black76_vega(forward: f64, strike: f64, maturity: f64, rate: f64, vol: f64) -> f64 {
    let sd = vol * maturity.sqrt();
    let d1 = ((forward / strike).ln() + 0.5 * sd * sd) / sd;
    (-rate * maturity).exp() * forward * Normal::standard().pdf(d1) * maturity.sqrt()
}

const PRICE_TOL: f64 = 1e-10;

/// Black-76 implied volatility by bisection with a Newton polish.
///
/// Prices at intrinsic value give zero; prices outside the no-arbitrage bounds
/// are `Error::Unattainable`.
pub fn implied_vol_black(price: f64, forward: f64, strike: f64, maturity: f64, rate: f64, kind: OptionKind) -> Result<f64> {
    if !(forward > 0.0 && strike > 0.0 && maturity > 0.0) || !price.is_finite() {
        return domain("implied vol needs positive forward, strike, maturity and a finite price");
    }
    let df = (-rate * maturity).exp();
    let lower = df * kind.payoff(forward, strike);
    let upper = match kind {
        OptionKind::Call => df * forward,
        OptionKind::Put => df * strike,
    };
    if price < lower - PRICE_TOL || price >= upper {
        return Err(Error::Unattainable(format!(
            "price {price} outside Black bounds [{lower}, {upper})"
        )));
    }
    if price <= lower + PRICE_TOL {
        return Ok(0.0);
    }
    let f = |v: f64| black76_price(forward, strike, maturity, rate, v, kind) - price;
    let (mut lo, mut hi) = (0.0, 1.0);
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Unattainable(format!("no implied vol below {hi} for price {price}")));
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut vol = 0.5 * (lo + hi);
    for _ in 0..20 {
        let err = f(vol);
        if err.abs() < PRICE_TOL {
            break;
        }
        let vega = black76_vega(forward, strike, maturity, rate, vol);
        if vega <= 0.0 {
            break;
        }
        let next = vol - err / vega;
        if !(next > lo && next < hi) {
            break;
        }
        vol = next;
    }
    Ok(vol)
}

/// One row of a smile table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmilePoint {
    pub strike: f64,
    pub quote: PriceQuote,
}

/// Call quotes on `underlying` samples with Black-76 vols against the sample-mean forward.
pub fn smile(samples: &[f64], strikes: &[f64], maturity: f64, rate: f64) -> Result<(f64, Vec<SmilePoint>)> {
    if samples.is_empty() {
        return domain("no samples to price");
    }
    let forward = samples.iter().sum::<f64>() / samples.len() as f64;
    let points = strikes
        .iter()
        .map(|&k| {
            let mut quote = price_european(samples, k, maturity, rate, OptionKind::Call)?;
            quote.implied_vol = implied_vol_black(quote.price, forward, k, maturity, rate, OptionKind::Call).ok();
            quote.implied_vol_se = quote.implied_vol.and_then(|iv| {
                let vega = black76_vega(forward, k, maturity, rate, iv);
                (iv > 0.0 && vega > 0.0).then(|| quote.std_err / vega)
            });
            Ok(SmilePoint { strike: k, quote })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((forward, points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{InitialCurve, ModelParams};
    use crate::presets::Preset;

    #[test]
    fn zero_strike_call_is_discounted_mean() {
        let s = [0.1, 0.2, 0.3];
        let q = price_european(&s, 0.0, 1.0, 0.05, OptionKind::Call).unwrap();
        assert!((q.price - 0.2 * (-0.05f64).exp()).abs() < 1e-15);
        let q = price_european(&s, 30.0, 1.0, 0.05, OptionKind::Call).unwrap();
        assert_eq!((q.price, q.std_err), (0.0, 0.0));
        assert!(price_european(&[], 1.0, 1.0, 0.0, OptionKind::Put).is_err());
    }

    #[test]
    fn implied_vol_round_trip() {
        for kind in [OptionKind::Call, OptionKind::Put] {
            for k in [0.7, 1.0, 1.4] {
                let p = black76_price(1.0, k, 0.5, 0.02, 0.3, kind);
                let v = implied_vol_black(p, 1.0, k, 0.5, 0.02, kind).unwrap();
                assert!((v - 0.3).abs() < 1e-8, "{kind:?} {k}");
            }
        }
    }

    #[test]
    fn implied_vol_boundaries() {
        let df = (-0.01f64).exp();
        assert_eq!(implied_vol_black(df * 0.2, 1.2, 1.0, 1.0, 0.01, OptionKind::Call).unwrap(), 0.0);
        let err = implied_vol_black(df * 1.2, 1.2, 1.0, 1.0, 0.01, OptionKind::Call).unwrap_err();
        assert!(matches!(err, Error::Unattainable(_)));
    }

    #[test]
    fn heston_vix_closed_form() {
        let p = ModelParams::heston(2.0, 0.2, 0.09, 0.04, 0.0).unwrap();
        let m = Model::new(p, InitialCurve::HestonLinear).unwrap();
        let eval = VixEvaluator::new(&m, 1.0, ONE_MONTH).unwrap();
        let mut state = PathState::initial(0.0, 1, 0.0);
        // choose U_T so that V_T = 0.07 under the linear curve at T = 1
        state.u[0] = 0.07 - m.g0(1.0).unwrap();
        state.v = 0.07;
        let (vix, clamped) = eval.evaluate(&state);
        let l = 2.0 * ONE_MONTH;
        let expected = (0.07 - 0.04) * (1.0 - (-l).exp()) / l + 0.04;
        assert!(!clamped);
        assert!((vix * vix - expected).abs() < 1e-9);
    }

    #[test]
    fn vix_limits() {
        let m = Preset::Set3.model().unwrap();
        let state = PathState::initial(0.0, 20, 0.1);
        let v = vix_from_state(&state, &m, 1.0, ONE_MONTH).unwrap();
        assert!((v - 0.1f64.sqrt()).abs() < 1e-12);

        let m = Preset::Set1.model().unwrap();
        let mut state = PathState::initial(0.0, 5, 0.0);
        state.u.copy_from_slice(&[0.01, -0.02, 0.03, 0.0, 0.01]);
        state.v = m.params.omega.iter().zip(state.u.iter()).map(|(w, u)| w * u).sum::<f64>() + m.g0(1.0).unwrap();
        let v = vix_from_state(&state, &m, 1.0, 1e-6).unwrap();
        assert!((v * v / state.v - 1.0).abs() < 1e-4);
    }
}

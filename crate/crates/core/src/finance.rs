//! Credit-risk arithmetic: expected profit net of provisions, exposure at
//! default and credit-conversion-factor estimation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_LGD: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfitParams {
    pub lgd: f64,
    pub ccf: f64,
}

impl Default for ProfitParams {
    fn default() -> Self {
        Self {
            lgd: DEFAULT_LGD,
            ccf: 0.5,
        }
    }
}

impl ProfitParams {
    pub fn validate(&self) -> Result<()> {
        check_unit("lgd", self.lgd)?;
        check_unit("ccf", self.ccf)
    }
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} = {v} outside [0, 1]")));
    }
    Ok(())
}

fn check_nonneg(name: &str, v: f64) -> Result<()> {
    if !(v >= 0.0 && v.is_finite()) {
        return Err(Error::Domain(format!("{name} = {v} must be finite and >= 0")));
    }
    Ok(())
}

/// Expected revenue minus provisions:
/// `interest * balance * (1 - pd) - pd * lgd * ead`.
pub fn expected_profit(interest: f64, balance: f64, pd: f64, lgd: f64, ead: f64) -> Result<f64> {
    check_unit("pd", pd)?;
    check_unit("lgd", lgd)?;
    check_nonneg("balance", balance)?;
    check_nonneg("ead", ead)?;
    if !interest.is_finite() {
        return Err(Error::Domain(format!("interest = {interest} is not finite")));
    }
    Ok(interest * balance * (1.0 - pd) - pd * lgd * ead)
}

/// Balance plus the CCF-weighted undrawn limit.
pub fn exposure_at_default(balance: f64, limit: f64, ccf: f64) -> Result<f64> {
    check_unit("ccf", ccf)?;
    check_nonneg("balance", balance)?;
    if !(limit >= balance) {
        return Err(Error::Domain(format!("balance {balance} exceeds limit {limit}")));
    }
    Ok(balance + ccf * (limit - balance))
}

/// One defaulted account: reference balance and limit some months before
/// default, and the balance observed at default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefaultObservation {
    pub balance_ref: f64,
    pub limit_ref: f64,
    pub balance_at_default: f64,
}

/// Median of the realised drawdown ratios, each clipped to `[0, 1]`.
/// Accounts with no undrawn limit at the reference date carry no information
/// and are skipped.
pub fn estimate_ccf(defaults: &[DefaultObservation]) -> Result<f64> {
    let mut ratios: Vec<f64> = defaults
        .iter()
        .filter(|d| d.limit_ref > d.balance_ref)
        .map(|d| {
            ((d.balance_at_default - d.balance_ref) / (d.limit_ref - d.balance_ref)).clamp(0.0, 1.0)
        })
        .collect();
    if ratios.is_empty() {
        return Err(Error::Data(
            "no defaulted account has undrawn limit at the reference date; \
             configure a fixed `ccf` instead of estimating it"
                .into(),
        ));
    }
    ratios.sort_by(f64::total_cmp);
    let n = ratios.len();
    Ok(if n % 2 == 1 {
        ratios[n / 2]
    } else {
        0.5 * (ratios[n / 2 - 1] + ratios[n / 2])
    })
}

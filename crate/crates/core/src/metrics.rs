//! Weekly metrics rows.

use core::fmt;
use core::str::FromStr;

use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::goods::GoodKind;
use crate::ledger;
use crate::world::{ActorKind, World};

/// Non-negative fixed-point number with four decimals, stored scaled by
/// 10,000. Built from exact rationals with one half-up rounding.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Fixed4(pub i128);

impl Fixed4 {
    pub const SCALE: i128 = 10_000;

    /// `num / den` rounded half-up (away from zero for negatives).
    pub fn from_ratio(num: i128, den: i128) -> Fixed4 {
        if den == 0 {
            return Fixed4(0);
        }
        let (num, den) = if den < 0 { (-num, -den) } else { (num, den) };
        let neg = num < 0;
        let a = num.unsigned_abs() * 2 * Self::SCALE as u128 + den as u128;
        let v = (a / (2 * den as u128)) as i128;
        Fixed4(if neg { -v } else { v })
    }

    pub fn from_int(n: i128) -> Fixed4 {
        Fixed4(n * Self::SCALE)
    }
}

impl fmt::Display for Fixed4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sign = if self.0 < 0 { "-" } else { "" };
        let a = self.0.unsigned_abs();
        write!(f, "{sign}{}.{:04}", a / 10_000, a % 10_000)
    }
}

impl FromStr for Fixed4 {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || alloc::format!("invalid fixed-point number {s:?}");
        let (neg, body) = match s.strip_prefix('-') {
            Some(b) => (true, b),
            None => (false, s),
        };
        let (int, frac) = body.split_once('.').unwrap_or((body, ""));
        if int.is_empty() || frac.len() > 4 || !frac.bytes().all(|b| b.is_ascii_digit()) {
            return Err(bad());
        }
        let i: i128 = int.parse().map_err(|_| bad())?;
        let mut f: i128 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        for _ in frac.len()..4 {
            f *= 10;
        }
        let v = i * 10_000 + f;
        Ok(Fixed4(if neg { -v } else { v }))
    }
}

impl Serialize for Fixed4 {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fixed4 {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

/// One week of aggregate outcomes, in metrics-table column order.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub week: u32,
    pub total_emissions_pu: u64,
    pub energy_traded_kwh: u64,
    pub mean_energy_price_cents: Fixed4,
    pub energy_purchased_kwh: u64,
    pub taxed_energy_kwh: u64,
    pub tax_revenue_cents: u64,
    pub quota_right_volume_pu: u64,
    pub quota_right_mean_price_cents: Fixed4,
    pub allowance_token_volume_kwh: u64,
    pub gini_money: Fixed4,
    pub outstanding_debt_kwh: u64,
    pub shutdown_count: u64,
    /// Regions whose regime changed this week, `;`-separated.
    pub regime_change: String,
}

pub const COLUMNS: [&str; 14] = [
    "week",
    "total_emissions_pu",
    "energy_traded_kwh",
    "mean_energy_price_cents",
    "energy_purchased_kwh",
    "taxed_energy_kwh",
    "tax_revenue_cents",
    "quota_right_volume_pu",
    "quota_right_mean_price_cents",
    "allowance_token_volume_kwh",
    "gini_money",
    "outstanding_debt_kwh",
    "shutdown_count",
    "regime_change",
];

/// Numeric columns usable in comparisons, by name.
pub const NUMERIC_COLUMNS: [&str; 12] = [
    "total_emissions_pu",
    "energy_traded_kwh",
    "mean_energy_price_cents",
    "energy_purchased_kwh",
    "taxed_energy_kwh",
    "tax_revenue_cents",
    "quota_right_volume_pu",
    "quota_right_mean_price_cents",
    "allowance_token_volume_kwh",
    "gini_money",
    "outstanding_debt_kwh",
    "shutdown_count",
];

impl MetricsRow {
    /// Cells in column order.
    pub fn cells(&self) -> Vec<String> {
        use alloc::string::ToString;
        alloc::vec![
            self.week.to_string(),
            self.total_emissions_pu.to_string(),
            self.energy_traded_kwh.to_string(),
            self.mean_energy_price_cents.to_string(),
            self.energy_purchased_kwh.to_string(),
            self.taxed_energy_kwh.to_string(),
            self.tax_revenue_cents.to_string(),
            self.quota_right_volume_pu.to_string(),
            self.quota_right_mean_price_cents.to_string(),
            self.allowance_token_volume_kwh.to_string(),
            self.gini_money.to_string(),
            self.outstanding_debt_kwh.to_string(),
            self.shutdown_count.to_string(),
            self.regime_change.clone(),
        ]
    }

    /// A numeric column as a fixed-point value.
    pub fn value(&self, column: &str) -> Option<Fixed4> {
        let int = |v: u64| Some(Fixed4::from_int(v as i128));
        match column {
            "total_emissions_pu" => int(self.total_emissions_pu),
            "energy_traded_kwh" => int(self.energy_traded_kwh),
            "mean_energy_price_cents" => Some(self.mean_energy_price_cents),
            "energy_purchased_kwh" => int(self.energy_purchased_kwh),
            "taxed_energy_kwh" => int(self.taxed_energy_kwh),
            "tax_revenue_cents" => int(self.tax_revenue_cents),
            "quota_right_volume_pu" => int(self.quota_right_volume_pu),
            "quota_right_mean_price_cents" => Some(self.quota_right_mean_price_cents),
            "allowance_token_volume_kwh" => int(self.allowance_token_volume_kwh),
            "gini_money" => Some(self.gini_money),
            "outstanding_debt_kwh" => int(self.outstanding_debt_kwh),
            "shutdown_count" => int(self.shutdown_count),
            _ => None,
        }
    }
}

/// Gini coefficient of `values`, exact then rounded once.
pub fn gini(values: &[u64]) -> Fixed4 {
    let n = values.len() as i128;
    let total: i128 = values.iter().map(|v| *v as i128).sum();
    if n == 0 || total == 0 {
        return Fixed4(0);
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let weighted: i128 = sorted
        .iter()
        .enumerate()
        .map(|(i, v)| (i as i128 + 1) * *v as i128)
        .sum();
    Fixed4::from_ratio(2 * weighted - (n + 1) * total, n * total)
}

/// Metrics for the week in progress, read before the week-end reset.
pub fn week_row(world: &World) -> MetricsRow {
    let mut energy_qty: u128 = 0;
    let mut energy_value: u128 = 0;
    let mut rights_qty: u128 = 0;
    let mut rights_value: u128 = 0;
    let mut tokens: u128 = 0;
    for t in &world.current.tape {
        match t.good {
            GoodKind::Energy => {
                energy_qty += t.quantity as u128;
                energy_value += t.value_cents as u128;
            }
            GoodKind::PollutionRight { .. } => {
                rights_qty += t.quantity as u128;
                rights_value += t.value_cents as u128;
            }
            GoodKind::AllowanceToken { .. } => tokens += t.quantity as u128,
            _ => {}
        }
    }
    let money: Vec<u64> = world
        .actors
        .iter()
        .filter(|a| a.kind != ActorKind::Government)
        .map(|a| a.money)
        .collect();
    let clamp = |v: u128| u64::try_from(v).unwrap_or(u64::MAX);
    MetricsRow {
        week: world.week,
        total_emissions_pu: world.current.emissions,
        energy_traded_kwh: clamp(energy_qty),
        mean_energy_price_cents: Fixed4::from_ratio(energy_value as i128, energy_qty as i128),
        energy_purchased_kwh: world.current.energy_purchased,
        taxed_energy_kwh: world.current.taxed_kwh,
        tax_revenue_cents: world.current.tax_revenue,
        quota_right_volume_pu: clamp(rights_qty),
        quota_right_mean_price_cents: Fixed4::from_ratio(rights_value as i128, rights_qty as i128),
        allowance_token_volume_kwh: clamp(tokens),
        gini_money: gini(&money),
        outstanding_debt_kwh: clamp(ledger::outstanding_debt_kwh(world)),
        shutdown_count: world.current.shutdowns,
        regime_change: world.current.regime_changes.join(";"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    #[test]
    fn fixed4_rounds_half_up() {
        assert_eq!(Fixed4::from_ratio(1, 3).to_string(), "0.3333");
        assert_eq!(Fixed4::from_ratio(2, 3).to_string(), "0.6667");
        assert_eq!(Fixed4::from_ratio(1, 20_000).to_string(), "0.0001");
        assert_eq!(Fixed4::from_ratio(-1, 3).to_string(), "-0.3333");
        assert_eq!("12.5".parse::<Fixed4>().unwrap(), Fixed4(125_000));
        assert_eq!("-0.0001".parse::<Fixed4>().unwrap(), Fixed4(-1));
    }

    #[test]
    fn gini_examples() {
        assert_eq!(gini(&[]), Fixed4(0));
        assert_eq!(gini(&[5, 5, 5, 5]), Fixed4(0));
        assert_eq!(gini(&[0, 0, 0, 10]).to_string(), "0.7500");
        assert_eq!(gini(&[1, 2, 3]).to_string(), "0.2222");
    }

    #[test]
    fn columns_match_cells() {
        assert_eq!(MetricsRow::default().cells().len(), COLUMNS.len());
        for c in NUMERIC_COLUMNS {
            assert!(MetricsRow::default().value(c).is_some(), "{c}");
        }
    }
}

//! Goods, lots and inventories.
//!
//! A lot is a quantity of one good at one location carrying a fixed amount
//! of embodied energy per unit. Lots with the same good, location and
//! per-unit embodied energy are indistinguishable and merge.

use core::fmt;
use core::str::FromStr;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Rejection;
use crate::ids::{InnovationId, SiteId};

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum GoodKind {
    Resource(String),
    Item(String),
    /// One unit is one kWh of delivered energy. Its embodied energy per unit
    /// can exceed 1 kWh once plant amortization and fuel are included.
    Energy,
    License(InnovationId),
    PollutionRight {
        valid_week: u32,
    },
    AllowanceToken {
        valid_week: u32,
    },
    /// Assumption of energy debt, in kWh. Never held as a lot; the debtor
    /// bids (pays) and the assuming party asks (is paid).
    DebtAssumption,
}

impl GoodKind {
    /// Physical goods live at a site and can be transported.
    pub fn is_physical(&self) -> bool {
        matches!(self, GoodKind::Resource(_) | GoodKind::Item(_))
    }

    pub fn is_instrument(&self) -> bool {
        matches!(self, GoodKind::PollutionRight { .. } | GoodKind::AllowanceToken { .. })
    }

    pub fn is_lot_good(&self) -> bool {
        !matches!(self, GoodKind::DebtAssumption)
    }

    /// Short category name used in metrics and audit output.
    pub fn category(&self) -> &'static str {
        match self {
            GoodKind::Resource(_) => "resource",
            GoodKind::Item(_) => "item",
            GoodKind::Energy => "energy",
            GoodKind::License(_) => "license",
            GoodKind::PollutionRight { .. } => "pollution_right",
            GoodKind::AllowanceToken { .. } => "allowance_token",
            GoodKind::DebtAssumption => "debt_assumption",
        }
    }
}

impl fmt::Display for GoodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GoodKind::Resource(n) => write!(f, "resource:{n}"),
            GoodKind::Item(n) => write!(f, "item:{n}"),
            GoodKind::Energy => f.write_str("energy"),
            GoodKind::License(i) => write!(f, "license:{}", i.0),
            GoodKind::PollutionRight { valid_week } => write!(f, "pollution_right@{valid_week}"),
            GoodKind::AllowanceToken { valid_week } => write!(f, "allowance_token@{valid_week}"),
            GoodKind::DebtAssumption => f.write_str("debt_assumption"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("unknown good {0:?}")]
pub struct ParseGoodError(pub String);

impl FromStr for GoodKind {
    type Err = ParseGoodError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseGoodError(s.to_string());
        match s {
            "energy" => return Ok(GoodKind::Energy),
            "debt_assumption" => return Ok(GoodKind::DebtAssumption),
            _ => {}
        }
        if let Some((kind, week)) = s.split_once('@') {
            let valid_week: u32 = week.parse().map_err(|_| err())?;
            return match kind {
                "pollution_right" => Ok(GoodKind::PollutionRight { valid_week }),
                "allowance_token" => Ok(GoodKind::AllowanceToken { valid_week }),
                _ => Err(err()),
            };
        }
        let (kind, name) = s.split_once(':').ok_or_else(err)?;
        if name.is_empty() {
            return Err(err());
        }
        match kind {
            "resource" => Ok(GoodKind::Resource(name.to_string())),
            "item" => Ok(GoodKind::Item(name.to_string())),
            "license" => Ok(GoodKind::License(InnovationId(name.parse().map_err(|_| err())?))),
            _ => Err(err()),
        }
    }
}

impl Serialize for GoodKind {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for GoodKind {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Identity of a lot: what it is, where it is, and its embodied energy per unit.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LotKey {
    pub good: GoodKind,
    /// `None` for location-free goods (energy, licenses, instruments).
    pub site: Option<SiteId>,
    pub embodied_per_unit: u64,
}

impl LotKey {
    pub fn new(good: GoodKind, site: Option<SiteId>, embodied_per_unit: u64) -> Self {
        LotKey {
            good,
            site,
            embodied_per_unit,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ItemLot {
    #[serde(flatten)]
    pub key: LotKey,
    pub quantity: u64,
}

impl ItemLot {
    pub fn new(key: LotKey, quantity: u64) -> Self {
        ItemLot { key, quantity }
    }

    pub fn embodied_total(&self) -> u128 {
        self.key.embodied_per_unit as u128 * self.quantity as u128
    }
}

/// Merged lots keyed by [`LotKey`]. Zero-quantity lots are never stored.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Inventory {
    lots: BTreeMap<LotKey, u64>,
}

impl Inventory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, key: LotKey, quantity: u64) {
        if quantity == 0 {
            return;
        }
        *self.lots.entry(key).or_insert(0) += quantity;
    }

    pub fn add_lot(&mut self, lot: ItemLot) {
        self.add(lot.key, lot.quantity);
    }

    pub fn quantity(&self, key: &LotKey) -> u64 {
        self.lots.get(key).copied().unwrap_or(0)
    }

    pub fn remove(&mut self, key: &LotKey, quantity: u64) -> Result<(), Rejection> {
        let have = self.quantity(key);
        if have < quantity {
            return Err(Rejection::MissingGoods);
        }
        if have == quantity {
            self.lots.remove(key);
        } else if let Some(q) = self.lots.get_mut(key) {
            *q -= quantity;
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&LotKey, u64)> {
        self.lots.iter().map(|(k, q)| (k, *q))
    }

    pub fn is_empty(&self) -> bool {
        self.lots.is_empty()
    }

    /// Total quantity of `good` at `site` across all embodied values.
    pub fn total_of(&self, good: &GoodKind, site: Option<SiteId>) -> u64 {
        self.lots
            .iter()
            .filter(|(k, _)| &k.good == good && k.site == site)
            .map(|(_, q)| *q)
            .sum()
    }

    /// Total quantity of `good` anywhere.
    pub fn total_anywhere(&self, good: &GoodKind) -> u64 {
        self.lots.iter().filter(|(k, _)| &k.good == good).map(|(_, q)| *q).sum()
    }

    /// Plans taking `quantity` of `good` at `site`, lowest embodied value
    /// first. Does not mutate; returns `None` on shortfall.
    pub fn plan_take(&self, good: &GoodKind, site: Option<SiteId>, quantity: u64) -> Option<Vec<ItemLot>> {
        let mut left = quantity;
        let mut out = Vec::new();
        for (k, q) in self.lots.iter() {
            if left == 0 {
                break;
            }
            if &k.good != good || k.site != site {
                continue;
            }
            let take = left.min(*q);
            out.push(ItemLot::new(k.clone(), take));
            left -= take;
        }
        (left == 0).then_some(out)
    }

    /// Removes lots previously returned by [`Inventory::plan_take`].
    pub fn remove_lots(&mut self, lots: &[ItemLot]) -> Result<(), Rejection> {
        for lot in lots {
            if self.quantity(&lot.key) < lot.quantity {
                return Err(Rejection::MissingGoods);
            }
        }
        for lot in lots {
            self.remove(&lot.key, lot.quantity)?;
        }
        Ok(())
    }

    pub fn embodied_total(&self) -> u128 {
        self.lots
            .iter()
            .map(|(k, q)| k.embodied_per_unit as u128 * *q as u128)
            .sum()
    }

    pub fn retain(&mut self, mut keep: impl FnMut(&LotKey) -> bool) {
        self.lots.retain(|k, _| keep(k));
    }
}

impl Serialize for Inventory {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.lots.iter().map(|(k, q)| ItemLot::new(k.clone(), *q)))
    }
}

impl<'de> Deserialize<'de> for Inventory {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let lots: Vec<ItemLot> = Vec::deserialize(d)?;
        let mut inv = Inventory::new();
        for lot in lots {
            inv.add_lot(lot);
        }
        Ok(inv)
    }
}

/// Splits `total` kWh over `units` units: every unit gets the floor share and
/// the last unit additionally carries the remainder.
pub fn split_with_remainder(total: u128, units: u64) -> (u64, u64) {
    if units == 0 {
        return (0, 0);
    }
    let share = total / units as u128;
    let rem = total - share * units as u128;
    (share as u64, rem as u64)
}

//! Regional law regimes: progressive energy tax above a tax-free allowance,
//! per-player pollution caps, forced shutdown, weekly minting of tradable
//! instruments, and scheduled regime changes.

use alloc::string::ToString;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::Rejection;
use crate::goods::{GoodKind, ItemLot, LotKey};
use crate::ids::{ActorId, FacilityId, RegionId};
use crate::ratio::Ratio;
use crate::world::{ActorKind, World};

/// Largest accepted denominator for a marginal rate.
pub const MAX_RATE_DENOMINATOR: u64 = 1_000_000;

/// One marginal-rate band. `upper` is a multiple of the tax-free allowance;
/// `None` means unbounded and must be the last band.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bracket {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub upper: Option<Ratio>,
    pub rate: Ratio,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyRegime {
    /// kWh per player per week acquired without tax.
    pub tax_free_allowance: u64,
    pub brackets: Vec<Bracket>,
    /// Pollution units per player per week.
    pub pollution_cap: u64,
    pub allowance_sale_enabled: bool,
    pub quota_trade_enabled: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum PolicyError {
    #[error("regime.brackets must not be empty")]
    EmptyBrackets,
    #[error("regime.brackets bounds must be strictly increasing")]
    BoundsNotIncreasing,
    #[error("regime.brackets last bound must be unbounded")]
    LastBoundFinite,
    #[error("regime.brackets marginal rates must be non-decreasing")]
    RatesDecreasing,
    #[error("regime.brackets rate denominator exceeds {MAX_RATE_DENOMINATOR}")]
    RateDenominatorTooLarge,
    #[error("policy event week {event} does not match world week {world}")]
    WrongWeek { event: u32, world: u32 },
    #[error("policy event names unknown region {0}")]
    UnknownRegion(RegionId),
}

/// 0% up to the allowance, then 20% to 2x, 50% to 4x, 100% beyond.
pub fn default_brackets() -> Vec<Bracket> {
    let r = |n, d| Ratio::new(n, d).unwrap_or(Ratio::ZERO);
    alloc::vec![
        Bracket {
            upper: Some(Ratio::integer(1)),
            rate: Ratio::ZERO
        },
        Bracket {
            upper: Some(Ratio::integer(2)),
            rate: r(1, 5)
        },
        Bracket {
            upper: Some(Ratio::integer(4)),
            rate: r(1, 2)
        },
        Bracket {
            upper: None,
            rate: Ratio::ONE
        },
    ]
}

impl PolicyRegime {
    pub fn with_defaults(tax_free_allowance: u64, pollution_cap: u64) -> Self {
        PolicyRegime {
            tax_free_allowance,
            brackets: default_brackets(),
            pollution_cap,
            allowance_sale_enabled: true,
            quota_trade_enabled: true,
        }
    }

    pub fn validate(&self) -> Result<(), PolicyError> {
        let last = self.brackets.last().ok_or(PolicyError::EmptyBrackets)?;
        if last.upper.is_some() {
            return Err(PolicyError::LastBoundFinite);
        }
        let mut prev_bound: Option<Ratio> = None;
        let mut prev_rate = Ratio::ZERO;
        for (i, b) in self.brackets.iter().enumerate() {
            if b.rate.den() > MAX_RATE_DENOMINATOR {
                return Err(PolicyError::RateDenominatorTooLarge);
            }
            if b.rate < prev_rate {
                return Err(PolicyError::RatesDecreasing);
            }
            prev_rate = b.rate;
            let is_last = i + 1 == self.brackets.len();
            match b.upper {
                None if !is_last => return Err(PolicyError::BoundsNotIncreasing),
                None => {}
                Some(u) => {
                    if let Some(p) = prev_bound {
                        if u <= p {
                            return Err(PolicyError::BoundsNotIncreasing);
                        }
                    }
                    prev_bound = Some(u);
                }
            }
        }
        Ok(())
    }

    /// Absolute band upper bounds in kWh, paired with their marginal rate.
    fn bands(&self) -> impl Iterator<Item = (Option<u64>, Ratio)> + '_ {
        self.brackets
            .iter()
            .map(|b| (b.upper.map(|m| m.mul_floor(self.tax_free_allowance)), b.rate))
    }

    /// Marginal rate in force at absolute schedule position `pos`.
    pub fn rate_at(&self, pos: i128) -> Ratio {
        if pos < 0 {
            return Ratio::ZERO;
        }
        for (upper, rate) in self.bands() {
            match upper {
                Some(u) if (pos as u128) < u as u128 => return rate,
                Some(_) => continue,
                None => return rate,
            }
        }
        Ratio::ZERO
    }
}

/// Result of integrating the marginal schedule over one acquisition.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct TaxAssessment {
    pub tax_cents: u64,
    /// kWh of the acquisition that fell in bands with a positive rate.
    pub taxed_kwh: u64,
}

/// Exact (unrounded) tax as a fraction `num / den` of cents.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExactTax {
    pub num: u128,
    pub den: u128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// Integrates the schedule over `[start, start + increment)` where `start`
/// is a position in the regime's schedule. Positions below zero are
/// tax-free headroom (extra allowance from tokens).
pub fn exact_tax(regime: &PolicyRegime, start: i128, increment: u64, price: u64) -> (ExactTax, u64) {
    let end = start + increment as i128;
    let mut acc = ExactTax { num: 0, den: 1 };
    let mut taxed = 0u64;
    let mut lo: i128 = 0;
    for (upper, rate) in regime.bands() {
        let hi: i128 = upper.map_or(i128::MAX, |u| u as i128);
        let seg_lo = lo.max(start);
        let seg_hi = hi.min(end);
        if seg_hi > seg_lo {
            let energy = (seg_hi - seg_lo) as u128;
            if !rate.is_zero() {
                taxed += energy as u64;
                let num = energy.saturating_mul(price as u128).saturating_mul(rate.num() as u128);
                let den = rate.den() as u128;
                let n = acc.num.saturating_mul(den).saturating_add(num.saturating_mul(acc.den));
                let d = acc.den.saturating_mul(den);
                let g = gcd(n, d).max(1);
                acc = ExactTax { num: n / g, den: d / g };
            }
        }
        if hi >= end {
            break;
        }
        lo = hi;
    }
    (acc, taxed)
}

/// Tax in cents, with the exact total rounded half-up once.
pub fn assess_tax(regime: &PolicyRegime, start: i128, increment: u64, price: u64) -> TaxAssessment {
    let (exact, taxed_kwh) = exact_tax(regime, start, increment, price);
    let rounded = exact.num.saturating_mul(2).saturating_add(exact.den) / exact.den.saturating_mul(2);
    TaxAssessment {
        tax_cents: u64::try_from(rounded).unwrap_or(u64::MAX),
        taxed_kwh,
    }
}

/// Tax owed on acquiring `increment` kWh when `cumulative` kWh were already
/// acquired this week, priced at `price` cents per kWh.
pub fn marginal_tax(regime: &PolicyRegime, cumulative: u64, increment: u64, price: u64) -> u64 {
    assess_tax(regime, cumulative as i128, increment, price).tax_cents
}

/// Shutdown rule: when projected pollution exceeds `quota`, shut facilities
/// in descending projected pollution (ties by ascending id) until the rest fit.
pub fn select_shutdowns(quota: u64, plans: &[(FacilityId, u64)]) -> Vec<FacilityId> {
    let mut total: u128 = plans.iter().map(|(_, p)| *p as u128).sum();
    if total <= quota as u128 {
        return Vec::new();
    }
    let mut order: Vec<(FacilityId, u64)> = plans.to_vec();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut shut = Vec::new();
    for (id, pu) in order {
        if total <= quota as u128 {
            break;
        }
        total -= pu as u128;
        shut.push(id);
    }
    shut
}

// ---------------------------------------------------------------------------
// World-dependent quota and allowance queries

/// Sum of this week's active allowance reductions from energy debts.
pub fn requested_reductions(world: &World, actor: ActorId) -> u64 {
    world
        .debts
        .iter()
        .filter(|d| d.debtor == actor && d.remaining > 0)
        .filter_map(|d| d.reduction_per_week().map(|pw| pw.min(d.remaining)))
        .sum()
}

/// The regime's base allowance for this actor: players get the regional
/// allowance, corporations and the government get none.
pub fn base_allowance(world: &World, actor: ActorId) -> u64 {
    let a = &world.actors[actor.index()];
    match a.kind {
        ActorKind::Player => world.regime_of(actor).tax_free_allowance,
        _ => 0,
    }
}

/// Tax-free kWh available this week: base allowance, minus debt
/// reductions, plus allowance tokens held. Floored at zero.
pub fn effective_allowance(world: &World, actor: ActorId) -> u64 {
    let a = &world.actors[actor.index()];
    let tokens = a.allowance_tokens_held(world.week);
    (base_allowance(world, actor) + tokens).saturating_sub(requested_reductions(world, actor))
}

/// Position of the actor's next kWh in its regime's schedule.
pub fn tax_position(world: &World, actor: ActorId) -> i128 {
    let a = &world.actors[actor.index()];
    let regime = world.regime_of(actor);
    a.week_energy_acquired as i128 + regime.tax_free_allowance as i128 - effective_allowance(world, actor) as i128
}

/// Tax the actor would owe on acquiring `kwh` more embodied energy now.
pub fn assess_for(world: &World, actor: ActorId, kwh: u64) -> TaxAssessment {
    if world.actors[actor.index()].kind == ActorKind::Government {
        return TaxAssessment::default();
    }
    let regime = world.regime_of(actor);
    let price = world.regions[world.actors[actor.index()].region.index()].reference_price;
    assess_tax(regime, tax_position(world, actor), kwh, price)
}

/// Player's own weekly cap after pooling into a corporation.
pub fn retained_cap(world: &World, player: ActorId) -> u64 {
    let a = &world.actors[player.index()];
    if a.kind != ActorKind::Player {
        return 0;
    }
    let cap = world.regime_of(player).pollution_cap;
    cap - pooled_share(world, player, cap)
}

fn pooled_share(world: &World, player: ActorId, cap: u64) -> u64 {
    let a = &world.actors[player.index()];
    a.corporation
        .and_then(|c| world.actors[c.index()].members.get(&player).copied())
        .map_or(0, |f| f.mul_floor(cap))
}

/// Corporation's pooled cap: sum of its members' transferred shares.
pub fn pooled_cap(world: &World, corp: ActorId) -> u64 {
    let c = &world.actors[corp.index()];
    c.members
        .iter()
        .map(|(m, f)| f.mul_floor(world.regime_of(*m).pollution_cap))
        .sum()
}

/// Cap before rights and emissions.
pub fn cap_share(world: &World, actor: ActorId) -> u64 {
    match world.actors[actor.index()].kind {
        ActorKind::Player => retained_cap(world, actor),
        ActorKind::Corporation => pooled_cap(world, actor),
        ActorKind::Government => 0,
    }
}

/// Signed remaining pollution quota this week.
pub fn pollution_headroom(world: &World, actor: ActorId) -> i128 {
    let a = &world.actors[actor.index()];
    cap_share(world, actor) as i128 + a.pollution_rights_held(world.week) as i128 - a.week_pollution as i128
}

/// Remaining pollution quota this week, floored at zero.
pub fn available_pollution_quota(world: &World, actor: ActorId) -> u64 {
    pollution_headroom(world, actor).max(0) as u64
}

/// Sellable portion of this week's pollution rights: held and not needed
/// to cover pollution already emitted.
pub fn sellable_rights(world: &World, actor: ActorId) -> u64 {
    let held = world.actors[actor.index()].pollution_rights_held(world.week);
    held.min(available_pollution_quota(world, actor))
}

/// Sellable portion of this week's allowance tokens: held and not yet
/// used up by acquisitions.
pub fn sellable_tokens(world: &World, actor: ActorId) -> u64 {
    let a = &world.actors[actor.index()];
    let held = a.allowance_tokens_held(world.week);
    let unused = effective_allowance(world, actor).saturating_sub(a.week_energy_acquired);
    held.min(unused)
}

/// Facilities to shut for `actor` given projected pollution per facility.
pub fn resolve_forced_shutdown(world: &World, actor: ActorId, plans: &[(FacilityId, u64)]) -> Vec<FacilityId> {
    select_shutdowns(available_pollution_quota(world, actor), plans)
}

/// Week-end minting: each player's unused pollution cap and unused base
/// allowance become instruments valid next week. Returns the minted lots.
pub fn mint_allowance_instruments(world: &mut World) -> Result<Vec<(ActorId, ItemLot)>, Rejection> {
    if world.current.minted {
        return Err(Rejection::AlreadyMinted);
    }
    let next = world.week + 1;
    let mut minted = Vec::new();
    for i in 0..world.actors.len() {
        let id = ActorId(i as u32);
        if world.actors[i].kind != ActorKind::Player {
            continue;
        }
        let regime = world.regime_of(id);
        let (quota_trade, allowance_sale) = (regime.quota_trade_enabled, regime.allowance_sale_enabled);
        let a = &world.actors[i];
        let rights = if quota_trade {
            retained_cap(world, id).saturating_sub(a.week_pollution)
        } else {
            0
        };
        let tokens = if allowance_sale {
            base_allowance(world, id)
                .saturating_sub(requested_reductions(world, id))
                .saturating_sub(a.week_energy_acquired)
        } else {
            0
        };
        if rights > 0 {
            let lot = ItemLot::new(
                LotKey::new(GoodKind::PollutionRight { valid_week: next }, None, 0),
                rights,
            );
            minted.push((id, lot));
        }
        if tokens > 0 {
            let lot = ItemLot::new(
                LotKey::new(GoodKind::AllowanceToken { valid_week: next }, None, 0),
                tokens,
            );
            minted.push((id, lot));
        }
    }
    for (id, lot) in &minted {
        world.actors[id.index()].inventory.add_lot(lot.clone());
    }
    world.current.minted = true;
    Ok(minted)
}

/// Burns instruments whose validity week has passed. They carry no
/// embodied energy, so the journal is unaffected.
pub fn burn_expired_instruments(world: &mut World) {
    let week = world.week;
    for a in world.actors.iter_mut() {
        a.inventory.retain(|k| match k.good {
            GoodKind::PollutionRight { valid_week } | GoodKind::AllowanceToken { valid_week } => valid_week > week,
            _ => true,
        });
    }
}

/// Field-level regime change. Every `None` field is left untouched.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyChange {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replace: Option<PolicyRegime>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tax_free_allowance: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brackets: Option<Vec<Bracket>>,
    /// Multiplies every marginal rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_rates: Option<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pollution_cap: Option<u64>,
    /// Multiplies the pollution cap (floor).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale_cap: Option<Ratio>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub allowance_sale_enabled: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quota_trade_enabled: Option<bool>,
}

impl PolicyChange {
    pub fn apply_to(&self, regime: &PolicyRegime) -> PolicyRegime {
        let mut r = self.replace.clone().unwrap_or_else(|| regime.clone());
        if let Some(a) = self.tax_free_allowance {
            r.tax_free_allowance = a;
        }
        if let Some(b) = &self.brackets {
            r.brackets = b.clone();
        }
        if let Some(s) = self.scale_rates {
            for b in r.brackets.iter_mut() {
                b.rate = b.rate.checked_mul(s).unwrap_or(b.rate);
            }
        }
        if let Some(c) = self.pollution_cap {
            r.pollution_cap = c;
        }
        if let Some(s) = self.scale_cap {
            r.pollution_cap = s.mul_floor(r.pollution_cap);
        }
        if let Some(v) = self.allowance_sale_enabled {
            r.allowance_sale_enabled = v;
        }
        if let Some(v) = self.quota_trade_enabled {
            r.quota_trade_enabled = v;
        }
        r
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyEvent {
    pub week: u32,
    pub region: RegionId,
    pub change: PolicyChange,
}

/// Replaces the region's regime at the start of the event's week and leaves
/// a regime-change marker for the metrics row.
pub fn apply_policy_event(world: &mut World, event: &PolicyEvent) -> Result<(), PolicyError> {
    if event.week != world.week {
        return Err(PolicyError::WrongWeek {
            event: event.week,
            world: world.week,
        });
    }
    let region = world
        .regions
        .get_mut(event.region.index())
        .ok_or(PolicyError::UnknownRegion(event.region))?;
    let next = event.change.apply_to(&region.regime);
    next.validate()?;
    region.regime = next;
    let name = region.name.to_string();
    world.current.regime_changes.push(name);
    Ok(())
}

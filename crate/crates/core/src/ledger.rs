//! Embodied-energy journal, facility amortization and energy debts.
//!
//! Every kWh of embodied energy sits in exactly one account: an actor
//! (inventory and escrowed asks), a facility (unamortized build energy), a
//! lab's research progress, a shipment in transit, or an open debt. Energy
//! enters from `SOURCE` and leaves into `SINK`; everything else is a move
//! between accounts. [`ledger_balance`] recomputes the stock from the world
//! and compares it with the journal totals.

use core::fmt;
use core::str::FromStr;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Rejection;
use crate::goods::GoodKind;
use crate::ids::{ActorId, DebtId, FacilityId, ShipmentId, GOVERNMENT};
use crate::market::{self, Side, Trade, Venue};
use crate::policy;
use crate::production::{Facility, FacilityState};
use crate::world::{ActorKind, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Account {
    Source,
    Sink,
    Actor(ActorId),
    Facility(FacilityId),
    Research(FacilityId),
    Shipment(ShipmentId),
    Debt(DebtId),
}

impl Account {
    pub fn is_boundary(self) -> bool {
        matches!(self, Account::Source | Account::Sink)
    }
}

impl fmt::Display for Account {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Account::Source => f.write_str("SOURCE"),
            Account::Sink => f.write_str("SINK"),
            Account::Actor(a) => write!(f, "actor:{}", a.0),
            Account::Facility(x) => write!(f, "facility:{}", x.0),
            Account::Research(x) => write!(f, "research:{}", x.0),
            Account::Shipment(x) => write!(f, "shipment:{}", x.0),
            Account::Debt(x) => write!(f, "debt:{}", x.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("invalid account {0:?}")]
pub struct ParseAccountError(pub String);

impl FromStr for Account {
    type Err = ParseAccountError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseAccountError(s.to_string());
        match s {
            "SOURCE" => return Ok(Account::Source),
            "SINK" => return Ok(Account::Sink),
            _ => {}
        }
        let (kind, n) = s.split_once(':').ok_or_else(err)?;
        let n: u32 = n.parse().map_err(|_| err())?;
        match kind {
            "actor" => Ok(Account::Actor(ActorId(n))),
            "facility" => Ok(Account::Facility(FacilityId(n))),
            "research" => Ok(Account::Research(FacilityId(n))),
            "shipment" => Ok(Account::Shipment(ShipmentId(n))),
            "debt" => Ok(Account::Debt(DebtId(n))),
            _ => Err(err()),
        }
    }
}

impl Serialize for Account {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Account {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LedgerKind {
    PrimaryGeneration,
    GridInjection,
    EmbodimentTransfer,
    Consumption,
    DebtCreated,
    DebtSettled,
}

/// One journal line. Field order in the export is
/// `week, kind, amount, from, to`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LedgerEntry {
    pub week: u32,
    pub kind: LedgerKind,
    pub amount: u64,
    pub from: Account,
    pub to: Account,
}

impl LedgerEntry {
    /// Boundary accounts may only appear as the source of generation or
    /// injection, or as the target of consumption.
    pub fn is_well_formed(&self) -> bool {
        if self.amount == 0 || self.from == self.to {
            return false;
        }
        let from_ok = match self.from {
            Account::Source => matches!(self.kind, LedgerKind::PrimaryGeneration | LedgerKind::GridInjection),
            Account::Sink => false,
            _ => !matches!(self.kind, LedgerKind::PrimaryGeneration | LedgerKind::GridInjection),
        };
        let to_ok = match self.to {
            Account::Sink => self.kind == LedgerKind::Consumption,
            Account::Source => false,
            _ => self.kind != LedgerKind::Consumption,
        };
        from_ok && to_ok
    }
}

/// Append-only journal with running boundary totals.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyLedger {
    pub entries: Vec<LedgerEntry>,
    pub generated: u128,
    pub injected: u128,
    pub consumed: u128,
}

impl EnergyLedger {
    /// Appends one entry; zero amounts are not journaled.
    pub fn record(&mut self, week: u32, kind: LedgerKind, amount: u64, from: Account, to: Account) {
        if amount == 0 {
            return;
        }
        let entry = LedgerEntry {
            week,
            kind,
            amount,
            from,
            to,
        };
        debug_assert!(entry.is_well_formed(), "malformed ledger entry {entry:?}");
        match kind {
            LedgerKind::PrimaryGeneration => self.generated += amount as u128,
            LedgerKind::GridInjection => self.injected += amount as u128,
            LedgerKind::Consumption => self.consumed += amount as u128,
            _ => {}
        }
        self.entries.push(entry);
    }

    /// As [`EnergyLedger::record`], splitting amounts beyond `u64`.
    pub fn record_u128(&mut self, week: u32, kind: LedgerKind, mut amount: u128, from: Account, to: Account) {
        while amount > 0 {
            let chunk = amount.min(u64::MAX as u128) as u64;
            self.record(week, kind, chunk, from, to);
            amount -= chunk as u128;
        }
    }

    pub fn tail(&self, n: usize) -> &[LedgerEntry] {
        &self.entries[self.entries.len().saturating_sub(n)..]
    }
}

/// Per-account balances implied by a journal.
pub fn replay_balances<'a>(entries: impl IntoIterator<Item = &'a LedgerEntry>) -> BTreeMap<Account, i128> {
    let mut out: BTreeMap<Account, i128> = BTreeMap::new();
    for e in entries {
        if !e.from.is_boundary() {
            *out.entry(e.from).or_insert(0) -= e.amount as i128;
        }
        if !e.to.is_boundary() {
            *out.entry(e.to).or_insert(0) += e.amount as i128;
        }
    }
    out.retain(|_, v| *v != 0);
    out
}

/// Journal drift: generation + injection − consumption − balance of every
/// non-boundary account. Zero for any journal of well-formed entries.
pub fn replay_drift<'a>(entries: impl IntoIterator<Item = &'a LedgerEntry> + Clone) -> i128 {
    let mut flow: i128 = 0;
    for e in entries.clone() {
        match e.kind {
            LedgerKind::PrimaryGeneration | LedgerKind::GridInjection => flow += e.amount as i128,
            LedgerKind::Consumption => flow -= e.amount as i128,
            _ => {}
        }
    }
    flow - replay_balances(entries).values().sum::<i128>()
}

// ---------------------------------------------------------------------------
// Amortization

/// Whole kWh of build energy allotted to each of the first
/// `estimated_units` units.
pub fn per_unit_amortization(f: &Facility) -> u64 {
    f.embodied_build_energy / f.estimated_units.max(1)
}

/// Build energy left over after even division; folded into retirement debt.
pub fn amortization_residual(f: &Facility) -> u64 {
    f.embodied_build_energy % f.estimated_units.max(1)
}

/// Embodied energy of one unit from this facility, excluding inputs.
pub fn amortized_unit_energy(f: &Facility) -> u64 {
    per_unit_amortization(f) + f.marginal_energy_per_unit
}

/// Amortization carried by the next `units` units; units beyond the
/// estimate carry none.
pub fn amortization_for(f: &Facility, units: u64) -> u64 {
    let left = f.estimated_units.saturating_sub(f.units_produced);
    per_unit_amortization(f).saturating_mul(units.min(left))
}

/// Build energy not yet passed on to produced units.
pub fn unamortized_energy(f: &Facility) -> u64 {
    if f.state == FacilityState::Retired {
        return 0;
    }
    let done = f.units_produced.min(f.estimated_units);
    f.embodied_build_energy - per_unit_amortization(f) * done
}

// ---------------------------------------------------------------------------
// Energy acquisition

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AcquisitionSource {
    Purchase,
    EmbodiedItem,
    DebtAssumed,
    /// Marginal energy a facility burns for its owner.
    SelfConsumed,
}

/// Adds to the actor's weekly acquisition total. The caller journals the
/// matching energy movement and assesses tax.
pub fn charge_energy_acquisition(world: &mut World, actor: ActorId, amount: u64, source: AcquisitionSource) {
    let _ = source;
    let a = &mut world.actors[actor.index()];
    a.week_energy_acquired = a.week_energy_acquired.saturating_add(amount);
}

// ---------------------------------------------------------------------------
// Debts

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum DebtSettlement {
    Open,
    Buyback,
    Sold { to: ActorId },
    AllowanceReduction { per_week: u64 },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnergyDebt {
    pub id: DebtId,
    pub debtor: ActorId,
    pub amount: u64,
    pub remaining: u64,
    pub origin_facility: FacilityId,
    pub created_week: u32,
    pub settlement: DebtSettlement,
    /// Partial assumptions through the debt book: (assumer, kWh).
    pub assumed_by: Vec<(ActorId, u64)>,
}

impl EnergyDebt {
    pub fn is_open(&self) -> bool {
        self.remaining > 0
    }

    pub fn reduction_per_week(&self) -> Option<u64> {
        match self.settlement {
            DebtSettlement::AllowanceReduction { per_week } if self.remaining > 0 => Some(per_week),
            _ => None,
        }
    }
}

/// The three settlement routes an owner can choose.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "route", rename_all = "snake_case")]
pub enum SettleRoute {
    /// Buy the energy on the grid (taxed) and donate it to the government.
    Buyback,
    /// Pay others `price` cents per kWh to take the debt onto their own
    /// weekly totals.
    Sell { price: u64 },
    /// Lower the debtor's own tax-free allowance week by week.
    AllowanceReduction,
}

/// Retires a facility. Its unamortized build energy, residual included,
/// becomes an energy debt of the owner.
pub fn retire_facility(world: &mut World, facility: FacilityId) -> Result<Option<DebtId>, Rejection> {
    let f = world.facility(facility)?;
    match f.state {
        FacilityState::Retired => return Err(Rejection::AlreadyRetired),
        FacilityState::Building => return Err(Rejection::FacilityNotActive),
        FacilityState::Active | FacilityState::Shutdown => {}
    }
    if f.in_transit.is_some() {
        return Err(Rejection::InTransit);
    }
    let amount = unamortized_energy(f);
    let owner = f.owner;
    let research = f.research.as_ref().map_or(0, |r| r.energy);
    let week = world.week;

    world.ledger.record(
        week,
        LedgerKind::Consumption,
        research,
        Account::Research(facility),
        Account::Sink,
    );
    let f = &mut world.facilities[facility.index()];
    f.research = None;
    f.state = FacilityState::Retired;
    world.current.pending_production.remove(&facility);
    world.current.pending_research.remove(&facility);
    if amount == 0 {
        return Ok(None);
    }
    let id = DebtId(world.debts.len() as u32);
    world.debts.push(EnergyDebt {
        id,
        debtor: owner,
        amount,
        remaining: amount,
        origin_facility: facility,
        created_week: week,
        settlement: DebtSettlement::Open,
        assumed_by: Vec::new(),
    });
    world.actors[owner.index()].outstanding_debts.push(id);
    world.ledger.record(
        week,
        LedgerKind::DebtCreated,
        amount,
        Account::Facility(facility),
        Account::Debt(id),
    );
    Ok(Some(id))
}

/// Closes `qty` kWh of a debt onto `bearer`: the bearer takes the energy
/// and consumes it.
pub(crate) fn discharge_debt(world: &mut World, debt: DebtId, bearer: ActorId, qty: u64) {
    let week = world.week;
    let d = &mut world.debts[debt.index()];
    d.remaining -= qty;
    let debtor = d.debtor;
    let closed = d.remaining == 0;
    world.ledger.record(
        week,
        LedgerKind::DebtSettled,
        qty,
        Account::Debt(debt),
        Account::Actor(bearer),
    );
    world.ledger.record(
        week,
        LedgerKind::Consumption,
        qty,
        Account::Actor(bearer),
        Account::Sink,
    );
    if closed {
        world.actors[debtor.index()].outstanding_debts.retain(|x| *x != debt);
    }
}

fn open_debt(world: &World, debtor: ActorId, debt: DebtId) -> Result<&EnergyDebt, Rejection> {
    let d = world.debts.get(debt.index()).ok_or(Rejection::UnknownDebt)?;
    if d.debtor != debtor {
        return Err(Rejection::NotOwner);
    }
    if d.remaining == 0 {
        return Err(Rejection::DebtSettled);
    }
    if matches!(d.settlement, DebtSettlement::AllowanceReduction { .. }) {
        return Err(Rejection::DebtRouteLocked);
    }
    Ok(d)
}

/// Settles (part of) a debt by one of the three routes. Returns the trades
/// it caused. Any rejection leaves the world untouched.
pub fn settle_debt(
    world: &mut World,
    debtor: ActorId,
    debt: DebtId,
    route: SettleRoute,
) -> Result<Vec<Trade>, Rejection> {
    let remaining = open_debt(world, debtor, debt)?.remaining;
    match route {
        SettleRoute::Buyback => {
            let (trade, lots) = market::grid_buy_lots(world, debtor, remaining)?;
            let week = world.week;
            let mut donated: u128 = 0;
            for lot in lots {
                donated += lot.embodied_total();
                world.actors[debtor.index()].inventory.remove(&lot.key, lot.quantity)?;
                world.actors[GOVERNMENT.index()].inventory.add_lot(lot);
            }
            world.ledger.record_u128(
                week,
                LedgerKind::EmbodimentTransfer,
                donated,
                Account::Actor(debtor),
                Account::Actor(GOVERNMENT),
            );
            discharge_debt(world, debt, debtor, remaining);
            world.debts[debt.index()].settlement = DebtSettlement::Buyback;
            Ok(alloc::vec![trade])
        }
        SettleRoute::Sell { price } => {
            let req = market::OrderRequest {
                actor: debtor,
                side: Side::Bid,
                venue: Venue::Global,
                good: GoodKind::DebtAssumption,
                quantity: remaining,
                limit_price: price,
                site: None,
                embodied_per_unit: None,
                debt: Some(debt),
            };
            let trades = market::submit_order_ioc(world, req)?;
            if trades.is_empty() {
                return Err(Rejection::NoCounterparty);
            }
            Ok(trades)
        }
        SettleRoute::AllowanceReduction => {
            let a = &world.actors[debtor.index()];
            let allowance = policy::base_allowance(world, debtor);
            if a.kind != ActorKind::Player || allowance == 0 {
                return Err(Rejection::RouteIneligible);
            }
            let per_week = world.constants.debt_reduction_fraction.mul_floor(allowance).max(1);
            world.debts[debt.index()].settlement = DebtSettlement::AllowanceReduction { per_week };
            Ok(Vec::new())
        }
    }
}

/// Week-end realization of allowance reductions. Each actor can absorb at
/// most its base allowance plus tokens per week; the rest carries over.
pub fn realize_allowance_reductions(world: &mut World) -> u64 {
    let mut total = 0;
    let mut budgets: BTreeMap<ActorId, u64> = BTreeMap::new();
    for i in 0..world.debts.len() {
        let Some(per_week) = world.debts[i].reduction_per_week() else {
            continue;
        };
        let debtor = world.debts[i].debtor;
        let budget = budgets.entry(debtor).or_insert_with(|| {
            policy::base_allowance(world, debtor) + world.actors[debtor.index()].allowance_tokens_held(world.week)
        });
        let r = per_week.min(world.debts[i].remaining).min(*budget);
        *budget -= r;
        if r > 0 {
            discharge_debt(world, DebtId(i as u32), debtor, r);
            total += r;
        }
    }
    total
}

pub fn outstanding_debt_kwh(world: &World) -> u128 {
    world.debts.iter().map(|d| d.remaining as u128).sum()
}

// ---------------------------------------------------------------------------
// Stock and drift

/// Embodied energy currently held by every non-empty account.
pub fn account_stock(world: &World) -> BTreeMap<Account, u128> {
    let mut out: BTreeMap<Account, u128> = BTreeMap::new();
    let mut add = |acc: Account, v: u128| {
        if v > 0 {
            *out.entry(acc).or_insert(0) += v;
        }
    };
    for a in &world.actors {
        add(Account::Actor(a.id), a.inventory.embodied_total());
    }
    for book in world.books.values() {
        for o in book.orders() {
            if let Some(k) = &o.escrow {
                add(
                    Account::Actor(o.actor),
                    k.embodied_per_unit as u128 * o.quantity as u128,
                );
            }
        }
    }
    for f in &world.facilities {
        add(Account::Facility(f.id), unamortized_energy(f) as u128);
        if let Some(r) = &f.research {
            add(Account::Research(f.id), r.energy as u128);
        }
    }
    for s in world.shipments.iter().filter(|s| !s.delivered) {
        add(Account::Shipment(s.id), s.cargo.embodied_total());
    }
    for d in &world.debts {
        add(Account::Debt(d.id), d.remaining as u128);
    }
    out
}

pub fn stock_total(world: &World) -> u128 {
    account_stock(world).values().sum()
}

/// Σ generation + Σ injection − Σ consumption − Σ stock. Zero when every
/// embodied kWh is accounted for.
pub fn ledger_balance(world: &World) -> i128 {
    let l = &world.ledger;
    (l.generated + l.injected) as i128 - l.consumed as i128 - stock_total(world) as i128
}

/// Accounts whose journal balance differs from their recomputed stock.
pub fn account_mismatches(world: &World) -> Vec<(Account, i128, u128)> {
    let journal = replay_balances(&world.ledger.entries);
    let stock = account_stock(world);
    let mut keys: Vec<Account> = journal.keys().chain(stock.keys()).copied().collect();
    keys.sort();
    keys.dedup();
    keys.into_iter()
        .filter_map(|k| {
            let j = journal.get(&k).copied().unwrap_or(0);
            let s = stock.get(&k).copied().unwrap_or(0);
            (j != s as i128).then_some((k, j, s))
        })
        .collect()
}

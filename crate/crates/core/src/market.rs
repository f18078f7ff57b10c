//! Order books, settlement, direct trades and the government grid.
//!
//! Books match continuously in price-time priority and trade at the
//! resting order's price. Asks for goods are escrowed out of the seller's
//! inventory while they rest. Every fill is settled through a callback so
//! the book itself stays a pure data structure.

use core::cmp::Reverse;
use core::fmt;
use core::str::FromStr;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Rejection;
use crate::goods::{GoodKind, ItemLot, LotKey};
use crate::ids::{ActorId, DebtId, RegionId, SiteId, GOVERNMENT};
use crate::ledger::{self, Account, AcquisitionSource, DebtSettlement, LedgerKind};
use crate::policy;
use crate::world::{ActorKind, World};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Bid,
    Ask,
}

impl Side {
    pub fn opposite(self) -> Side {
        match self {
            Side::Bid => Side::Ask,
            Side::Ask => Side::Bid,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Venue {
    Regional(RegionId),
    Global,
}

impl fmt::Display for Venue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Venue::Regional(r) => write!(f, "regional:{}", r.0),
            Venue::Global => f.write_str("global"),
        }
    }
}

impl FromStr for Venue {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "global" {
            return Ok(Venue::Global);
        }
        s.strip_prefix("regional:")
            .and_then(|n| n.parse().ok())
            .map(|n| Venue::Regional(RegionId(n)))
            .ok_or_else(|| alloc::format!("invalid venue {s:?}"))
    }
}

impl Serialize for Venue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Venue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BookKey {
    pub venue: Venue,
    pub good: GoodKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub id: u64,
    pub actor: ActorId,
    pub side: Side,
    pub venue: Venue,
    pub good: GoodKind,
    pub quantity: u64,
    pub limit_price: u64,
    pub seq: u64,
    /// Escrowed lot identity for asks on goods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escrow: Option<LotKey>,
    /// Debt to be assumed, for debt-assumption bids.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub debt: Option<DebtId>,
}

impl Order {
    fn crosses(&self, resting: &Order) -> bool {
        match self.side {
            Side::Bid => resting.limit_price <= self.limit_price,
            Side::Ask => resting.limit_price >= self.limit_price,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Level {
    pub price: u64,
    pub quantity: u64,
}

/// Aggregated best levels; bids descending, asks ascending.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Depth {
    pub bids: Vec<Level>,
    pub asks: Vec<Level>,
}

impl Depth {
    pub fn is_empty(&self) -> bool {
        self.bids.is_empty() && self.asks.is_empty()
    }

    pub fn best_ask(&self) -> Option<Level> {
        self.asks.first().copied()
    }

    pub fn best_bid(&self) -> Option<Level> {
        self.bids.first().copied()
    }
}

/// What settlement decided about one proposed fill.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FillOutcome {
    Filled,
    /// Cancel the incoming order's remainder.
    KillIncoming,
    /// Remove the resting order and continue matching.
    KillResting,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fill {
    pub resting_id: u64,
    pub resting_actor: ActorId,
    pub incoming_id: u64,
    pub quantity: u64,
    pub price: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Remainder {
    None,
    Rested,
    /// Not rested: immediate-or-cancel, or it would cross the submitter's
    /// own resting orders.
    Cancelled(Order),
    Killed(Order),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatchOutcome {
    pub fills: Vec<Fill>,
    pub remainder: Remainder,
    pub killed_resting: Vec<Order>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OrderBook {
    bids: BTreeMap<(Reverse<u64>, u64), Order>,
    asks: BTreeMap<(u64, u64), Order>,
}

#[derive(Serialize, Deserialize)]
struct BookRepr {
    bids: Vec<Order>,
    asks: Vec<Order>,
}

impl Serialize for OrderBook {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        BookRepr {
            bids: self.bids.values().cloned().collect(),
            asks: self.asks.values().cloned().collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for OrderBook {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let r = BookRepr::deserialize(d)?;
        let mut b = OrderBook::default();
        for o in r.bids.into_iter().chain(r.asks) {
            b.rest(o);
        }
        Ok(b)
    }
}

impl OrderBook {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rest(&mut self, order: Order) {
        match order.side {
            Side::Bid => {
                self.bids.insert((Reverse(order.limit_price), order.seq), order);
            }
            Side::Ask => {
                self.asks.insert((order.limit_price, order.seq), order);
            }
        }
    }

    pub fn is_empty(&self) -> bool {
        self.bids.is_empty() && self.asks.is_empty()
    }

    /// Bids in priority order.
    pub fn bids(&self) -> impl Iterator<Item = &Order> {
        self.bids.values()
    }

    /// Asks in priority order.
    pub fn asks(&self) -> impl Iterator<Item = &Order> {
        self.asks.values()
    }

    pub fn orders(&self) -> impl Iterator<Item = &Order> {
        self.bids.values().chain(self.asks.values())
    }

    pub fn best_bid(&self) -> Option<&Order> {
        self.bids.values().next()
    }

    pub fn best_ask(&self) -> Option<&Order> {
        self.asks.values().next()
    }

    /// True when the best bid is at or above the best ask.
    pub fn is_crossed(&self) -> bool {
        match (self.best_bid(), self.best_ask()) {
            (Some(b), Some(a)) => b.limit_price >= a.limit_price,
            _ => false,
        }
    }

    pub fn depth(&self, levels: usize) -> Depth {
        fn agg<'a>(it: impl Iterator<Item = &'a Order>, n: usize) -> Vec<Level> {
            let mut out: Vec<Level> = Vec::new();
            for o in it {
                if let Some(l) = out.last_mut().filter(|l| l.price == o.limit_price) {
                    l.quantity = l.quantity.saturating_add(o.quantity);
                } else if out.len() == n {
                    break;
                } else {
                    out.push(Level {
                        price: o.limit_price,
                        quantity: o.quantity,
                    });
                }
            }
            out
        }
        Depth {
            bids: agg(self.bids.values(), levels),
            asks: agg(self.asks.values(), levels),
        }
    }

    pub fn drain(&mut self) -> Vec<Order> {
        let mut out: Vec<Order> = core::mem::take(&mut self.bids).into_values().collect();
        out.extend(core::mem::take(&mut self.asks).into_values());
        out
    }

    fn next_counterparty(&self, incoming: &Order) -> Option<Order> {
        let pick = |o: &&Order| o.actor != incoming.actor;
        match incoming.side {
            Side::Bid => self
                .asks
                .values()
                .take_while(|o| incoming.crosses(o))
                .find(pick)
                .cloned(),
            Side::Ask => self
                .bids
                .values()
                .take_while(|o| incoming.crosses(o))
                .find(pick)
                .cloned(),
        }
    }

    fn crosses_any(&self, incoming: &Order) -> bool {
        match incoming.side {
            Side::Bid => self.best_ask().is_some_and(|o| incoming.crosses(o)),
            Side::Ask => self.best_bid().is_some_and(|o| incoming.crosses(o)),
        }
    }

    fn remove(&mut self, o: &Order) {
        match o.side {
            Side::Bid => {
                self.bids.remove(&(Reverse(o.limit_price), o.seq));
            }
            Side::Ask => {
                self.asks.remove(&(o.limit_price, o.seq));
            }
        }
    }

    fn reduce(&mut self, o: &Order, by: u64) {
        let slot = match o.side {
            Side::Bid => self.bids.get_mut(&(Reverse(o.limit_price), o.seq)),
            Side::Ask => self.asks.get_mut(&(o.limit_price, o.seq)),
        };
        if let Some(r) = slot {
            r.quantity -= by;
            if r.quantity == 0 {
                self.remove(o);
            }
        }
    }

    /// Matches `incoming` against the opposite side. `settle(resting,
    /// incoming, qty, price)` decides each proposed fill. With `rest` the
    /// unfilled remainder rests unless it would cross the submitter's own
    /// orders.
    pub fn match_order(
        &mut self,
        mut incoming: Order,
        rest: bool,
        mut settle: impl FnMut(&Order, &Order, u64, u64) -> FillOutcome,
    ) -> MatchOutcome {
        let mut fills = Vec::new();
        let mut killed_resting = Vec::new();
        while incoming.quantity > 0 {
            let Some(resting) = self.next_counterparty(&incoming) else {
                break;
            };
            let qty = incoming.quantity.min(resting.quantity);
            let price = resting.limit_price;
            match settle(&resting, &incoming, qty, price) {
                FillOutcome::Filled => {
                    self.reduce(&resting, qty);
                    incoming.quantity -= qty;
                    fills.push(Fill {
                        resting_id: resting.id,
                        resting_actor: resting.actor,
                        incoming_id: incoming.id,
                        quantity: qty,
                        price,
                    });
                }
                FillOutcome::KillResting => {
                    self.remove(&resting);
                    killed_resting.push(resting);
                }
                FillOutcome::KillIncoming => {
                    return MatchOutcome {
                        fills,
                        remainder: Remainder::Killed(incoming),
                        killed_resting,
                    };
                }
            }
        }
        let remainder = if incoming.quantity == 0 {
            Remainder::None
        } else if !rest || self.crosses_any(&incoming) {
            Remainder::Cancelled(incoming)
        } else {
            self.rest(incoming);
            Remainder::Rested
        };
        MatchOutcome {
            fills,
            remainder,
            killed_resting,
        }
    }
}

/// Reference matcher: linear scans over a plain list, every fill accepted.
pub mod oracle {
    use super::*;

    /// Replays `orders` in sequence and returns every fill, using the
    /// rules of [`OrderBook::match_order`] with `rest = true`.
    pub fn clear(orders: &[Order]) -> (Vec<Fill>, Vec<Order>) {
        let mut resting: Vec<Order> = Vec::new();
        let mut fills = Vec::new();
        for o in orders {
            let mut inc = o.clone();
            loop {
                if inc.quantity == 0 {
                    break;
                }
                let mut best: Option<usize> = None;
                for (i, r) in resting.iter().enumerate() {
                    if r.side == inc.side || r.actor == inc.actor {
                        continue;
                    }
                    let crosses = match inc.side {
                        Side::Bid => r.limit_price <= inc.limit_price,
                        Side::Ask => r.limit_price >= inc.limit_price,
                    };
                    if !crosses {
                        continue;
                    }
                    let better = match best {
                        None => true,
                        Some(j) => {
                            let b = &resting[j];
                            let price_better = match inc.side {
                                Side::Bid => r.limit_price < b.limit_price,
                                Side::Ask => r.limit_price > b.limit_price,
                            };
                            price_better || (r.limit_price == b.limit_price && r.seq < b.seq)
                        }
                    };
                    if better {
                        best = Some(i);
                    }
                }
                let Some(i) = best else { break };
                let q = inc.quantity.min(resting[i].quantity);
                fills.push(Fill {
                    resting_id: resting[i].id,
                    resting_actor: resting[i].actor,
                    incoming_id: inc.id,
                    quantity: q,
                    price: resting[i].limit_price,
                });
                inc.quantity -= q;
                resting[i].quantity -= q;
                if resting[i].quantity == 0 {
                    resting.remove(i);
                }
            }
            if inc.quantity > 0 {
                let self_cross = resting.iter().any(|r| {
                    r.side != inc.side
                        && match inc.side {
                            Side::Bid => r.limit_price <= inc.limit_price,
                            Side::Ask => r.limit_price >= inc.limit_price,
                        }
                });
                if !self_cross {
                    resting.push(inc);
                }
            }
        }
        (fills, resting)
    }
}

// ---------------------------------------------------------------------------
// Trades and settlement

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Book,
    Direct,
    Grid,
}

/// One executed trade. The first seven fields form the trade tape record.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trade {
    pub week: u32,
    pub good: GoodKind,
    pub quantity: u64,
    /// Cents per unit.
    pub price: u64,
    pub buyer: ActorId,
    pub seller: ActorId,
    pub tax_charged: u64,
    pub channel: Channel,
    pub venue: Option<Venue>,
    /// Total cents paid by the buyer to the seller.
    pub value_cents: u64,
    pub embodied_per_unit: u64,
    pub buy_order: Option<u64>,
    pub sell_order: Option<u64>,
    pub debt: Option<DebtId>,
}

/// Rejected action, for the exploit-audit stream.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditRecord {
    pub week: u32,
    pub actor: ActorId,
    pub index: u32,
    pub action: String,
    pub reason: Rejection,
}

/// Pending half of a direct trade, waiting for the counterparty's matching
/// offer within the same week.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectIntent {
    pub from: ActorId,
    pub counterparty: ActorId,
    pub role: Side,
    pub lot: ItemLot,
    pub price: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Party {
    Buyer,
    Seller,
}

struct Leg<'a> {
    buyer: ActorId,
    seller: ActorId,
    good: &'a GoodKind,
    /// Lot identity for goods; already out of the seller's inventory.
    lot: Option<&'a LotKey>,
    debt: Option<DebtId>,
    quantity: u64,
    price: u64,
    channel: Channel,
    venue: Option<Venue>,
    buy_order: Option<u64>,
    sell_order: Option<u64>,
}

fn acquisition_source(good: &GoodKind) -> AcquisitionSource {
    match good {
        GoodKind::Energy => AcquisitionSource::Purchase,
        _ => AcquisitionSource::EmbodiedItem,
    }
}

fn record_tax(world: &mut World, payer: ActorId, acquired: u64, a: policy::TaxAssessment) -> Result<(), Rejection> {
    world.transfer_money(payer, GOVERNMENT, a.tax_cents)?;
    world.current.energy_purchased += acquired;
    world.current.taxed_kwh += a.taxed_kwh;
    world.current.tax_revenue += a.tax_cents;
    Ok(())
}

/// Settles one fill. Checks come first, so an error leaves the world as it was.
fn settle_leg(world: &mut World, leg: &Leg<'_>) -> Result<Trade, (Party, Rejection)> {
    let cost = leg
        .quantity
        .checked_mul(leg.price)
        .ok_or((Party::Buyer, Rejection::Overflow))?;
    let week = world.week;
    if *leg.good == GoodKind::DebtAssumption {
        let d = leg.debt.ok_or((Party::Buyer, Rejection::InvalidOrder))?;
        let debt = &world.debts[d.index()];
        if debt.remaining < leg.quantity || matches!(debt.settlement, DebtSettlement::AllowanceReduction { .. }) {
            return Err((Party::Buyer, Rejection::DebtSettled));
        }
        if world.actors[leg.buyer.index()].money < cost {
            return Err((Party::Buyer, Rejection::Insolvent));
        }
        let tax = policy::assess_for(world, leg.seller, leg.quantity);
        if (world.actors[leg.seller.index()].money as u128 + cost as u128) < tax.tax_cents as u128 {
            return Err((Party::Seller, Rejection::TaxInsolvent));
        }
        let fail = |e| (Party::Buyer, e);
        world.transfer_money(leg.buyer, leg.seller, cost).map_err(fail)?;
        record_tax(world, leg.seller, leg.quantity, tax).map_err(fail)?;
        ledger::charge_energy_acquisition(world, leg.seller, leg.quantity, AcquisitionSource::DebtAssumed);
        ledger::discharge_debt(world, d, leg.seller, leg.quantity);
        let debt = &mut world.debts[d.index()];
        debt.assumed_by.push((leg.seller, leg.quantity));
        if debt.remaining == 0 {
            debt.settlement = DebtSettlement::Sold { to: leg.seller };
        }
        return Ok(Trade {
            week,
            good: GoodKind::DebtAssumption,
            quantity: leg.quantity,
            price: leg.price,
            buyer: leg.buyer,
            seller: leg.seller,
            tax_charged: tax.tax_cents,
            channel: leg.channel,
            venue: leg.venue,
            value_cents: cost,
            embodied_per_unit: 0,
            buy_order: leg.buy_order,
            sell_order: leg.sell_order,
            debt: Some(d),
        });
    }

    let key = leg.lot.ok_or((Party::Seller, Rejection::InvalidOrder))?;
    let energy = u64::try_from(key.embodied_per_unit as u128 * leg.quantity as u128)
        .map_err(|_| (Party::Buyer, Rejection::Overflow))?;
    let tax = policy::assess_for(world, leg.buyer, energy);
    let money = world.actors[leg.buyer.index()].money as u128;
    if money < cost as u128 {
        return Err((Party::Buyer, Rejection::Insolvent));
    }
    if money < cost as u128 + tax.tax_cents as u128 {
        return Err((Party::Buyer, Rejection::TaxInsolvent));
    }
    let fail = |e| (Party::Buyer, e);
    world.transfer_money(leg.buyer, leg.seller, cost).map_err(fail)?;
    record_tax(world, leg.buyer, energy, tax).map_err(fail)?;
    world.actors[leg.buyer.index()].inventory.add(key.clone(), leg.quantity);
    world.ledger.record(
        week,
        LedgerKind::EmbodimentTransfer,
        energy,
        Account::Actor(leg.seller),
        Account::Actor(leg.buyer),
    );
    ledger::charge_energy_acquisition(world, leg.buyer, energy, acquisition_source(leg.good));
    Ok(Trade {
        week,
        good: leg.good.clone(),
        quantity: leg.quantity,
        price: leg.price,
        buyer: leg.buyer,
        seller: leg.seller,
        tax_charged: tax.tax_cents,
        channel: leg.channel,
        venue: leg.venue,
        value_cents: cost,
        embodied_per_unit: key.embodied_per_unit,
        buy_order: leg.buy_order,
        sell_order: leg.sell_order,
        debt: None,
    })
}

/// An order as an agent submits it; the engine assigns id and sequence.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderRequest {
    pub actor: ActorId,
    pub side: Side,
    pub venue: Venue,
    pub good: GoodKind,
    pub quantity: u64,
    pub limit_price: u64,
    /// Asks on physical goods: where the lot is (default: home site).
    pub site: Option<SiteId>,
    /// Asks on goods: which lot (default: lowest embodied lot with enough
    /// quantity).
    pub embodied_per_unit: Option<u64>,
    /// Debt-assumption bids: the debt to hand over.
    pub debt: Option<DebtId>,
}

fn check_instrument(world: &World, actor: ActorId, good: &GoodKind) -> Result<(), Rejection> {
    let regime = world.regime_of(actor);
    match good {
        GoodKind::PollutionRight { valid_week } | GoodKind::AllowanceToken { valid_week }
            if *valid_week != world.week =>
        {
            Err(Rejection::InvalidOrder)
        }
        GoodKind::PollutionRight { .. } if !regime.quota_trade_enabled => Err(Rejection::TradeDisabled),
        GoodKind::AllowanceToken { .. } if !regime.allowance_sale_enabled => Err(Rejection::TradeDisabled),
        GoodKind::License(i) if world.innovations.get(i.index()).is_none() => Err(Rejection::UnknownInnovation),
        _ => Ok(()),
    }
}

fn check_sellable(world: &World, actor: ActorId, good: &GoodKind, qty: u64) -> Result<(), Rejection> {
    let limit = match good {
        GoodKind::PollutionRight { .. } => policy::sellable_rights(world, actor),
        GoodKind::AllowanceToken { .. } => policy::sellable_tokens(world, actor),
        _ => return Ok(()),
    };
    if qty > limit {
        return Err(Rejection::InstrumentNotSellable);
    }
    Ok(())
}

fn trader(world: &World, actor: ActorId) -> Result<(), Rejection> {
    if world.actor(actor)?.kind == ActorKind::Government {
        return Err(Rejection::GovernmentNotPermitted);
    }
    Ok(())
}

/// Resolves the lot an ask refers to.
fn ask_lot(world: &World, req: &OrderRequest) -> Result<LotKey, Rejection> {
    let a = &world.actors[req.actor.index()];
    let site = if req.good.is_physical() {
        Some(req.site.unwrap_or(a.home_site))
    } else {
        if req.site.is_some() {
            return Err(Rejection::InvalidOrder);
        }
        None
    };
    if let Some(s) = site {
        world.site(s)?;
    }
    let key = match req.embodied_per_unit {
        Some(e) => LotKey::new(req.good.clone(), site, e),
        None => a
            .inventory
            .iter()
            .find(|(k, q)| k.good == req.good && k.site == site && *q >= req.quantity)
            .map(|(k, _)| k.clone())
            .ok_or(Rejection::MissingGoods)?,
    };
    if a.inventory.quantity(&key) < req.quantity {
        return Err(Rejection::MissingGoods);
    }
    Ok(key)
}

fn validate_request(world: &World, req: &OrderRequest) -> Result<Option<LotKey>, Rejection> {
    trader(world, req.actor)?;
    if req.quantity == 0 {
        return Err(Rejection::InvalidQuantity);
    }
    if let Venue::Regional(r) = req.venue {
        world.regions.get(r.index()).ok_or(Rejection::UnknownRegion)?;
    }
    check_instrument(world, req.actor, &req.good)?;
    if req.good == GoodKind::DebtAssumption {
        if req.venue != Venue::Global || req.site.is_some() || req.embodied_per_unit.is_some() {
            return Err(Rejection::InvalidOrder);
        }
        match req.side {
            Side::Bid => {
                let d = req.debt.ok_or(Rejection::InvalidOrder)?;
                let debt = world.debts.get(d.index()).ok_or(Rejection::UnknownDebt)?;
                if debt.debtor != req.actor {
                    return Err(Rejection::NotOwner);
                }
                if debt.remaining == 0 {
                    return Err(Rejection::DebtSettled);
                }
                if matches!(debt.settlement, DebtSettlement::AllowanceReduction { .. }) {
                    return Err(Rejection::DebtRouteLocked);
                }
                if req.quantity > debt.remaining {
                    return Err(Rejection::InvalidQuantity);
                }
            }
            Side::Ask => {
                if req.debt.is_some() {
                    return Err(Rejection::InvalidOrder);
                }
            }
        }
    } else if req.debt.is_some() {
        return Err(Rejection::InvalidOrder);
    }
    match req.side {
        Side::Bid => {
            let need = req.quantity as u128 * req.limit_price as u128;
            let committed = world.current.bid_commitments.get(&req.actor).copied().unwrap_or(0);
            if (world.actors[req.actor.index()].money as u128) < need + committed {
                return Err(Rejection::Insolvent);
            }
            Ok(None)
        }
        Side::Ask if req.good == GoodKind::DebtAssumption => Ok(None),
        Side::Ask => {
            check_sellable(world, req.actor, &req.good, req.quantity)?;
            ask_lot(world, req).map(Some)
        }
    }
}

fn return_escrow(world: &mut World, order: &Order) {
    if let Some(k) = &order.escrow {
        world.actors[order.actor.index()]
            .inventory
            .add(k.clone(), order.quantity);
    }
}

fn submit_inner(world: &mut World, req: OrderRequest, rest: bool) -> Result<Vec<Trade>, Rejection> {
    let escrow = validate_request(world, &req)?;
    if let Some(k) = &escrow {
        world.actors[req.actor.index()].inventory.remove(k, req.quantity)?;
    }
    let id = world.next_order_id;
    world.next_order_id += 1;
    let order = Order {
        id,
        actor: req.actor,
        side: req.side,
        venue: req.venue,
        good: req.good.clone(),
        quantity: req.quantity,
        limit_price: req.limit_price,
        seq: id,
        escrow,
        debt: req.debt,
    };
    let (actor, side, quantity, limit_price) = (req.actor, req.side, req.quantity, req.limit_price);
    let key = BookKey {
        venue: req.venue,
        good: req.good,
    };
    let mut book = world.books.remove(&key).unwrap_or_default();
    let mut trades = Vec::new();
    let outcome = book.match_order(order, rest, |resting, incoming, qty, price| {
        let (bid, ask) = match incoming.side {
            Side::Bid => (incoming, resting),
            Side::Ask => (resting, incoming),
        };
        let leg = Leg {
            buyer: bid.actor,
            seller: ask.actor,
            good: &key.good,
            lot: ask.escrow.as_ref(),
            debt: bid.debt,
            quantity: qty,
            price,
            channel: Channel::Book,
            venue: Some(key.venue),
            buy_order: Some(bid.id),
            sell_order: Some(ask.id),
        };
        match settle_leg(world, &leg) {
            Ok(t) => {
                trades.push(t);
                FillOutcome::Filled
            }
            Err((party, _)) => {
                let incoming_party = match incoming.side {
                    Side::Bid => Party::Buyer,
                    Side::Ask => Party::Seller,
                };
                if party == incoming_party {
                    FillOutcome::KillIncoming
                } else {
                    FillOutcome::KillResting
                }
            }
        }
    });
    for f in &outcome.fills {
        if side == Side::Ask {
            release_commitment(world, f.resting_actor, f.quantity as u128 * f.price as u128);
        }
    }
    for o in &outcome.killed_resting {
        return_escrow(world, o);
        if o.side == Side::Bid {
            release_commitment(world, o.actor, o.quantity as u128 * o.limit_price as u128);
        }
    }
    if side == Side::Bid && matches!(outcome.remainder, Remainder::Rested) {
        let filled: u64 = outcome.fills.iter().map(|f| f.quantity).sum();
        let left = (quantity - filled) as u128 * limit_price as u128;
        *world.current.bid_commitments.entry(actor).or_default() += left;
    }
    match &outcome.remainder {
        Remainder::Cancelled(o) | Remainder::Killed(o) => return_escrow(world, o),
        Remainder::None | Remainder::Rested => {}
    }
    if !book.is_empty() {
        world.books.insert(key, book);
    }
    world.current.tape.extend(trades.iter().cloned());
    Ok(trades)
}

fn release_commitment(world: &mut World, actor: ActorId, amount: u128) {
    if let Some(c) = world.current.bid_commitments.get_mut(&actor) {
        *c = c.saturating_sub(amount);
        if *c == 0 {
            world.current.bid_commitments.remove(&actor);
        }
    }
}

/// Submits an order; the unfilled remainder rests until week end.
pub fn submit_order(world: &mut World, req: OrderRequest) -> Result<Vec<Trade>, Rejection> {
    submit_inner(world, req, true)
}

/// Submits an order whose unfilled remainder is cancelled.
pub fn submit_order_ioc(world: &mut World, req: OrderRequest) -> Result<Vec<Trade>, Rejection> {
    submit_inner(world, req, false)
}

/// Cancels every resting order and returns escrowed goods.
pub fn cancel_all_orders(world: &mut World) -> usize {
    let books = core::mem::take(&mut world.books);
    world.current.bid_commitments.clear();
    let mut n = 0;
    for (_, mut book) in books {
        for o in book.drain() {
            return_escrow(world, &o);
            n += 1;
        }
    }
    n
}

/// Bilateral trade outside the books, settled exactly like a book fill.
pub fn direct_trade(
    world: &mut World,
    seller: ActorId,
    buyer: ActorId,
    lot: &ItemLot,
    price: u64,
) -> Result<Trade, Rejection> {
    trader(world, seller)?;
    trader(world, buyer)?;
    if seller == buyer {
        return Err(Rejection::InvalidOrder);
    }
    if lot.quantity == 0 {
        return Err(Rejection::InvalidQuantity);
    }
    if !lot.key.good.is_lot_good() {
        return Err(Rejection::InvalidOrder);
    }
    if lot.key.good.is_physical() != lot.key.site.is_some() {
        return Err(Rejection::InvalidOrder);
    }
    check_instrument(world, seller, &lot.key.good)?;
    check_sellable(world, seller, &lot.key.good, lot.quantity)?;
    world.actors[seller.index()].inventory.remove(&lot.key, lot.quantity)?;
    let leg = Leg {
        buyer,
        seller,
        good: &lot.key.good,
        lot: Some(&lot.key),
        debt: None,
        quantity: lot.quantity,
        price,
        channel: Channel::Direct,
        venue: None,
        buy_order: None,
        sell_order: None,
    };
    match settle_leg(world, &leg) {
        Ok(t) => {
            world.current.tape.push(t.clone());
            Ok(t)
        }
        Err((_, e)) => {
            world.actors[seller.index()]
                .inventory
                .add(lot.key.clone(), lot.quantity);
            Err(e)
        }
    }
}

/// Records one half of a direct trade; executes when the counterparty's
/// matching half is already on file.
pub fn offer_direct(world: &mut World, intent: DirectIntent) -> Result<Option<Trade>, Rejection> {
    trader(world, intent.from)?;
    trader(world, intent.counterparty)?;
    if intent.from == intent.counterparty || intent.lot.quantity == 0 {
        return Err(Rejection::InvalidOrder);
    }
    let matching = world.current.direct_intents.iter().position(|o| {
        o.from == intent.counterparty
            && o.counterparty == intent.from
            && o.role == intent.role.opposite()
            && o.lot == intent.lot
            && o.price == intent.price
    });
    match matching {
        Some(i) => {
            let (seller, buyer) = match intent.role {
                Side::Ask => (intent.from, intent.counterparty),
                Side::Bid => (intent.counterparty, intent.from),
            };
            let t = direct_trade(world, seller, buyer, &intent.lot, intent.price)?;
            world.current.direct_intents.remove(i);
            Ok(Some(t))
        }
        None => {
            if intent.role == Side::Ask {
                let have = world.actors[intent.from.index()].inventory.quantity(&intent.lot.key);
                if have < intent.lot.quantity {
                    return Err(Rejection::MissingGoods);
                }
            }
            world.current.direct_intents.push(intent);
            Ok(None)
        }
    }
}

/// Buys `amount` kWh from the grid: pooled government energy first (lowest
/// embodied first), then newly injected bootstrap energy. Returns the trade
/// and the lots delivered.
pub fn grid_buy_lots(world: &mut World, actor: ActorId, amount: u64) -> Result<(Trade, Vec<ItemLot>), Rejection> {
    trader(world, actor)?;
    if amount == 0 {
        return Err(Rejection::InvalidQuantity);
    }
    let gov = &world.actors[GOVERNMENT.index()].inventory;
    let from_pool = amount.min(gov.total_of(&GoodKind::Energy, None));
    let mut lots = gov
        .plan_take(&GoodKind::Energy, None, from_pool)
        .ok_or(Rejection::InsufficientSupply)?;
    let bootstrap = amount - from_pool;
    if bootstrap > world.grid_bootstrap_remaining {
        return Err(Rejection::InsufficientSupply);
    }
    let gepu = world.constants.grid_embodied_per_kwh;
    let injected = bootstrap as u128 * gepu as u128;
    let pooled: u128 = lots.iter().map(ItemLot::embodied_total).sum();
    let energy = u64::try_from(pooled + injected).map_err(|_| Rejection::Overflow)?;
    let price = world.reference_price_of(actor);
    let cost = amount.checked_mul(price).ok_or(Rejection::Overflow)?;
    let tax = policy::assess_for(world, actor, energy);
    if (world.actors[actor.index()].money as u128) < cost as u128 + tax.tax_cents as u128 {
        return Err(if world.actors[actor.index()].money < cost {
            Rejection::Insolvent
        } else {
            Rejection::TaxInsolvent
        });
    }

    let week = world.week;
    world.actors[GOVERNMENT.index()].inventory.remove_lots(&lots)?;
    if bootstrap > 0 {
        world.grid_bootstrap_remaining -= bootstrap;
        world.ledger.record_u128(
            week,
            LedgerKind::GridInjection,
            injected,
            Account::Source,
            Account::Actor(GOVERNMENT),
        );
        lots.push(ItemLot::new(LotKey::new(GoodKind::Energy, None, gepu), bootstrap));
    }
    for lot in &lots {
        world.actors[actor.index()].inventory.add_lot(lot.clone());
    }
    world.ledger.record(
        week,
        LedgerKind::EmbodimentTransfer,
        energy,
        Account::Actor(GOVERNMENT),
        Account::Actor(actor),
    );
    world.transfer_money(actor, GOVERNMENT, cost)?;
    record_tax(world, actor, energy, tax)?;
    ledger::charge_energy_acquisition(world, actor, energy, AcquisitionSource::Purchase);
    let trade = Trade {
        week,
        good: GoodKind::Energy,
        quantity: amount,
        price,
        buyer: actor,
        seller: GOVERNMENT,
        tax_charged: tax.tax_cents,
        channel: Channel::Grid,
        venue: Some(Venue::Regional(world.actors[actor.index()].region)),
        value_cents: cost,
        embodied_per_unit: energy / amount,
        buy_order: None,
        sell_order: None,
        debt: None,
    };
    world.current.tape.push(trade.clone());
    Ok((trade, lots))
}

/// Sells `amount` kWh of the actor's energy to the grid at the buyback
/// fraction of the reference price. Lowest embodied energy goes first.
pub fn grid_sell(world: &mut World, actor: ActorId, amount: u64) -> Result<Trade, Rejection> {
    trader(world, actor)?;
    if amount == 0 {
        return Err(Rejection::InvalidQuantity);
    }
    let lots = world.actors[actor.index()]
        .inventory
        .plan_take(&GoodKind::Energy, None, amount)
        .ok_or(Rejection::MissingGoods)?;
    let region = &world.regions[world.actors[actor.index()].region.index()];
    let gross = amount as u128 * region.reference_price as u128;
    let f = region.grid_buyback_fraction;
    let payment = u64::try_from(gross * f.num() as u128 / f.den() as u128).map_err(|_| Rejection::Overflow)?;
    if world.actors[GOVERNMENT.index()].money < payment {
        return Err(Rejection::InsufficientSupply);
    }
    let energy: u128 = lots.iter().map(ItemLot::embodied_total).sum();
    let week = world.week;
    world.actors[actor.index()].inventory.remove_lots(&lots)?;
    for lot in lots {
        world.actors[GOVERNMENT.index()].inventory.add_lot(lot);
    }
    world.ledger.record_u128(
        week,
        LedgerKind::EmbodimentTransfer,
        energy,
        Account::Actor(actor),
        Account::Actor(GOVERNMENT),
    );
    world.transfer_money(GOVERNMENT, actor, payment)?;
    let trade = Trade {
        week,
        good: GoodKind::Energy,
        quantity: amount,
        price: payment / amount,
        buyer: GOVERNMENT,
        seller: actor,
        tax_charged: 0,
        channel: Channel::Grid,
        venue: Some(Venue::Regional(world.actors[actor.index()].region)),
        value_cents: payment,
        embodied_per_unit: (energy / amount as u128) as u64,
        buy_order: None,
        sell_order: None,
        debt: None,
    };
    world.current.tape.push(trade.clone());
    Ok(trade)
}

/// Grid trade in either direction; buying or selling zero is a no-op.
pub fn grid_trade(world: &mut World, actor: ActorId, side: Side, amount: u64) -> Result<Option<Trade>, Rejection> {
    if amount == 0 {
        trader(world, actor)?;
        return Ok(None);
    }
    match side {
        Side::Bid => grid_buy_lots(world, actor, amount).map(|(t, _)| Some(t)),
        Side::Ask => grid_sell(world, actor, amount).map(Some),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;

    fn order(id: u64, actor: u32, side: Side, qty: u64, price: u64) -> Order {
        Order {
            id,
            actor: ActorId(actor),
            side,
            venue: Venue::Global,
            good: GoodKind::Energy,
            quantity: qty,
            limit_price: price,
            seq: id,
            escrow: None,
            debt: None,
        }
    }

    fn accept(_: &Order, _: &Order, _: u64, _: u64) -> FillOutcome {
        FillOutcome::Filled
    }

    #[test]
    fn ask_rests_on_empty_book() {
        let mut b = OrderBook::new();
        let out = b.match_order(order(1, 1, Side::Ask, 5, 10), true, accept);
        assert!(out.fills.is_empty());
        assert_eq!(out.remainder, Remainder::Rested);
        assert_eq!(b.depth(5).asks, alloc::vec![Level { price: 10, quantity: 5 }]);
    }

    #[test]
    fn trade_at_resting_price() {
        let mut b = OrderBook::new();
        b.match_order(order(1, 1, Side::Ask, 5, 10), true, accept);
        let out = b.match_order(order(2, 2, Side::Bid, 5, 12), true, accept);
        assert_eq!(out.fills.len(), 1);
        assert_eq!((out.fills[0].quantity, out.fills[0].price), (5, 10));
        assert!(b.is_empty());
    }

    #[test]
    fn time_priority_within_level() {
        let mut b = OrderBook::new();
        b.match_order(order(1, 1, Side::Ask, 3, 10), true, accept);
        b.match_order(order(2, 2, Side::Ask, 3, 10), true, accept);
        let out = b.match_order(order(3, 3, Side::Bid, 4, 10), true, accept);
        let got: Vec<(u64, u64)> = out.fills.iter().map(|f| (f.resting_id, f.quantity)).collect();
        assert_eq!(got, alloc::vec![(1, 3), (2, 1)]);
    }

    #[test]
    fn self_match_skipped_and_not_rested_crossed() {
        let mut b = OrderBook::new();
        b.match_order(order(1, 1, Side::Ask, 3, 10), true, accept);
        b.match_order(order(2, 2, Side::Ask, 3, 11), true, accept);
        let out = b.match_order(order(3, 1, Side::Bid, 5, 12), true, accept);
        assert_eq!(out.fills.len(), 1);
        assert_eq!(out.fills[0].resting_id, 2);
        assert!(matches!(out.remainder, Remainder::Cancelled(ref o) if o.quantity == 2));
        assert!(!b.is_crossed());
    }

    #[test]
    fn kill_resting_continues() {
        let mut b = OrderBook::new();
        b.match_order(order(1, 1, Side::Bid, 3, 10), true, accept);
        b.match_order(order(2, 2, Side::Bid, 3, 10), true, accept);
        let out = b.match_order(order(3, 3, Side::Ask, 3, 9), true, |r, _, _, _| {
            if r.id == 1 {
                FillOutcome::KillResting
            } else {
                FillOutcome::Filled
            }
        });
        assert_eq!(out.killed_resting.len(), 1);
        assert_eq!(out.fills[0].resting_id, 2);
    }

    #[test]
    fn oracle_agrees_on_example() {
        let seq = alloc::vec![
            order(1, 1, Side::Ask, 3, 10),
            order(2, 2, Side::Ask, 3, 10),
            order(3, 3, Side::Bid, 4, 10),
        ];
        let (fills, _) = oracle::clear(&seq);
        let mut b = OrderBook::new();
        let mut got = Vec::new();
        for o in seq {
            got.extend(b.match_order(o, true, accept).fills);
        }
        assert_eq!(fills, got);
    }

    #[test]
    fn venue_text() {
        assert_eq!("global".parse::<Venue>().unwrap(), Venue::Global);
        assert_eq!("regional:2".parse::<Venue>().unwrap(), Venue::Regional(RegionId(2)));
        assert_eq!(Venue::Regional(RegionId(2)).to_string(), "regional:2");
    }
}

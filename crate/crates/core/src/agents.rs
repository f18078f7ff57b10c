//! Actions, strategies and the action trust boundary.
//!
//! Strategies see only an [`ObservationView`] and their own memory, and
//! return a bounded list of actions. Actions are applied one at a time;
//! each either takes full effect or is rejected with a reason and leaves
//! the world untouched.

use core::fmt;
use core::str::FromStr;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use rand_core::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::Rejection;
use crate::goods::{GoodKind, ItemLot};
use crate::ids::{ActorId, BlueprintId, DebtId, FacilityId, InnovationId, SiteId};
use crate::ledger::{self, DebtSettlement, SettleRoute};
use crate::market::{self, AuditRecord, DirectIntent, OrderRequest, Side, Venue};
use crate::policy::PolicyRegime;
use crate::production::{self, Blueprint, FacilityClass, FacilityState, InnovationKind};
use crate::ratio::Ratio;
use crate::scenario::StrategySpec;
use crate::serde_seq;
use crate::world::{self, ObservationView, World};

/// Everything an agent can ask the engine to do in one step.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    SubmitOrder {
        side: Side,
        venue: Venue,
        good: GoodKind,
        quantity: u64,
        limit_price: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        site: Option<SiteId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        embodied_per_unit: Option<u64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        debt: Option<DebtId>,
    },
    /// One half of a bilateral trade; executes once the counterparty
    /// offers the mirror image in the same week.
    DirectTrade {
        counterparty: ActorId,
        role: Side,
        lot: ItemLot,
        price: u64,
    },
    GridTrade {
        side: Side,
        quantity: u64,
    },
    BeginConstruction {
        blueprint: BlueprintId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        site: Option<SiteId>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        estimated_units: Option<u64>,
    },
    Produce {
        facility: FacilityId,
        batches: u64,
    },
    TransportDispatch {
        transporter: FacilityId,
        cargo: Vec<ItemLot>,
        to: SiteId,
    },
    ResearchTick {
        lab: FacilityId,
        effort: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<InnovationId>,
    },
    FilePatent {
        lab: FacilityId,
    },
    ApplyLicense {
        facility: FacilityId,
        innovation: InnovationId,
    },
    RetireFacility {
        facility: FacilityId,
    },
    SettleDebt {
        debt: DebtId,
        route: SettleRoute,
    },
    TransferQuotaToCorp {
        corporation: ActorId,
        fraction: Ratio,
    },
    /// Bid for this week's pollution rights.
    BuyRights {
        quantity: u64,
        limit_price: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        venue: Option<Venue>,
    },
    /// Bid for this week's allowance tokens.
    BuyTokens {
        quantity: u64,
        limit_price: u64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        venue: Option<Venue>,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::SubmitOrder { .. } => "submit_order",
            Action::DirectTrade { .. } => "direct_trade",
            Action::GridTrade { .. } => "grid_trade",
            Action::BeginConstruction { .. } => "begin_construction",
            Action::Produce { .. } => "produce",
            Action::TransportDispatch { .. } => "transport_dispatch",
            Action::ResearchTick { .. } => "research_tick",
            Action::FilePatent { .. } => "file_patent",
            Action::ApplyLicense { .. } => "apply_license",
            Action::RetireFacility { .. } => "retire_facility",
            Action::SettleDebt { .. } => "settle_debt",
            Action::TransferQuotaToCorp { .. } => "transfer_quota_to_corp",
            Action::BuyRights { .. } => "buy_rights",
            Action::BuyTokens { .. } => "buy_tokens",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    GreedyProducer,
    Trader,
    QuotaArbitrageur,
    GreenInvestor,
    Scripted,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 5] = [
        StrategyKind::GreedyProducer,
        StrategyKind::Trader,
        StrategyKind::QuotaArbitrageur,
        StrategyKind::GreenInvestor,
        StrategyKind::Scripted,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::GreedyProducer => "greedy_producer",
            StrategyKind::Trader => "trader",
            StrategyKind::QuotaArbitrageur => "quota_arbitrageur",
            StrategyKind::GreenInvestor => "green_investor",
            StrategyKind::Scripted => "scripted",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        Self::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

/// Tunable strategy parameters. Prices in cents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyParams {
    /// Sell price as a multiple of the cost basis.
    pub markup: Ratio,
    /// Highest all-in price per kWh (price plus marginal tax) worth paying,
    /// as a multiple of the regional reference price.
    pub energy_value: Ratio,
    /// Batches to run per producing facility per week.
    pub batches: u64,
    /// Money kept in reserve.
    pub min_money: u64,
    /// Limit price for pollution rights bought to cover production.
    pub rights_price: u64,
    /// Limit unit price for production inputs; 0 never buys inputs.
    pub input_price: u64,
    /// Ask price for pollution rights.
    pub floor_price: u64,
    /// Ask price for allowance tokens; 0 disables selling them.
    pub token_price: u64,
    /// Researcher-weeks of effort per lab per week.
    pub research_effort: u64,
    /// Ask price for spare licences.
    pub license_price: u64,
    /// Units per trader order.
    pub trade_quantity: u64,
    /// Highest unit price a trader pays for goods.
    pub item_value: u64,
    /// Retire facilities this many weeks after construction; 0 never.
    pub retire_after_weeks: u32,
    /// Settle own debts by buyback when affordable.
    pub settle_debts: bool,
}

impl Default for StrategyParams {
    fn default() -> Self {
        StrategyParams {
            markup: Ratio::new(11, 10).unwrap_or(Ratio::ONE),
            energy_value: Ratio::new(3, 2).unwrap_or(Ratio::ONE),
            batches: 10,
            min_money: 0,
            rights_price: 5,
            input_price: 0,
            floor_price: 1,
            token_price: 0,
            research_effort: 1,
            license_price: 100,
            trade_quantity: 10,
            item_value: 0,
            retire_after_weeks: 0,
            settle_debts: true,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Strategy {
    pub kind: StrategyKind,
    pub params: StrategyParams,
    /// Scripted actions by week.
    #[serde(with = "serde_seq")]
    pub script: BTreeMap<u32, Vec<Action>>,
}

impl Strategy {
    pub fn scripted_empty() -> Self {
        Strategy {
            kind: StrategyKind::Scripted,
            params: StrategyParams::default(),
            script: BTreeMap::new(),
        }
    }

    pub fn scripted(script: BTreeMap<u32, Vec<Action>>) -> Self {
        Strategy {
            script,
            ..Self::scripted_empty()
        }
    }

    pub fn new(kind: StrategyKind, params: StrategyParams) -> Self {
        Strategy {
            kind,
            params,
            script: BTreeMap::new(),
        }
    }

    /// Builds a strategy from an already validated spec.
    pub fn from_spec(spec: &StrategySpec) -> Self {
        let mut script: BTreeMap<u32, Vec<Action>> = BTreeMap::new();
        for step in &spec.script {
            script
                .entry(step.week)
                .or_default()
                .extend(step.actions.iter().cloned());
        }
        Strategy {
            kind: spec.kind.parse().unwrap_or(StrategyKind::Scripted),
            params: spec.params.clone(),
            script,
        }
    }
}

/// Per-agent state carried between weeks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentMemory {
    pub weeks_seen: u32,
    /// Last unit price paid per good.
    #[serde(with = "serde_seq")]
    pub paid: BTreeMap<GoodKind, u64>,
}

// ---------------------------------------------------------------------------
// Decision rules

/// Runs the strategy for one week. The result never exceeds the action
/// budget.
pub fn decide<R: RngCore + ?Sized>(
    strategy: &Strategy,
    view: &ObservationView,
    memory: &mut AgentMemory,
    rng: &mut R,
) -> Vec<Action> {
    let mut acts = match strategy.kind {
        StrategyKind::Scripted => strategy.script.get(&view.week).cloned().unwrap_or_default(),
        StrategyKind::GreedyProducer => greedy_producer(&strategy.params, view),
        StrategyKind::Trader => trader(&strategy.params, view, memory, rng),
        StrategyKind::QuotaArbitrageur => quota_arbitrageur(&strategy.params, view),
        StrategyKind::GreenInvestor => green_investor(&strategy.params, view),
    };
    memory.weeks_seen += 1;
    acts.truncate(view.public.constants.action_budget as usize);
    acts
}

/// Schedule position of the actor's next acquired kWh.
pub fn view_tax_position(view: &ObservationView) -> i128 {
    view.own.week_energy_acquired as i128 + view.region().regime.tax_free_allowance as i128
        - view.effective_allowance as i128
}

/// First schedule position whose marginal rate makes a kWh at `price`
/// cost more than `value` all-in; `None` if no position does.
fn affordable_limit(regime: &PolicyRegime, price: u64, value: u64) -> Option<i128> {
    if value < price {
        return Some(i128::MIN);
    }
    let headroom = (value - price) as u128;
    let too_dear = |rate: Ratio| rate.num() as u128 * price as u128 > headroom * rate.den() as u128;
    let mut lower: i128 = 0;
    for b in &regime.brackets {
        let upper = b.upper.map(|u| u.mul_floor(regime.tax_free_allowance) as i128);
        if too_dear(b.rate) {
            return Some(lower);
        }
        lower = lower.max(upper?);
    }
    None
}

/// kWh the actor plans to buy toward a need of `need`: as much as possible
/// while the marginal rate keeps price plus tax within its valuation.
/// Raising any rate can only lower the result.
pub fn planned_energy_purchase(params: &StrategyParams, view: &ObservationView, need: u64) -> u64 {
    let region = view.region();
    let price = region.reference_price;
    let value = params.energy_value.mul_floor(price);
    let pos = view_tax_position(view);
    match affordable_limit(&region.regime, price, value) {
        None => need,
        Some(limit) if limit <= pos => 0,
        Some(limit) => need.min(u64::try_from(limit - pos).unwrap_or(u64::MAX)),
    }
}

/// Embodied energy a blueprint would carry if built now at the home site
/// from the actor's own inventory; `None` if it cannot be built.
pub fn blueprint_embodied_estimate(view: &ObservationView, bp: &Blueprint) -> Option<u128> {
    let inv = &view.own.inventory;
    let mut scratch = inv.clone();
    let mut total = bp.build_energy_direct as u128;
    for lic in &bp.required_licenses {
        let lots = scratch.plan_take(&GoodKind::License(*lic), None, 1)?;
        total += lots.iter().map(ItemLot::embodied_total).sum::<u128>();
        scratch.remove_lots(&lots).ok()?;
    }
    for (good, qty) in &bp.bom {
        let site = good.is_physical().then_some(view.own.home_site);
        let lots = scratch.plan_take(good, site, *qty)?;
        total += lots.iter().map(ItemLot::embodied_total).sum::<u128>();
        scratch.remove_lots(&lots).ok()?;
    }
    Some(total)
}

/// Cheapest buildable blueprint by embodied estimate, ties to the lowest id.
pub fn cheapest_blueprint(view: &ObservationView, keep: impl Fn(&Blueprint) -> bool) -> Option<BlueprintId> {
    view.public
        .blueprints
        .iter()
        .filter(|bp| keep(bp))
        .filter(|bp| bp.build_pollution <= view.available_pollution_quota)
        .filter_map(|bp| blueprint_embodied_estimate(view, bp).map(|e| (e, bp.id)))
        .min()
        .map(|(_, id)| id)
}

fn regional(view: &ObservationView) -> Venue {
    Venue::Regional(view.own.region)
}

fn settle_and_retire(params: &StrategyParams, view: &ObservationView, acts: &mut Vec<Action>) -> Vec<FacilityId> {
    let price = view.region().reference_price;
    let mut money = view.own.money;
    if params.settle_debts {
        for d in &view.debts {
            if d.remaining == 0 || d.settlement != DebtSettlement::Open {
                continue;
            }
            // Room for grid price plus the top marginal rate.
            let cost = (d.remaining as u128) * (price as u128) * 3;
            if cost <= money.saturating_sub(params.min_money) as u128 {
                money -= cost as u64;
                acts.push(Action::SettleDebt {
                    debt: d.id,
                    route: SettleRoute::Buyback,
                });
            }
        }
    }
    let mut retired = Vec::new();
    if params.retire_after_weeks > 0 {
        for f in &view.facilities {
            if f.state != FacilityState::Retired
                && f.in_transit.is_none()
                && view.week.saturating_sub(f.built_week) >= params.retire_after_weeks
            {
                acts.push(Action::RetireFacility { facility: f.id });
                retired.push(f.id);
            }
        }
    }
    retired
}

/// Production planning shared by producers and investors.
fn run_facilities(params: &StrategyParams, view: &ObservationView, retired: &[FacilityId], acts: &mut Vec<Action>) {
    let region = view.region();
    let inv = &view.own.inventory;
    let mut energy_on_hand = inv.total_of(&GoodKind::Energy, None);
    let mut quota = view.available_pollution_quota;
    let mut outputs: Vec<GoodKind> = Vec::new();
    let mut inputs: Vec<GoodKind> = Vec::new();
    let mut buy_total = 0u64;
    let mut produce = Vec::new();
    let mut spend = 0u64;

    for f in &view.facilities {
        if f.state != FacilityState::Active || f.in_transit.is_some() || retired.contains(&f.id) {
            continue;
        }
        let Some(recipe) = f.class.recipe() else { continue };
        outputs.push(recipe.output.clone());
        inputs.extend(recipe.inputs.keys().cloned());
        let mut batches = params.batches;
        for (good, per) in &recipe.inputs {
            if *per == 0 || *good == GoodKind::Energy {
                continue;
            }
            let site = good.is_physical().then_some(f.site);
            let have = inv.total_of(good, site);
            let short = (per.saturating_mul(params.batches)).saturating_sub(have);
            let bought = if short > 0 && f.site == view.own.home_site {
                bid_for_input(params, view, good, short, &mut spend, acts)
            } else {
                0
            };
            batches = batches.min((have + bought) / per);
        }
        let site = &view.public.sites[f.site.index()];
        for (res, per) in &recipe.extract {
            if *per > 0 {
                batches = batches.min(site.deposits.get(res).copied().unwrap_or(0) / per);
            }
        }
        let mult = site.productivity_for(f.class.key());
        let unit_pollution = mult
            .mul_ceil(recipe.output_per_batch)
            .saturating_mul(f.pollution_per_unit);
        if let Some(fit) = quota.checked_div(unit_pollution) {
            if fit < batches {
                let want = (batches - fit) * unit_pollution - quota % unit_pollution;
                let got = buy_rights(params, view, want, &mut spend, acts);
                quota += got;
                batches = batches.min(quota / unit_pollution);
            }
        }
        if let Some(per) = recipe.inputs.get(&GoodKind::Energy).copied().filter(|p| *p > 0) {
            let need = (per.saturating_mul(batches)).saturating_sub(energy_on_hand);
            let buy = planned_energy_purchase(params, view, need.saturating_add(buy_total)).saturating_sub(buy_total);
            buy_total += buy;
            energy_on_hand += buy;
            batches = batches.min(energy_on_hand / per);
            energy_on_hand -= per * batches;
        }
        if batches == 0 {
            continue;
        }
        quota = quota.saturating_sub(unit_pollution.saturating_mul(batches));
        produce.push(Action::Produce {
            facility: f.id,
            batches,
        });
    }

    let price = region.reference_price;
    let spare = view.own.money.saturating_sub(params.min_money).saturating_sub(spend);
    if buy_total > 0 && buy_total.saturating_mul(price) <= spare {
        acts.push(Action::GridTrade {
            side: Side::Bid,
            quantity: buy_total,
        });
    }
    acts.extend(produce);

    // Offer finished goods not needed as inputs.
    for (key, qty) in inv.iter() {
        if !outputs.contains(&key.good) || inputs.contains(&key.good) || qty == 0 {
            continue;
        }
        if key.good == GoodKind::Energy {
            acts.push(Action::GridTrade {
                side: Side::Ask,
                quantity: qty,
            });
            continue;
        }
        let basis = (key.embodied_per_unit as u128 * price as u128).min(u64::MAX as u128) as u64;
        acts.push(Action::SubmitOrder {
            side: Side::Ask,
            venue: regional(view),
            good: key.good.clone(),
            quantity: qty,
            limit_price: params.markup.mul_ceil(basis).max(1),
            site: key.site,
            embodied_per_unit: Some(key.embodied_per_unit),
            debt: None,
        });
    }
}

/// Bids for pollution rights at the strategy's reservation price. Books
/// open empty each week, so bids are placed blind and fill against asks
/// submitted earlier in the week.
fn buy_rights(
    params: &StrategyParams,
    view: &ObservationView,
    want: u64,
    spend: &mut u64,
    acts: &mut Vec<Action>,
) -> u64 {
    if params.rights_price == 0 || !view.region().regime.quota_trade_enabled {
        return 0;
    }
    let spare = view.own.money.saturating_sub(params.min_money).saturating_sub(*spend) / 2;
    let qty = want.min(spare / params.rights_price);
    if qty == 0 {
        return 0;
    }
    *spend += qty * params.rights_price;
    acts.push(Action::BuyRights {
        quantity: qty,
        limit_price: params.rights_price,
        venue: None,
    });
    qty
}

/// Bids for a missing input at the strategy's input price; returns the
/// quantity bid for.
fn bid_for_input(
    params: &StrategyParams,
    view: &ObservationView,
    good: &GoodKind,
    short: u64,
    spend: &mut u64,
    acts: &mut Vec<Action>,
) -> u64 {
    if params.input_price == 0 {
        return 0;
    }
    let spare = view.own.money.saturating_sub(params.min_money).saturating_sub(*spend) / 2;
    let qty = short.min(spare / params.input_price);
    if qty == 0 {
        return 0;
    }
    *spend += qty * params.input_price;
    acts.push(Action::SubmitOrder {
        side: Side::Bid,
        venue: regional(view),
        good: good.clone(),
        quantity: qty,
        limit_price: params.input_price,
        site: None,
        embodied_per_unit: None,
        debt: None,
    });
    qty
}

fn greedy_producer(params: &StrategyParams, view: &ObservationView) -> Vec<Action> {
    let mut acts = Vec::new();
    let retired = settle_and_retire(params, view, &mut acts);
    let producing = view.facilities.iter().any(|f| {
        matches!(
            f.state,
            FacilityState::Active | FacilityState::Building | FacilityState::Shutdown
        ) && f.class.recipe().is_some()
            && !retired.contains(&f.id)
    });
    if !producing && view.own.money >= params.min_money {
        if let Some(bp) = cheapest_blueprint(view, |bp| bp.class.recipe().is_some()) {
            acts.push(Action::BeginConstruction {
                blueprint: bp,
                site: None,
                estimated_units: None,
            });
        }
    }
    run_facilities(params, view, &retired, &mut acts);
    acts
}

fn quota_arbitrageur(params: &StrategyParams, view: &ObservationView) -> Vec<Action> {
    let mut acts = Vec::new();
    let regime = &view.region().regime;
    if view.sellable_rights > 0 && regime.quota_trade_enabled {
        acts.push(Action::SubmitOrder {
            side: Side::Ask,
            venue: regional(view),
            good: GoodKind::PollutionRight { valid_week: view.week },
            quantity: view.sellable_rights,
            limit_price: params.floor_price,
            site: None,
            embodied_per_unit: None,
            debt: None,
        });
    }
    if view.sellable_tokens > 0 && params.token_price > 0 && regime.allowance_sale_enabled {
        acts.push(Action::SubmitOrder {
            side: Side::Ask,
            venue: regional(view),
            good: GoodKind::AllowanceToken { valid_week: view.week },
            quantity: view.sellable_tokens,
            limit_price: params.token_price,
            site: None,
            embodied_per_unit: Some(0),
            debt: None,
        });
    }
    acts
}

fn trader<R: RngCore + ?Sized>(
    params: &StrategyParams,
    view: &ObservationView,
    memory: &mut AgentMemory,
    rng: &mut R,
) -> Vec<Action> {
    let mut acts = Vec::new();
    // Resell holdings bought earlier.
    for (key, qty) in view.own.inventory.iter() {
        if !key.good.is_physical() || qty == 0 {
            continue;
        }
        if let Some(paid) = memory.paid.get(&key.good) {
            acts.push(Action::SubmitOrder {
                side: Side::Ask,
                venue: regional(view),
                good: key.good.clone(),
                quantity: qty,
                limit_price: params.markup.mul_ceil(*paid).max(paid + 1),
                site: key.site,
                embodied_per_unit: Some(key.embodied_per_unit),
                debt: None,
            });
        }
    }
    if params.item_value == 0 {
        return acts;
    }
    let mut goods: Vec<&GoodKind> = view
        .public
        .blueprints
        .iter()
        .filter_map(|bp| bp.class.recipe())
        .map(|r| &r.output)
        .filter(|g| g.is_physical())
        .collect();
    goods.sort();
    goods.dedup();
    if goods.is_empty() {
        return acts;
    }
    let good = goods[(rng.next_u32() as usize) % goods.len()];
    let budget = view.own.money.saturating_sub(params.min_money) / 2;
    let qty = params.trade_quantity.min(budget / params.item_value);
    if qty > 0 {
        memory.paid.insert(good.clone(), params.item_value);
        acts.push(Action::SubmitOrder {
            side: Side::Bid,
            venue: regional(view),
            good: good.clone(),
            quantity: qty,
            limit_price: params.item_value,
            site: None,
            embodied_per_unit: None,
            debt: None,
        });
    }
    acts
}

fn research_target(view: &ObservationView) -> Option<InnovationId> {
    let c = &view.public.constants;
    let open = || view.public.innovations.iter().filter(|i| i.patented_by.is_none());
    open()
        .find(|i| match &i.kind {
            InnovationKind::EfficiencyMultiplier { factor, .. } => {
                *factor >= c.patent_min_factor && *factor <= c.patent_max_factor
            }
            _ => false,
        })
        .or_else(|| open().next())
        .map(|i| i.id)
}

fn green_investor(params: &StrategyParams, view: &ObservationView) -> Vec<Action> {
    let mut acts = Vec::new();
    let retired = settle_and_retire(params, view, &mut acts);
    let labs: Vec<_> = view
        .facilities
        .iter()
        .filter(|f| {
            matches!(f.class, FacilityClass::ResearchLab { .. })
                && f.state != FacilityState::Retired
                && !retired.contains(&f.id)
        })
        .collect();
    if labs.is_empty() && view.own.money >= params.min_money {
        if let Some(bp) = cheapest_blueprint(view, |bp| matches!(bp.class, FacilityClass::ResearchLab { .. })) {
            acts.push(Action::BeginConstruction {
                blueprint: bp,
                site: None,
                estimated_units: None,
            });
        }
    }
    for lab in labs.iter().filter(|f| f.state == FacilityState::Active) {
        let FacilityClass::ResearchLab { effort_capacity } = lab.class else {
            continue;
        };
        match &lab.research {
            Some(r) if view.public.innovations[r.target.index()].patented_by.is_some() => {}
            Some(r) if r.progress >= view.public.innovations[r.target.index()].required_effort => {
                acts.push(Action::FilePatent { lab: lab.id });
            }
            Some(r) => acts.push(Action::ResearchTick {
                lab: lab.id,
                effort: params.research_effort.min(effort_capacity).max(1),
                target: Some(r.target),
            }),
            None => {
                if let Some(t) = research_target(view) {
                    acts.push(Action::ResearchTick {
                        lab: lab.id,
                        effort: params.research_effort.min(effort_capacity).max(1),
                        target: Some(t),
                    });
                }
            }
        }
    }
    // Use licences on own facilities first, sell the rest.
    for (key, qty) in view.own.inventory.iter() {
        let GoodKind::License(inn) = key.good else { continue };
        let mut left = qty;
        if let InnovationKind::EfficiencyMultiplier { class, .. } = &view.public.innovations[inn.index()].kind {
            for f in &view.facilities {
                if left > 0
                    && f.class.key() == class
                    && f.state != FacilityState::Retired
                    && !f.modifiers.contains(&inn)
                {
                    acts.push(Action::ApplyLicense {
                        facility: f.id,
                        innovation: inn,
                    });
                    left -= 1;
                }
            }
        }
        if left > 0 && params.license_price > 0 {
            acts.push(Action::SubmitOrder {
                side: Side::Ask,
                venue: Venue::Global,
                good: key.good.clone(),
                quantity: left,
                limit_price: params.license_price,
                site: None,
                embodied_per_unit: Some(key.embodied_per_unit),
                debt: None,
            });
        }
    }
    run_facilities(params, view, &retired, &mut acts);
    acts
}

// ---------------------------------------------------------------------------
// Application

/// Applies one action for `actor`. On error the world is unchanged.
pub fn apply_action(world: &mut World, actor: ActorId, action: &Action) -> Result<(), Rejection> {
    let a = world.actor(actor)?;
    if a.kind == world::ActorKind::Government {
        return Err(Rejection::GovernmentNotPermitted);
    }
    let week = world.week;
    match action {
        Action::SubmitOrder {
            side,
            venue,
            good,
            quantity,
            limit_price,
            site,
            embodied_per_unit,
            debt,
        } => market::submit_order(
            world,
            OrderRequest {
                actor,
                side: *side,
                venue: *venue,
                good: good.clone(),
                quantity: *quantity,
                limit_price: *limit_price,
                site: *site,
                embodied_per_unit: *embodied_per_unit,
                debt: *debt,
            },
        )
        .map(drop),
        Action::BuyRights {
            quantity,
            limit_price,
            venue,
        }
        | Action::BuyTokens {
            quantity,
            limit_price,
            venue,
        } => {
            let good = match action {
                Action::BuyRights { .. } => GoodKind::PollutionRight { valid_week: week },
                _ => GoodKind::AllowanceToken { valid_week: week },
            };
            let venue = venue.unwrap_or(Venue::Regional(a.region));
            market::submit_order(
                world,
                OrderRequest {
                    actor,
                    side: Side::Bid,
                    venue,
                    good,
                    quantity: *quantity,
                    limit_price: *limit_price,
                    site: None,
                    embodied_per_unit: None,
                    debt: None,
                },
            )
            .map(drop)
        }
        Action::DirectTrade {
            counterparty,
            role,
            lot,
            price,
        } => market::offer_direct(
            world,
            DirectIntent {
                from: actor,
                counterparty: *counterparty,
                role: *role,
                lot: lot.clone(),
                price: *price,
            },
        )
        .map(drop),
        Action::GridTrade { side, quantity } => market::grid_trade(world, actor, *side, *quantity).map(drop),
        Action::BeginConstruction {
            blueprint,
            site,
            estimated_units,
        } => {
            let site = site.unwrap_or(a.home_site);
            production::begin_construction(world, actor, *blueprint, site, *estimated_units).map(drop)
        }
        Action::Produce { facility, batches } => {
            production::check_produce(world, actor, *facility, *batches)?;
            let slot = world.current.pending_production.entry(*facility).or_insert(0);
            *slot = slot.checked_add(*batches).ok_or(Rejection::Overflow)?;
            Ok(())
        }
        Action::TransportDispatch { transporter, cargo, to } => {
            production::transport_dispatch(world, actor, *transporter, cargo, *to).map(drop)
        }
        Action::ResearchTick { lab, effort, target } => {
            let t = production::check_research(world, actor, *lab, *effort, *target)?;
            let slot = world.current.pending_research.entry(*lab).or_insert((0, None));
            slot.0 += effort;
            slot.1 = Some(t);
            Ok(())
        }
        Action::FilePatent { lab } => production::file_patent(world, actor, *lab).map(drop),
        Action::ApplyLicense { facility, innovation } => {
            production::apply_license(world, actor, *facility, *innovation)
        }
        Action::RetireFacility { facility } => {
            let f = world.owned_facility(actor, *facility)?;
            if f.in_transit.is_some() {
                return Err(Rejection::InTransit);
            }
            ledger::retire_facility(world, *facility).map(drop)
        }
        Action::SettleDebt { debt, route } => ledger::settle_debt(world, actor, *debt, *route).map(drop),
        Action::TransferQuotaToCorp { corporation, fraction } => {
            world::transfer_quota_to_corp(world, actor, *corporation, *fraction).map(drop)
        }
    }
}

/// Applies an actor's actions in order, at most the action budget; every
/// rejection is logged to the week's audit stream. Returns the number
/// accepted.
pub fn apply_actions(world: &mut World, actor: ActorId, actions: &[Action]) -> usize {
    let budget = world.constants.action_budget as usize;
    let mut accepted = 0;
    for (i, act) in actions.iter().enumerate() {
        let res = if i >= budget {
            Err(Rejection::BudgetExceeded)
        } else {
            apply_action(world, actor, act)
        };
        match res {
            Ok(()) => accepted += 1,
            Err(reason) => world.current.audit.push(AuditRecord {
                week: world.week,
                actor,
                index: i as u32,
                action: String::from(act.name()),
                reason,
            }),
        }
    }
    accepted
}

/// Checks actions sequentially against a scratch copy of the world, so
/// earlier accepted actions are visible to later checks.
pub fn validate_actions(world: &World, actor: ActorId, actions: &[Action]) -> (Vec<Action>, Vec<(Action, Rejection)>) {
    let mut scratch = world.clone();
    let budget = world.constants.action_budget as usize;
    let mut ok = Vec::new();
    let mut bad = Vec::new();
    for (i, act) in actions.iter().enumerate() {
        let res = if i >= budget {
            Err(Rejection::BudgetExceeded)
        } else {
            apply_action(&mut scratch, actor, act)
        };
        match res {
            Ok(()) => ok.push(act.clone()),
            Err(e) => bad.push((act.clone(), e)),
        }
    }
    (ok, bad)
}

/// Expected pollution of the actor's queued production, used by tests.
pub fn queued_pollution(world: &World, actor: ActorId) -> u64 {
    world
        .current
        .pending_production
        .iter()
        .filter(|(f, _)| world.facilities[f.index()].owner == actor)
        .map(|(f, b)| production::projected_pollution(world, *f, *b))
        .fold(0u64, u64::saturating_add)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::goods::LotKey;
    use crate::ids::RegionId;
    use crate::policy::PolicyChange;
    use crate::production::Recipe;
    use crate::scenario::{ActorSpec, BlueprintSpec, FacilitySpec, LotSpec, Scenario};
    use crate::world::{actor_view, new_world};
    use alloc::vec;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn steel() -> GoodKind {
        GoodKind::Item("steel".into())
    }

    fn player(id: &str, money: i64) -> ActorSpec {
        ActorSpec {
            id: id.into(),
            kind: "player".into(),
            site: "S1".into(),
            money,
            strategy: StrategySpec::scripted_empty(),
            inventory: Vec::new(),
            members: BTreeMap::new(),
        }
    }

    fn factory(id: &str, build: u64, bom_steel: u64) -> BlueprintSpec {
        BlueprintSpec {
            id: id.into(),
            class: FacilityClass::Factory {
                recipe: Recipe::simple(GoodKind::Item("widget".into()), 1),
            },
            bom: [(steel(), bom_steel)].into_iter().collect(),
            build_energy_direct: build,
            build_pollution: 0,
            required_licenses: Vec::new(),
            estimated_units: 100,
            marginal_energy_per_unit: 0,
            pollution_per_unit: 0,
        }
    }

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(1)
    }

    #[test]
    fn scripted_empty_never_acts() {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1", 1_000));
        let mut w = new_world(&s).unwrap();
        let strat = Strategy::scripted_empty();
        let mut mem = AgentMemory::default();
        for week in 0..5 {
            w.week = week;
            let view = actor_view(&w, ActorId(1)).unwrap();
            assert!(decide(&strat, &view, &mut mem, &mut rng()).is_empty());
        }
    }

    #[test]
    fn greedy_builds_cheapest_embodied_blueprint() {
        let mut s = Scenario::minimal();
        let mut p = player("P1", 1_000_000);
        p.inventory.push(LotSpec {
            good: steel(),
            quantity: 10,
            embodied_per_unit: 100,
            site: None,
        });
        s.actors.push(p);
        s.blueprints.push(factory("low-build", 1_000, 9));
        s.blueprints.push(factory("small-bom", 1_500, 1));
        s.blueprints.push(factory("too-much-steel", 10, 11));
        let w = new_world(&s).unwrap();
        let view = actor_view(&w, ActorId(1)).unwrap();

        // Oracle: scan blueprints whose BOM fits, cost = build + BOM embodied.
        let expected = s
            .blueprints
            .iter()
            .enumerate()
            .filter(|(_, b)| b.bom[&steel()] <= 10)
            .map(|(i, b)| (b.build_energy_direct + b.bom[&steel()] * 100, BlueprintId(i as u32)))
            .min()
            .unwrap()
            .1;
        assert_eq!(expected, BlueprintId(1));

        let strat = Strategy::new(StrategyKind::GreedyProducer, StrategyParams::default());
        let acts = decide(&strat, &view, &mut AgentMemory::default(), &mut rng());
        assert_eq!(
            acts.first(),
            Some(&Action::BeginConstruction {
                blueprint: expected,
                site: None,
                estimated_units: None,
            })
        );
    }

    #[test]
    fn arbitrageur_offers_unused_rights_at_floor() {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1", 0));
        let mut w = new_world(&s).unwrap();
        w.actors[1]
            .inventory
            .add(LotKey::new(GoodKind::PollutionRight { valid_week: 0 }, None, 0), 600);
        let view = actor_view(&w, ActorId(1)).unwrap();
        assert_eq!(view.sellable_rights, 600);
        let params = StrategyParams {
            floor_price: 3,
            ..StrategyParams::default()
        };
        let strat = Strategy::new(StrategyKind::QuotaArbitrageur, params);
        let acts = decide(&strat, &view, &mut AgentMemory::default(), &mut rng());
        assert_eq!(
            acts,
            vec![Action::SubmitOrder {
                side: Side::Ask,
                venue: Venue::Regional(RegionId(0)),
                good: GoodKind::PollutionRight { valid_week: 0 },
                quantity: 600,
                limit_price: 3,
                site: None,
                embodied_per_unit: None,
                debt: None,
            }]
        );
    }

    #[test]
    fn decisions_are_deterministic() {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1", 1_000_000));
        s.blueprints.push(factory("f", 0, 0));
        let w = new_world(&s).unwrap();
        let view = actor_view(&w, ActorId(1)).unwrap();
        let params = StrategyParams {
            item_value: 50,
            ..StrategyParams::default()
        };
        let strat = Strategy::new(StrategyKind::Trader, params);
        let a = decide(&strat, &view, &mut AgentMemory::default(), &mut rng());
        let b = decide(&strat, &view, &mut AgentMemory::default(), &mut rng());
        assert!(!a.is_empty());
        assert_eq!(a, b);
    }

    #[test]
    fn foreign_facility_is_not_owner() {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1", 0));
        s.actors.push(player("P2", 0));
        s.blueprints.push(factory("f", 0, 0));
        s.facilities.push(FacilitySpec {
            id: "F1".into(),
            owner: "P1".into(),
            site: "S1".into(),
            blueprint: "f".into(),
            estimated_units: None,
            embodied_build_energy: None,
            units_produced: 0,
        });
        let w = new_world(&s).unwrap();
        let act = Action::Produce {
            facility: FacilityId(0),
            batches: 1,
        };
        let (ok, bad) = validate_actions(&w, ActorId(2), core::slice::from_ref(&act));
        assert!(ok.is_empty());
        assert_eq!(bad, vec![(act, Rejection::NotOwner)]);
    }

    #[test]
    fn second_bid_beyond_funds_is_insolvent() {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1", 1_000));
        let w = new_world(&s).unwrap();
        let bid = Action::SubmitOrder {
            side: Side::Bid,
            venue: Venue::Regional(RegionId(0)),
            good: steel(),
            quantity: 10,
            limit_price: 60,
            site: None,
            embodied_per_unit: None,
            debt: None,
        };
        let (ok, bad) = validate_actions(&w, ActorId(1), &[bid.clone(), bid.clone()]);
        assert_eq!(ok, vec![bid.clone()]);
        assert_eq!(bad, vec![(bid, Rejection::Insolvent)]);
    }

    #[test]
    fn empty_list_validates_to_nothing() {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1", 0));
        let w = new_world(&s).unwrap();
        assert_eq!(validate_actions(&w, ActorId(1), &[]), (Vec::new(), Vec::new()));
    }

    #[test]
    fn budget_caps_accepted_actions() {
        let mut s = Scenario::minimal();
        s.constants.action_budget = 2;
        s.actors.push(player("P1", 1_000_000));
        let w = new_world(&s).unwrap();
        let bid = Action::GridTrade {
            side: Side::Bid,
            quantity: 1,
        };
        let (ok, bad) = validate_actions(&w, ActorId(1), &[bid.clone(), bid.clone(), bid.clone()]);
        assert_eq!(ok.len(), 2);
        assert_eq!(bad, vec![(bid, Rejection::BudgetExceeded)]);
    }

    #[test]
    fn doubled_rates_never_buy_more() {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1", 1_000_000));
        let mut w = new_world(&s).unwrap();
        let base = actor_view(&w, ActorId(1)).unwrap();
        let change = PolicyChange {
            scale_rates: Some(Ratio::integer(2)),
            ..PolicyChange::default()
        };
        w.regions[0].regime = change.apply_to(&w.regions[0].regime);
        let taxed = actor_view(&w, ActorId(1)).unwrap();
        for value in [1u64, 11, 13, 15, 20, 30] {
            let params = StrategyParams {
                energy_value: Ratio::new(value, 10).unwrap(),
                ..StrategyParams::default()
            };
            for need in [0u64, 50_000, 100_000, 150_000, 500_000] {
                let a = planned_energy_purchase(&params, &base, need);
                let b = planned_energy_purchase(&params, &taxed, need);
                assert!(b <= a, "value {value}/10 need {need}: {b} > {a}");
            }
        }
        let params = StrategyParams {
            energy_value: Ratio::new(13, 10).unwrap(),
            ..StrategyParams::default()
        };
        assert_eq!(planned_energy_purchase(&params, &base, 500_000), 200_000);
        assert_eq!(planned_energy_purchase(&params, &taxed, 500_000), 100_000);
    }

    #[test]
    fn action_json_shape() {
        let a = Action::GridTrade {
            side: Side::Bid,
            quantity: 5,
        };
        let text = serde_json::to_string(&a).unwrap();
        assert_eq!(text, r#"{"type":"grid_trade","side":"bid","quantity":5}"#);
        assert_eq!(serde_json::from_str::<Action>(&text).unwrap(), a);
        assert_eq!(a.name(), "grid_trade");
    }
}

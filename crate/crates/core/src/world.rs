//! Domain entities, world construction and per-actor observation views.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::agents::{AgentMemory, Strategy};
use crate::error::{Rejection, ScenarioError};
use crate::goods::{GoodKind, Inventory, LotKey};
use crate::ids::{ActorId, BlueprintId, FacilityId, InnovationId, RegionId, SiteId, GOVERNMENT};
use crate::ledger::{Account, EnergyDebt, EnergyLedger, LedgerKind};
use crate::market::{AuditRecord, BookKey, Depth, DirectIntent, OrderBook, Trade};
use crate::policy::{self, PolicyEvent, PolicyRegime};
use crate::production::{Blueprint, Facility, FacilityState, Innovation, Shipment};
use crate::ratio::Ratio;
use crate::scenario::{Constants, LotSpec, Scenario, GOVERNMENT_NAME};
use crate::serde_seq;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub id: RegionId,
    pub name: String,
    pub regime: PolicyRegime,
    pub reference_price: u64,
    pub grid_buyback_fraction: Ratio,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Site {
    pub id: SiteId,
    pub name: String,
    pub region: RegionId,
    pub position: [i64; 2],
    pub productivity: BTreeMap<String, Ratio>,
    pub deposits: BTreeMap<String, u64>,
}

impl Site {
    pub fn productivity_for(&self, class_key: &str) -> Ratio {
        self.productivity.get(class_key).copied().unwrap_or(Ratio::ONE)
    }

    /// Euclidean distance rounded up to whole km.
    pub fn distance_km(&self, other: &Site) -> u64 {
        let dx = (self.position[0] as i128 - other.position[0] as i128).unsigned_abs();
        let dy = (self.position[1] as i128 - other.position[1] as i128).unsigned_abs();
        let d2 = dx * dx + dy * dy;
        let s = d2.isqrt();
        let d = if s * s < d2 { s + 1 } else { s };
        u64::try_from(d).unwrap_or(u64::MAX)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActorKind {
    Player,
    Corporation,
    Government,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Actor {
    pub id: ActorId,
    pub name: String,
    pub kind: ActorKind,
    pub region: RegionId,
    pub home_site: SiteId,
    pub money: u64,
    pub inventory: Inventory,
    pub week_energy_acquired: u64,
    pub week_pollution: u64,
    pub outstanding_debts: Vec<crate::ids::DebtId>,
    /// Corporations: member player to pooled quota fraction.
    #[serde(with = "serde_seq")]
    pub members: BTreeMap<ActorId, Ratio>,
    /// Players: the corporation they belong to.
    pub corporation: Option<ActorId>,
}

impl Actor {
    /// Pollution rights usable in `week`.
    pub fn pollution_rights_held(&self, week: u32) -> u64 {
        self.inventory
            .total_of(&GoodKind::PollutionRight { valid_week: week }, None)
    }

    /// Allowance tokens usable in `week`.
    pub fn allowance_tokens_held(&self, week: u32) -> u64 {
        self.inventory
            .total_of(&GoodKind::AllowanceToken { valid_week: week }, None)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AgentSlot {
    pub strategy: Strategy,
    pub memory: AgentMemory,
}

/// Per-week scratch state; cleared at week end.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct WeekState {
    pub minted: bool,
    pub regime_changes: Vec<String>,
    pub shutdowns: u64,
    pub emissions: u64,
    pub energy_purchased: u64,
    pub taxed_kwh: u64,
    pub tax_revenue: u64,
    pub tape: Vec<Trade>,
    pub audit: Vec<AuditRecord>,
    pub direct_intents: Vec<DirectIntent>,
    /// Facility to batches requested this week.
    #[serde(with = "serde_seq")]
    pub pending_production: BTreeMap<FacilityId, u64>,
    /// Lab to (effort, target) requested this week.
    #[serde(with = "serde_seq")]
    pub pending_research: BTreeMap<FacilityId, (u64, Option<InnovationId>)>,
    /// Money promised by each actor's resting bids.
    #[serde(with = "serde_seq")]
    pub bid_commitments: BTreeMap<ActorId, u128>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub scenario_digest: String,
    pub scenario_base_digest: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct World {
    pub week: u32,
    /// Root of every per-actor, per-week random stream.
    pub seed: u64,
    pub constants: Constants,
    /// Mass per unit of each physical good, in kg.
    #[serde(with = "serde_seq")]
    pub goods_mass: BTreeMap<GoodKind, u64>,
    pub regions: Vec<Region>,
    pub sites: Vec<Site>,
    pub actors: Vec<Actor>,
    pub agents: Vec<AgentSlot>,
    pub blueprints: Vec<Blueprint>,
    pub innovations: Vec<Innovation>,
    pub facilities: Vec<Facility>,
    pub debts: Vec<EnergyDebt>,
    pub shipments: Vec<Shipment>,
    #[serde(with = "serde_seq")]
    pub books: BTreeMap<BookKey, OrderBook>,
    pub ledger: EnergyLedger,
    pub policy_schedule: Vec<PolicyEvent>,
    pub next_order_id: u64,
    pub grid_bootstrap_remaining: u64,
    pub current: WeekState,
    pub provenance: Provenance,
}

impl World {
    pub fn actor(&self, id: ActorId) -> Result<&Actor, Rejection> {
        self.actors.get(id.index()).ok_or(Rejection::UnknownActor)
    }

    pub fn facility(&self, id: FacilityId) -> Result<&Facility, Rejection> {
        self.facilities.get(id.index()).ok_or(Rejection::UnknownFacility)
    }

    pub fn site(&self, id: SiteId) -> Result<&Site, Rejection> {
        self.sites.get(id.index()).ok_or(Rejection::UnknownSite)
    }

    pub fn regime_of(&self, actor: ActorId) -> &PolicyRegime {
        &self.regions[self.actors[actor.index()].region.index()].regime
    }

    pub fn reference_price_of(&self, actor: ActorId) -> u64 {
        self.regions[self.actors[actor.index()].region.index()].reference_price
    }

    pub fn mass_kg(&self, good: &GoodKind) -> u64 {
        self.goods_mass.get(good).copied().unwrap_or(0)
    }

    /// Moves money between actors; fails without effect on shortfall.
    pub fn transfer_money(&mut self, from: ActorId, to: ActorId, amount: u64) -> Result<(), Rejection> {
        if amount == 0 || from == to {
            return Ok(());
        }
        let have = self.actors[from.index()].money;
        if have < amount {
            return Err(Rejection::Insolvent);
        }
        let new_to = self.actors[to.index()]
            .money
            .checked_add(amount)
            .ok_or(Rejection::Overflow)?;
        self.actors[from.index()].money = have - amount;
        self.actors[to.index()].money = new_to;
        Ok(())
    }

    /// Checks ownership, facility existence and that the actor may act.
    pub fn owned_facility(&self, actor: ActorId, id: FacilityId) -> Result<&Facility, Rejection> {
        let f = self.facility(id)?;
        if f.owner != actor {
            return Err(Rejection::NotOwner);
        }
        Ok(f)
    }

    pub fn total_money(&self) -> u128 {
        self.actors.iter().map(|a| a.money as u128).sum()
    }

    /// Energy held by the government and offered on the grid.
    pub fn grid_pool_kwh(&self) -> u64 {
        self.actors[GOVERNMENT.index()]
            .inventory
            .total_of(&GoodKind::Energy, None)
    }
}

fn lot_key_for(spec: &LotSpec, home: SiteId, site_ids: &BTreeMap<String, SiteId>) -> LotKey {
    let site = if spec.good.is_physical() {
        Some(
            spec.site
                .as_deref()
                .and_then(|s| site_ids.get(s).copied())
                .unwrap_or(home),
        )
    } else {
        None
    };
    LotKey::new(spec.good.clone(), site, spec.embodied_per_unit)
}

/// Builds the week-0 world. Initial holdings and facilities enter the
/// journal as primary generation so the ledger balances from the start.
pub fn new_world(scenario: &Scenario) -> Result<World, ScenarioError> {
    scenario.validate()?;

    let regions: Vec<Region> = scenario
        .regions
        .iter()
        .enumerate()
        .map(|(i, r)| {
            Ok(Region {
                id: RegionId(i as u32),
                name: r.id.clone(),
                regime: r.regime.to_regime(&r.id)?,
                reference_price: r.reference_price as u64,
                grid_buyback_fraction: r.grid_buyback_fraction,
            })
        })
        .collect::<Result<_, ScenarioError>>()?;
    let region_ids: BTreeMap<String, RegionId> = regions.iter().map(|r| (r.name.clone(), r.id)).collect();

    let sites: Vec<Site> = scenario
        .sites
        .iter()
        .enumerate()
        .map(|(i, s)| Site {
            id: SiteId(i as u32),
            name: s.id.clone(),
            region: region_ids[s.region.as_str()],
            position: s.position,
            productivity: s.productivity.clone(),
            deposits: s.deposits.iter().map(|(k, v)| (k.clone(), *v as u64)).collect(),
        })
        .collect();
    let site_ids: BTreeMap<String, SiteId> = sites.iter().map(|s| (s.name.clone(), s.id)).collect();

    let mut world = World {
        week: 0,
        seed: scenario.seed,
        constants: scenario.constants.clone(),
        goods_mass: scenario.goods.iter().map(|g| (g.good.clone(), g.mass_kg)).collect(),
        regions,
        sites,
        actors: Vec::new(),
        agents: Vec::new(),
        blueprints: Vec::new(),
        innovations: Vec::new(),
        facilities: Vec::new(),
        debts: Vec::new(),
        shipments: Vec::new(),
        books: BTreeMap::new(),
        ledger: EnergyLedger::default(),
        policy_schedule: Vec::new(),
        next_order_id: 0,
        grid_bootstrap_remaining: scenario.constants.grid_bootstrap_kwh_per_week,
        current: WeekState::default(),
        provenance: Provenance {
            scenario_digest: scenario.digest(),
            scenario_base_digest: scenario.base_digest(),
        },
    };

    let gov_site = SiteId(0);
    world.actors.push(Actor {
        id: GOVERNMENT,
        name: GOVERNMENT_NAME.to_string(),
        kind: ActorKind::Government,
        region: world.sites[0].region,
        home_site: gov_site,
        money: scenario.government.money as u64,
        inventory: Inventory::new(),
        week_energy_acquired: 0,
        week_pollution: 0,
        outstanding_debts: Vec::new(),
        members: BTreeMap::new(),
        corporation: None,
    });
    world.agents.push(AgentSlot {
        strategy: Strategy::scripted_empty(),
        memory: AgentMemory::default(),
    });

    struct Pending<'a> {
        name: String,
        kind: ActorKind,
        site: &'a str,
        money: i64,
        strategy: &'a crate::scenario::StrategySpec,
        inventory: &'a [LotSpec],
    }
    let mut pending: Vec<Pending<'_>> = Vec::new();
    for a in &scenario.actors {
        pending.push(Pending {
            name: a.id.clone(),
            kind: crate::scenario::parse_actor_kind(&a.kind).unwrap_or(ActorKind::Player),
            site: &a.site,
            money: a.money,
            strategy: &a.strategy,
            inventory: &a.inventory,
        });
    }
    for g in &scenario.actor_groups {
        for n in 1..=g.count {
            pending.push(Pending {
                name: g.member_id(n),
                kind: crate::scenario::parse_actor_kind(&g.kind).unwrap_or(ActorKind::Player),
                site: &g.sites[(n as usize - 1) % g.sites.len()],
                money: g.money,
                strategy: &g.strategy,
                inventory: &g.inventory,
            });
        }
    }

    for p in pending {
        let id = ActorId(world.actors.len() as u32);
        let home = site_ids[p.site];
        let mut inventory = Inventory::new();
        for lot in p.inventory {
            inventory.add(lot_key_for(lot, home, &site_ids), lot.quantity as u64);
        }
        let embodied = inventory.embodied_total();
        world.ledger.record_u128(
            0,
            LedgerKind::PrimaryGeneration,
            embodied,
            Account::Source,
            Account::Actor(id),
        );
        world.actors.push(Actor {
            id,
            name: p.name,
            kind: p.kind,
            region: world.sites[home.index()].region,
            home_site: home,
            money: p.money as u64,
            inventory,
            week_energy_acquired: 0,
            week_pollution: 0,
            outstanding_debts: Vec::new(),
            members: BTreeMap::new(),
            corporation: None,
        });
        world.agents.push(AgentSlot {
            strategy: Strategy::from_spec(p.strategy),
            memory: AgentMemory::default(),
        });
    }
    let actor_ids: BTreeMap<String, ActorId> = world.actors.iter().map(|a| (a.name.clone(), a.id)).collect();

    for a in &scenario.actors {
        let corp = actor_ids[&a.id];
        for (m, f) in &a.members {
            let player = actor_ids[m];
            world.actors[corp.index()].members.insert(player, *f);
            world.actors[player.index()].corporation = Some(corp);
        }
    }

    let innovation_ids: BTreeMap<&str, InnovationId> = scenario
        .innovations
        .iter()
        .enumerate()
        .map(|(i, s)| (s.id.as_str(), InnovationId(i as u32)))
        .collect();
    for (i, b) in scenario.blueprints.iter().enumerate() {
        world.blueprints.push(Blueprint {
            id: BlueprintId(i as u32),
            name: b.id.clone(),
            class: b.class.clone(),
            bom: b.bom.clone(),
            build_energy_direct: b.build_energy_direct,
            build_pollution: b.build_pollution,
            required_licenses: b.required_licenses.iter().map(|l| innovation_ids[l.as_str()]).collect(),
            estimated_units: b.estimated_units,
            marginal_energy_per_unit: b.marginal_energy_per_unit,
            pollution_per_unit: b.pollution_per_unit,
        });
    }
    for (i, s) in scenario.innovations.iter().enumerate() {
        world.innovations.push(Innovation {
            id: InnovationId(i as u32),
            name: s.id.clone(),
            kind: s.kind.clone(),
            required_effort: s.required_effort,
            planned_licenses: s.planned_licenses,
            patented_by: None,
            embodied_per_license: None,
        });
    }
    let blueprint_ids: BTreeMap<&str, BlueprintId> = world.blueprints.iter().map(|b| (b.name.as_str(), b.id)).collect();
    let mut facilities = Vec::new();
    for (i, f) in scenario.facilities.iter().enumerate() {
        let bp = &world.blueprints[blueprint_ids[f.blueprint.as_str()].index()];
        let id = FacilityId(i as u32);
        let mut fac = Facility::from_blueprint(
            id,
            f.id.clone(),
            actor_ids[&f.owner],
            site_ids[f.site.as_str()],
            bp,
            f.estimated_units.unwrap_or(bp.estimated_units),
            f.embodied_build_energy.unwrap_or(bp.build_energy_direct),
            0,
        );
        fac.state = FacilityState::Active;
        fac.units_produced = f.units_produced;
        facilities.push(fac);
    }
    for fac in facilities {
        let unamortized = crate::ledger::unamortized_energy(&fac);
        world.ledger.record_u128(
            0,
            LedgerKind::PrimaryGeneration,
            unamortized as u128,
            Account::Source,
            Account::Facility(fac.id),
        );
        world.facilities.push(fac);
    }

    let mut events: Vec<PolicyEvent> = scenario
        .policy_events
        .iter()
        .map(|e| PolicyEvent {
            week: e.week,
            region: region_ids[e.region.as_str()],
            change: e.change.clone(),
        })
        .collect();
    events.sort_by_key(|e| e.week);
    world.policy_schedule = events;

    Ok(world)
}

/// Transfers `fraction` of the player's weekly pollution cap to the
/// corporation. Returns (player share, corporation gain); the two always
/// sum to the player's cap.
pub fn transfer_quota_to_corp(
    world: &mut World,
    player: ActorId,
    corp: ActorId,
    fraction: Ratio,
) -> Result<(u64, u64), Rejection> {
    world.actor(player)?;
    world.actor(corp)?;
    if !fraction.le_one() {
        return Err(Rejection::FractionOutOfRange);
    }
    let is_member = world.actors[player.index()].corporation == Some(corp)
        && world.actors[corp.index()].members.contains_key(&player);
    if !is_member {
        return Err(Rejection::NotMember);
    }
    let previous = world.actors[corp.index()].members[&player];
    world.actors[corp.index()].members.insert(player, fraction);
    // Re-pooling must not retroactively put either side over quota.
    if policy::pollution_headroom(world, player) < 0 || policy::pollution_headroom(world, corp) < 0 {
        world.actors[corp.index()].members.insert(player, previous);
        return Err(Rejection::QuotaExceeded);
    }
    let cap = world.regime_of(player).pollution_cap;
    let gain = fraction.mul_floor(cap);
    Ok((cap - gain, gain))
}

/// Everything an agent may see that is the same for all agents.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PublicView {
    pub week: u32,
    pub regions: Vec<Region>,
    pub sites: Vec<Site>,
    pub blueprints: Vec<Blueprint>,
    pub innovations: Vec<Innovation>,
    #[serde(with = "serde_seq")]
    pub depth: BTreeMap<BookKey, Depth>,
    pub grid_pool_kwh: u64,
    pub grid_bootstrap_kwh: u64,
    pub constants: Constants,
}

/// One actor's view at a phase boundary: public data plus its own state.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservationView {
    pub week: u32,
    pub actor: ActorId,
    pub own: Actor,
    pub facilities: Vec<Facility>,
    pub debts: Vec<EnergyDebt>,
    pub shipments: Vec<Shipment>,
    pub effective_allowance: u64,
    pub base_allowance: u64,
    pub available_pollution_quota: u64,
    pub sellable_rights: u64,
    pub sellable_tokens: u64,
    pub public: Arc<PublicView>,
}

impl ObservationView {
    pub fn region(&self) -> &Region {
        &self.public.regions[self.own.region.index()]
    }

    pub fn depth(&self, key: &BookKey) -> Option<&Depth> {
        self.public.depth.get(key)
    }
}

pub fn public_view(world: &World) -> PublicView {
    let n = world.constants.view_depth as usize;
    PublicView {
        week: world.week,
        regions: world.regions.clone(),
        sites: world.sites.clone(),
        blueprints: world.blueprints.clone(),
        innovations: world.innovations.clone(),
        depth: world
            .books
            .iter()
            .map(|(k, b)| (k.clone(), b.depth(n)))
            .filter(|(_, d)| !d.is_empty())
            .collect(),
        grid_pool_kwh: world.grid_pool_kwh(),
        grid_bootstrap_kwh: world.grid_bootstrap_remaining,
        constants: world.constants.clone(),
    }
}

pub fn actor_view_with(world: &World, actor: ActorId, public: Arc<PublicView>) -> Result<ObservationView, Rejection> {
    let own = world.actor(actor)?.clone();
    Ok(ObservationView {
        week: world.week,
        actor,
        facilities: world.facilities.iter().filter(|f| f.owner == actor).cloned().collect(),
        debts: world.debts.iter().filter(|d| d.debtor == actor).cloned().collect(),
        shipments: world
            .shipments
            .iter()
            .filter(|s| s.owner == actor && !s.delivered)
            .cloned()
            .collect(),
        effective_allowance: policy::effective_allowance(world, actor),
        base_allowance: policy::base_allowance(world, actor),
        available_pollution_quota: policy::available_pollution_quota(world, actor),
        sellable_rights: policy::sellable_rights(world, actor),
        sellable_tokens: policy::sellable_tokens(world, actor),
        own,
        public,
    })
}

pub fn actor_view(world: &World, actor: ActorId) -> Result<ObservationView, Rejection> {
    world.actor(actor)?;
    actor_view_with(world, actor, Arc::new(public_view(world)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{ActorSpec, StrategySpec};

    fn player(id: &str) -> ActorSpec {
        ActorSpec {
            id: id.into(),
            kind: "player".into(),
            site: "S1".into(),
            money: 1_000,
            strategy: StrategySpec::scripted_empty(),
            inventory: Vec::new(),
            members: BTreeMap::new(),
        }
    }

    fn pooled_world() -> World {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1"));
        s.actors.push(player("P2"));
        let mut corp = player("C1");
        corp.kind = "corporation".into();
        corp.members.insert("P1".into(), Ratio::ZERO);
        corp.members.insert("P2".into(), Ratio::ZERO);
        s.actors.push(corp);
        new_world(&s).unwrap()
    }

    #[test]
    fn minimal_world() {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1"));
        let w = new_world(&s).unwrap();
        assert_eq!(w.week, 0);
        assert!(w.books.is_empty());
        assert_eq!(w.actors.len(), 2);
        assert_eq!(w.actors[1].name, "P1");
    }

    #[test]
    fn dangling_facility_site() {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1"));
        s.blueprints.push(crate::scenario::BlueprintSpec {
            id: "B".into(),
            class: crate::production::FacilityClass::ResearchLab { effort_capacity: 1 },
            bom: BTreeMap::new(),
            build_energy_direct: 0,
            build_pollution: 0,
            required_licenses: Vec::new(),
            estimated_units: 1,
            marginal_energy_per_unit: 0,
            pollution_per_unit: 0,
        });
        s.facilities.push(crate::scenario::FacilitySpec {
            id: "F1".into(),
            owner: "P1".into(),
            site: "S9".into(),
            blueprint: "B".into(),
            estimated_units: None,
            embodied_build_energy: None,
            units_produced: 0,
        });
        assert_eq!(new_world(&s).unwrap_err(), ScenarioError::dangling("facility F1", "S9"));
    }

    #[test]
    fn duplicate_actor_named() {
        let mut s = Scenario::minimal();
        s.actors.push(player("P1"));
        s.actors.push(player("P1"));
        assert_eq!(
            new_world(&s).unwrap_err(),
            ScenarioError::DuplicateId {
                kind: "actor",
                id: "P1".into()
            }
        );
    }

    #[test]
    fn quota_transfer_examples() {
        let mut w = pooled_world();
        let (p1, c) = (ActorId(1), ActorId(3));
        assert_eq!(transfer_quota_to_corp(&mut w, p1, c, Ratio::ZERO), Ok((1_000, 0)));
        assert_eq!(transfer_quota_to_corp(&mut w, p1, c, Ratio::ONE), Ok((0, 1_000)));
        assert_eq!(policy::available_pollution_quota(&w, c), 1_000);
        let half = Ratio::new(1, 2).unwrap();
        assert_eq!(transfer_quota_to_corp(&mut w, p1, c, half), Ok((500, 500)));
        assert_eq!(policy::available_pollution_quota(&w, p1), 500);
        assert_eq!(
            transfer_quota_to_corp(&mut w, p1, c, Ratio::new(3, 2).unwrap()),
            Err(Rejection::FractionOutOfRange)
        );
        assert_eq!(
            transfer_quota_to_corp(&mut w, ActorId(2), ActorId(1), half),
            Err(Rejection::NotMember)
        );
    }

    #[test]
    fn corp_pools_two_halves() {
        let mut w = pooled_world();
        let half = Ratio::new(1, 2).unwrap();
        transfer_quota_to_corp(&mut w, ActorId(1), ActorId(3), half).unwrap();
        transfer_quota_to_corp(&mut w, ActorId(2), ActorId(3), half).unwrap();
        assert_eq!(policy::available_pollution_quota(&w, ActorId(3)), 1_000);
    }

    #[test]
    fn repooling_cannot_create_quota_after_emitting() {
        let mut w = pooled_world();
        w.actors[1].week_pollution = 800;
        assert_eq!(
            transfer_quota_to_corp(&mut w, ActorId(1), ActorId(3), Ratio::ONE),
            Err(Rejection::QuotaExceeded)
        );
        assert_eq!(w.actors[3].members[&ActorId(1)], Ratio::ZERO);
    }

    #[test]
    fn distance_rounds_up() {
        let a = Site {
            id: SiteId(0),
            name: "a".into(),
            region: RegionId(0),
            position: [0, 0],
            productivity: BTreeMap::new(),
            deposits: BTreeMap::new(),
        };
        let mut b = a.clone();
        b.position = [3, 4];
        assert_eq!(a.distance_km(&b), 5);
        b.position = [1, 1];
        assert_eq!(a.distance_km(&b), 2);
        assert_eq!(a.distance_km(&a), 0);
    }
}

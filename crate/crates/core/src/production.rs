//! Facilities: construction, production, transport, research and patents.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::error::Rejection;
use crate::goods::{split_with_remainder, GoodKind, Inventory, ItemLot, LotKey};
use crate::ids::{ActorId, BlueprintId, FacilityId, InnovationId, ShipmentId, SiteId};
use crate::ledger::{self, Account, AcquisitionSource, LedgerKind};
use crate::policy;
use crate::ratio::Ratio;
use crate::world::{ActorKind, World};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    /// Inputs per batch. Physical inputs are taken at the facility's site.
    #[serde(default)]
    pub inputs: BTreeMap<GoodKind, u64>,
    /// Site deposits extracted per batch, by resource name.
    #[serde(default)]
    pub extract: BTreeMap<String, u64>,
    pub output: GoodKind,
    pub output_per_batch: u64,
}

impl Recipe {
    pub fn simple(output: GoodKind, output_per_batch: u64) -> Recipe {
        Recipe {
            inputs: BTreeMap::new(),
            extract: BTreeMap::new(),
            output,
            output_per_batch,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FacilityClass {
    EnergyPlant {
        subtype: String,
        recipe: Recipe,
    },
    Factory {
        recipe: Recipe,
    },
    ResearchLab {
        effort_capacity: u64,
    },
    Transporter {
        capacity_t: u64,
        efficiency: Ratio,
        speed_km_per_week: u64,
    },
}

impl FacilityClass {
    /// Key used by site productivity maps and efficiency innovations.
    pub fn key(&self) -> &'static str {
        match self {
            FacilityClass::EnergyPlant { .. } => "energy_plant",
            FacilityClass::Factory { .. } => "factory",
            FacilityClass::ResearchLab { .. } => "research_lab",
            FacilityClass::Transporter { .. } => "transporter",
        }
    }

    pub fn recipe(&self) -> Option<&Recipe> {
        match self {
            FacilityClass::EnergyPlant { recipe, .. } | FacilityClass::Factory { recipe } => Some(recipe),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        match self {
            FacilityClass::EnergyPlant { recipe, .. } => {
                if recipe.output != GoodKind::Energy {
                    return Err("energy plants output energy".to_string());
                }
                if recipe.output_per_batch == 0 {
                    return Err("recipe.output_per_batch > 0".to_string());
                }
            }
            FacilityClass::Factory { recipe } => {
                if !recipe.output.is_physical() {
                    return Err("factories output a resource or item".to_string());
                }
                if recipe.output_per_batch == 0 {
                    return Err("recipe.output_per_batch > 0".to_string());
                }
            }
            FacilityClass::ResearchLab { effort_capacity } => {
                if *effort_capacity == 0 {
                    return Err("effort_capacity > 0".to_string());
                }
            }
            FacilityClass::Transporter {
                capacity_t,
                efficiency,
                speed_km_per_week,
            } => {
                if *capacity_t == 0 || efficiency.is_zero() || *speed_km_per_week == 0 {
                    return Err("capacity_t, efficiency and speed_km_per_week > 0".to_string());
                }
            }
        }
        if let Some(r) = self.recipe() {
            for g in r.inputs.keys() {
                if !g.is_lot_good() || g.is_instrument() {
                    return Err("recipe inputs are resources, items, energy or licenses".to_string());
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InnovationKind {
    /// Divides marginal energy and pollution per unit of facilities of
    /// `class` by `factor`.
    EfficiencyMultiplier { class: String, factor: Ratio },
    /// Licence pair enabling a combined plant; consumed by blueprints that
    /// list it as required.
    CombinedPlant { first: String, second: String },
    /// Licence enabling the named blueprint.
    RecipeUnlock { blueprint: String },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FacilityState {
    Building,
    Active,
    Shutdown,
    Retired,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResearchState {
    pub target: InnovationId,
    pub progress: u64,
    /// Energy spent so far; carried into the licences at filing.
    pub energy: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blueprint {
    pub id: BlueprintId,
    pub name: String,
    pub class: FacilityClass,
    #[serde(with = "crate::serde_seq")]
    pub bom: BTreeMap<GoodKind, u64>,
    pub build_energy_direct: u64,
    pub build_pollution: u64,
    pub required_licenses: Vec<InnovationId>,
    pub estimated_units: u64,
    pub marginal_energy_per_unit: u64,
    pub pollution_per_unit: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Innovation {
    pub id: InnovationId,
    pub name: String,
    pub kind: InnovationKind,
    pub required_effort: u64,
    pub planned_licenses: u64,
    pub patented_by: Option<ActorId>,
    pub embodied_per_license: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Facility {
    pub id: FacilityId,
    pub name: String,
    pub owner: ActorId,
    pub site: SiteId,
    pub blueprint: BlueprintId,
    pub class: FacilityClass,
    pub state: FacilityState,
    pub built_week: u32,
    pub embodied_build_energy: u64,
    pub estimated_units: u64,
    pub units_produced: u64,
    pub marginal_energy_per_unit: u64,
    pub pollution_per_unit: u64,
    /// Efficiency licences applied, in order.
    pub modifiers: Vec<InnovationId>,
    pub research: Option<ResearchState>,
    pub in_transit: Option<ShipmentId>,
}

impl Facility {
    #[allow(clippy::too_many_arguments)]
    pub fn from_blueprint(
        id: FacilityId,
        name: String,
        owner: ActorId,
        site: SiteId,
        bp: &Blueprint,
        estimated_units: u64,
        embodied_build_energy: u64,
        week: u32,
    ) -> Facility {
        Facility {
            id,
            name,
            owner,
            site,
            blueprint: bp.id,
            class: bp.class.clone(),
            state: FacilityState::Building,
            built_week: week,
            embodied_build_energy,
            estimated_units,
            units_produced: 0,
            marginal_energy_per_unit: bp.marginal_energy_per_unit,
            pollution_per_unit: bp.pollution_per_unit,
            modifiers: Vec::new(),
            research: None,
            in_transit: None,
        }
    }

    pub fn residual(&self) -> u64 {
        ledger::amortization_residual(self)
    }

    fn require_usable(&self) -> Result<(), Rejection> {
        match self.state {
            FacilityState::Active => Ok(()),
            FacilityState::Retired => Err(Rejection::AlreadyRetired),
            _ => Err(Rejection::FacilityNotActive),
        }
    }
}

fn require_not_government(world: &World, actor: ActorId) -> Result<(), Rejection> {
    if world.actor(actor)?.kind == ActorKind::Government {
        return Err(Rejection::GovernmentNotPermitted);
    }
    Ok(())
}

fn location_for(good: &GoodKind, site: SiteId) -> Option<SiteId> {
    good.is_physical().then_some(site)
}

// ---------------------------------------------------------------------------
// Construction

/// Starts building a facility. Consumed materials and required licences
/// pass their embodied energy into the facility; direct build energy is
/// generated for it and charged to the owner.
pub fn begin_construction(
    world: &mut World,
    actor: ActorId,
    blueprint: BlueprintId,
    site: SiteId,
    estimated_units: Option<u64>,
) -> Result<FacilityId, Rejection> {
    require_not_government(world, actor)?;
    world.site(site)?;
    let bp = world
        .blueprints
        .get(blueprint.index())
        .ok_or(Rejection::UnknownBlueprint)?
        .clone();
    let est = estimated_units.unwrap_or(bp.estimated_units);
    if est == 0 {
        return Err(Rejection::InvalidQuantity);
    }
    let inv = &world.actors[actor.index()].inventory;
    let mut take: Vec<ItemLot> = Vec::new();
    for lic in &bp.required_licenses {
        let lots = inv
            .plan_take(&GoodKind::License(*lic), None, 1)
            .ok_or(Rejection::MissingLicense)?;
        take.extend(lots);
    }
    for (good, qty) in &bp.bom {
        let lots = inv
            .plan_take(good, location_for(good, site), *qty)
            .ok_or(Rejection::MissingGoods)?;
        take.extend(lots);
    }
    // The combined plan must also be feasible when one good appears twice.
    let mut check = inv.clone();
    check.remove_lots(&take)?;
    if (bp.build_pollution as i128) > policy::pollution_headroom(world, actor) {
        return Err(Rejection::QuotaExceeded);
    }
    let materials: u128 = take.iter().map(ItemLot::embodied_total).sum();
    let build = u64::try_from(materials + bp.build_energy_direct as u128).map_err(|_| Rejection::Overflow)?;

    let week = world.week;
    let id = FacilityId(world.facilities.len() as u32);
    world.actors[actor.index()].inventory = check;
    world.ledger.record_u128(
        week,
        LedgerKind::EmbodimentTransfer,
        materials,
        Account::Actor(actor),
        Account::Facility(id),
    );
    world.ledger.record(
        week,
        LedgerKind::PrimaryGeneration,
        bp.build_energy_direct,
        Account::Source,
        Account::Facility(id),
    );
    ledger::charge_energy_acquisition(world, actor, bp.build_energy_direct, AcquisitionSource::SelfConsumed);
    world.actors[actor.index()].week_pollution += bp.build_pollution;
    world.current.emissions += bp.build_pollution;
    let name = alloc::format!("F{}", id.0);
    world
        .facilities
        .push(Facility::from_blueprint(id, name, actor, site, &bp, est, build, week));
    Ok(id)
}

// ---------------------------------------------------------------------------
// Production

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProductionOutcome {
    pub output: Vec<ItemLot>,
    pub pollution: u64,
}

/// Checks that a production request is admissible now, without inputs.
pub fn check_produce(world: &World, actor: ActorId, facility: FacilityId, batches: u64) -> Result<(), Rejection> {
    let f = world.owned_facility(actor, facility)?;
    f.require_usable()?;
    if f.class.recipe().is_none() {
        return Err(Rejection::WrongFacilityClass);
    }
    if f.in_transit.is_some() {
        return Err(Rejection::InTransit);
    }
    if batches == 0 {
        return Err(Rejection::InvalidQuantity);
    }
    Ok(())
}

/// Output units `batches` would yield at the facility's site.
pub fn projected_output(world: &World, facility: FacilityId, batches: u64) -> u64 {
    let f = &world.facilities[facility.index()];
    let Some(recipe) = f.class.recipe() else {
        return 0;
    };
    let mult = world.sites[f.site.index()].productivity_for(f.class.key());
    mult.mul_floor(batches.saturating_mul(recipe.output_per_batch))
}

/// Pollution `batches` would emit.
pub fn projected_pollution(world: &World, facility: FacilityId, batches: u64) -> u64 {
    let f = &world.facilities[facility.index()];
    projected_output(world, facility, batches).saturating_mul(f.pollution_per_unit)
}

/// Runs up to `batches` batches; shortfalls in inputs or deposits reduce
/// the run to the feasible number of batches.
pub fn produce(world: &mut World, facility: FacilityId, batches: u64) -> Result<ProductionOutcome, Rejection> {
    let f = world.facility(facility)?;
    let owner = f.owner;
    check_produce(world, owner, facility, batches)?;
    let f = &world.facilities[facility.index()];
    let recipe = f.class.recipe().cloned().ok_or(Rejection::WrongFacilityClass)?;
    let site = f.site;
    let inv = &world.actors[owner.index()].inventory;
    let mut b = batches;
    for (good, per) in &recipe.inputs {
        if *per > 0 {
            b = b.min(inv.total_of(good, location_for(good, site)) / per);
        }
    }
    let deposits = &world.sites[site.index()].deposits;
    for (res, per) in &recipe.extract {
        if *per > 0 {
            b = b.min(deposits.get(res).copied().unwrap_or(0) / per);
        }
    }
    if b == 0 {
        return Err(Rejection::MissingGoods);
    }
    let n_out = projected_output(world, facility, b);
    if n_out == 0 {
        return Err(Rejection::NoOutput);
    }
    let f = &world.facilities[facility.index()];
    let pollution = n_out.checked_mul(f.pollution_per_unit).ok_or(Rejection::Overflow)?;
    if pollution as i128 > policy::pollution_headroom(world, owner) {
        return Err(Rejection::QuotaExceeded);
    }
    let mut inputs: Vec<ItemLot> = Vec::new();
    for (good, per) in &recipe.inputs {
        let lots = inv
            .plan_take(good, location_for(good, site), per * b)
            .ok_or(Rejection::MissingGoods)?;
        inputs.extend(lots);
    }
    let input_energy: u128 = inputs.iter().map(ItemLot::embodied_total).sum();
    let amort = ledger::amortization_for(f, n_out);
    let marginal = (f.marginal_energy_per_unit as u128) * n_out as u128;
    let marginal = u64::try_from(marginal).map_err(|_| Rejection::Overflow)?;
    let total = input_energy + amort as u128 + marginal as u128;
    let (share, rem) = split_with_remainder(total, n_out);
    if share as u128 + rem as u128 > u64::MAX as u128 {
        return Err(Rejection::Overflow);
    }
    let loc = location_for(&recipe.output, site);
    let mut output = Vec::new();
    if rem == 0 {
        output.push(ItemLot::new(LotKey::new(recipe.output.clone(), loc, share), n_out));
    } else {
        if n_out > 1 {
            output.push(ItemLot::new(LotKey::new(recipe.output.clone(), loc, share), n_out - 1));
        }
        output.push(ItemLot::new(LotKey::new(recipe.output.clone(), loc, share + rem), 1));
    }

    let week = world.week;
    world.actors[owner.index()].inventory.remove_lots(&inputs)?;
    let site_deposits = &mut world.sites[site.index()].deposits;
    for (res, per) in &recipe.extract {
        if let Some(d) = site_deposits.get_mut(res) {
            *d -= per * b;
        }
    }
    for lot in &output {
        world.actors[owner.index()].inventory.add_lot(lot.clone());
    }
    world.ledger.record(
        week,
        LedgerKind::EmbodimentTransfer,
        amort,
        Account::Facility(facility),
        Account::Actor(owner),
    );
    world.ledger.record(
        week,
        LedgerKind::PrimaryGeneration,
        marginal,
        Account::Source,
        Account::Actor(owner),
    );
    ledger::charge_energy_acquisition(world, owner, marginal, AcquisitionSource::SelfConsumed);
    world.actors[owner.index()].week_pollution += pollution;
    world.current.emissions += pollution;
    world.facilities[facility.index()].units_produced += n_out;
    Ok(ProductionOutcome { output, pollution })
}

// ---------------------------------------------------------------------------
// Transport

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shipment {
    pub id: ShipmentId,
    pub owner: ActorId,
    pub transporter: FacilityId,
    pub cargo: Inventory,
    pub from: SiteId,
    pub to: SiteId,
    pub dispatched_week: u32,
    pub arrival_week: u32,
    pub delivered: bool,
}

/// Journey energy in kWh for `mass_kg` over `distance_km`.
pub fn journey_energy(distance_km: u64, mass_kg: u64, rate_kwh_per_km_t: u64, efficiency: Ratio) -> u128 {
    let num = distance_km as u128 * mass_kg as u128 * rate_kwh_per_km_t as u128 * efficiency.den() as u128;
    let den = 1000u128 * efficiency.num().max(1) as u128;
    num.div_ceil(den)
}

/// Journey pollution in PU, same shape as [`journey_energy`].
pub fn journey_pollution(distance_km: u64, mass_kg: u64, per_km_t: Ratio, efficiency: Ratio) -> u128 {
    let num = distance_km as u128 * mass_kg as u128 * per_km_t.num() as u128 * efficiency.den() as u128;
    let den = 1000u128 * per_km_t.den() as u128 * efficiency.num().max(1) as u128;
    num.div_ceil(den)
}

/// Loads cargo at the transporter's site and sends it to `to_site`. The
/// cargo's embodied energy grows by the transporter's amortization,
/// marginal energy and journey energy, spread evenly with the remainder on
/// the last unit.
pub fn transport_dispatch(
    world: &mut World,
    actor: ActorId,
    transporter: FacilityId,
    cargo: &[ItemLot],
    to_site: SiteId,
) -> Result<ShipmentId, Rejection> {
    let t = world.owned_facility(actor, transporter)?;
    t.require_usable()?;
    let FacilityClass::Transporter {
        capacity_t,
        efficiency,
        speed_km_per_week,
    } = t.class.clone()
    else {
        return Err(Rejection::WrongFacilityClass);
    };
    if t.in_transit.is_some() {
        return Err(Rejection::InTransit);
    }
    let from = t.site;
    let to = world.site(to_site)?;
    let distance = world.sites[from.index()].distance_km(to);
    let mut units: u64 = 0;
    let mut mass: u128 = 0;
    let mut merged = Inventory::new();
    for lot in cargo {
        if !lot.key.good.is_physical() {
            return Err(Rejection::NotTransportable);
        }
        if lot.key.site != Some(from) {
            return Err(Rejection::MissingGoods);
        }
        if lot.quantity == 0 {
            return Err(Rejection::InvalidQuantity);
        }
        units = units.checked_add(lot.quantity).ok_or(Rejection::Overflow)?;
        mass += world.mass_kg(&lot.key.good) as u128 * lot.quantity as u128;
        merged.add_lot(lot.clone());
    }
    if units == 0 {
        return Err(Rejection::InvalidQuantity);
    }
    let inv = &world.actors[actor.index()].inventory;
    for (k, q) in merged.iter() {
        if inv.quantity(k) < q {
            return Err(Rejection::MissingGoods);
        }
    }
    if mass > capacity_t as u128 * 1000 {
        return Err(Rejection::OverCapacity);
    }
    let mass = mass as u64;
    let c = &world.constants;
    let energy = journey_energy(distance, mass, c.transport_rate_kwh_per_km_t, efficiency);
    let pollution = journey_pollution(distance, mass, c.transport_pollution_per_km_t, efficiency);
    if pollution as i128 > policy::pollution_headroom(world, actor) {
        return Err(Rejection::QuotaExceeded);
    }
    let t = &world.facilities[transporter.index()];
    let amort = ledger::amortization_for(t, units);
    let marginal = t.marginal_energy_per_unit as u128 * units as u128;
    let generated = u64::try_from(marginal + energy).map_err(|_| Rejection::Overflow)?;
    let (add, rem) = split_with_remainder(amort as u128 + generated as u128, units);

    let mut shipped = Inventory::new();
    let lots: Vec<(LotKey, u64)> = merged.iter().map(|(k, q)| (k.clone(), q)).collect();
    let last = lots.len() - 1;
    for (i, (k, q)) in lots.iter().enumerate() {
        let moved = |extra: u64| LotKey::new(k.good.clone(), Some(to_site), k.embodied_per_unit + add + extra);
        if i == last && rem > 0 {
            shipped.add(moved(0), q - 1);
            shipped.add(moved(rem), 1);
        } else {
            shipped.add(moved(0), *q);
        }
    }
    let cargo_energy = merged.embodied_total();

    let week = world.week;
    let id = ShipmentId(world.shipments.len() as u32);
    for (k, q) in merged.iter() {
        world.actors[actor.index()].inventory.remove(k, q)?;
    }
    world.ledger.record_u128(
        week,
        LedgerKind::EmbodimentTransfer,
        cargo_energy,
        Account::Actor(actor),
        Account::Shipment(id),
    );
    world.ledger.record(
        week,
        LedgerKind::EmbodimentTransfer,
        amort,
        Account::Facility(transporter),
        Account::Shipment(id),
    );
    world.ledger.record(
        week,
        LedgerKind::PrimaryGeneration,
        generated,
        Account::Source,
        Account::Shipment(id),
    );
    ledger::charge_energy_acquisition(world, actor, generated, AcquisitionSource::SelfConsumed);
    world.actors[actor.index()].week_pollution += pollution as u64;
    world.current.emissions += pollution as u64;
    let weeks = distance.div_ceil(speed_km_per_week);
    let t = &mut world.facilities[transporter.index()];
    t.units_produced += units;
    t.in_transit = Some(id);
    world.shipments.push(Shipment {
        id,
        owner: actor,
        transporter,
        cargo: shipped,
        from,
        to: to_site,
        dispatched_week: week,
        arrival_week: week + u32::try_from(weeks).unwrap_or(u32::MAX),
        delivered: false,
    });
    Ok(id)
}

/// Delivers every shipment due by the current week. Returns the ids.
pub fn deliver_arrivals(world: &mut World) -> Vec<ShipmentId> {
    let week = world.week;
    let mut done = Vec::new();
    for i in 0..world.shipments.len() {
        let s = &world.shipments[i];
        if s.delivered || s.arrival_week > week {
            continue;
        }
        let (id, owner, transporter, to) = (s.id, s.owner, s.transporter, s.to);
        let cargo = core::mem::take(&mut world.shipments[i].cargo);
        let energy = cargo.embodied_total();
        for (k, q) in cargo.iter() {
            world.actors[owner.index()].inventory.add(k.clone(), q);
        }
        world.ledger.record_u128(
            week,
            LedgerKind::EmbodimentTransfer,
            energy,
            Account::Shipment(id),
            Account::Actor(owner),
        );
        world.shipments[i].delivered = true;
        let t = &mut world.facilities[transporter.index()];
        t.in_transit = None;
        t.site = to;
        done.push(id);
    }
    done
}

// ---------------------------------------------------------------------------
// Research and patents

fn research_target(world: &World, lab: &Facility, target: Option<InnovationId>) -> Result<InnovationId, Rejection> {
    let id = match (target, &lab.research) {
        (Some(t), Some(r)) if r.target != t && r.progress > 0 => return Err(Rejection::NoResearchTarget),
        (Some(t), _) => t,
        (None, Some(r)) => r.target,
        (None, None) => return Err(Rejection::NoResearchTarget),
    };
    let inn = world.innovations.get(id.index()).ok_or(Rejection::UnknownInnovation)?;
    if inn.patented_by.is_some() {
        return Err(Rejection::AlreadyPatented);
    }
    Ok(id)
}

/// Admissibility of committing `effort` more this week, counting effort
/// already committed to the lab this week.
pub fn check_research(
    world: &World,
    actor: ActorId,
    lab: FacilityId,
    effort: u64,
    target: Option<InnovationId>,
) -> Result<InnovationId, Rejection> {
    let f = world.owned_facility(actor, lab)?;
    f.require_usable()?;
    let FacilityClass::ResearchLab { effort_capacity } = f.class else {
        return Err(Rejection::WrongFacilityClass);
    };
    if effort == 0 {
        return Err(Rejection::InvalidQuantity);
    }
    let committed = world.current.pending_research.get(&lab).map_or(0, |p| p.0);
    if committed.saturating_add(effort) > effort_capacity {
        return Err(Rejection::OverEffortCapacity);
    }
    if let Some((_, Some(t))) = world.current.pending_research.get(&lab) {
        if target.is_some_and(|x| x != *t) {
            return Err(Rejection::NoResearchTarget);
        }
    }
    research_target(world, f, target)
}

/// Adds effort toward an innovation; each unit generates
/// `energy_per_effort_kwh` charged to the owner and held in the lab's
/// research account until filing. Returns accumulated progress.
pub fn research_tick(
    world: &mut World,
    lab: FacilityId,
    effort: u64,
    target: Option<InnovationId>,
) -> Result<u64, Rejection> {
    let f = world.facility(lab)?;
    let owner = f.owner;
    let FacilityClass::ResearchLab { effort_capacity } = f.class else {
        return Err(Rejection::WrongFacilityClass);
    };
    f.require_usable()?;
    if effort == 0 {
        return Err(Rejection::InvalidQuantity);
    }
    if effort > effort_capacity {
        return Err(Rejection::OverEffortCapacity);
    }
    let target = research_target(world, f, target)?;
    let energy = effort
        .checked_mul(world.constants.energy_per_effort_kwh)
        .ok_or(Rejection::Overflow)?;
    let week = world.week;
    world.ledger.record(
        week,
        LedgerKind::PrimaryGeneration,
        energy,
        Account::Source,
        Account::Research(lab),
    );
    ledger::charge_energy_acquisition(world, owner, energy, AcquisitionSource::SelfConsumed);
    let f = &mut world.facilities[lab.index()];
    let r = f.research.get_or_insert(ResearchState {
        target,
        progress: 0,
        energy: 0,
    });
    r.target = target;
    r.progress += effort;
    r.energy += energy;
    Ok(r.progress)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum PatentDecision {
    Granted {
        innovation: InnovationId,
        licenses: u64,
        embodied_per_license: u64,
    },
    /// Refused by the bureau; the research energy is written off.
    Refused {
        innovation: InnovationId,
        reason: Rejection,
    },
}

/// Bureau rule check on an innovation.
pub fn bureau_check(world: &World, kind: &InnovationKind) -> Result<(), Rejection> {
    if let InnovationKind::EfficiencyMultiplier { factor, .. } = kind {
        if *factor < world.constants.patent_min_factor {
            return Err(Rejection::PatentNoImpact);
        }
        if *factor > world.constants.patent_max_factor {
            return Err(Rejection::PatentDestabilizing);
        }
    }
    Ok(())
}

/// Files the lab's completed research with the patent bureau. Granted
/// patents mint `planned_licenses` licences carrying the lab's
/// amortization share plus the research energy.
pub fn file_patent(world: &mut World, actor: ActorId, lab: FacilityId) -> Result<PatentDecision, Rejection> {
    let f = world.owned_facility(actor, lab)?;
    if f.state == FacilityState::Retired {
        return Err(Rejection::AlreadyRetired);
    }
    let r = f.research.clone().ok_or(Rejection::NoResearchTarget)?;
    let inn = &world.innovations[r.target.index()];
    if inn.patented_by.is_some() {
        return Err(Rejection::AlreadyPatented);
    }
    if r.progress < inn.required_effort {
        return Err(Rejection::ResearchIncomplete);
    }
    let week = world.week;
    if let Err(reason) = bureau_check(world, &inn.kind) {
        world.facilities[lab.index()].research = None;
        world.ledger.record(
            week,
            LedgerKind::Consumption,
            r.energy,
            Account::Research(lab),
            Account::Sink,
        );
        return Ok(PatentDecision::Refused {
            innovation: r.target,
            reason,
        });
    }
    let planned = inn.planned_licenses;
    let share = ledger::amortization_for(f, planned);
    let (per, rem) = split_with_remainder(share as u128 + r.energy as u128, planned);
    let key = |e: u64| LotKey::new(GoodKind::License(r.target), None, e);
    let inv = &mut world.actors[actor.index()].inventory;
    if rem == 0 {
        inv.add(key(per), planned);
    } else {
        inv.add(key(per), planned - 1);
        inv.add(key(per + rem), 1);
    }
    world.ledger.record(
        week,
        LedgerKind::EmbodimentTransfer,
        share,
        Account::Facility(lab),
        Account::Actor(actor),
    );
    world.ledger.record(
        week,
        LedgerKind::EmbodimentTransfer,
        r.energy,
        Account::Research(lab),
        Account::Actor(actor),
    );
    let f = &mut world.facilities[lab.index()];
    f.research = None;
    f.units_produced += planned;
    let inn = &mut world.innovations[r.target.index()];
    inn.patented_by = Some(actor);
    inn.embodied_per_license = Some(per);
    Ok(PatentDecision::Granted {
        innovation: r.target,
        licenses: planned,
        embodied_per_license: per,
    })
}

/// Consumes one licence to make a facility more efficient.
pub fn apply_license(
    world: &mut World,
    actor: ActorId,
    facility: FacilityId,
    innovation: InnovationId,
) -> Result<(), Rejection> {
    let f = world.owned_facility(actor, facility)?;
    if f.state == FacilityState::Retired {
        return Err(Rejection::AlreadyRetired);
    }
    let inn = world
        .innovations
        .get(innovation.index())
        .ok_or(Rejection::UnknownInnovation)?;
    let InnovationKind::EfficiencyMultiplier { class, factor } = &inn.kind else {
        return Err(Rejection::WrongFacilityClass);
    };
    if class != f.class.key() {
        return Err(Rejection::WrongFacilityClass);
    }
    if f.modifiers.contains(&innovation) {
        return Err(Rejection::LicenseAlreadyApplied);
    }
    let factor = *factor;
    let lots = world.actors[actor.index()]
        .inventory
        .plan_take(&GoodKind::License(innovation), None, 1)
        .ok_or(Rejection::MissingLicense)?;
    let energy = lots[0].key.embodied_per_unit;
    let week = world.week;
    world.actors[actor.index()].inventory.remove_lots(&lots)?;
    world.ledger.record(
        week,
        LedgerKind::Consumption,
        energy,
        Account::Actor(actor),
        Account::Sink,
    );
    let f = &mut world.facilities[facility.index()];
    // Factors below one cannot pass the bureau; the floor keeps this monotone.
    if factor >= Ratio::ONE {
        f.marginal_energy_per_unit = factor
            .div_floor(f.marginal_energy_per_unit)
            .unwrap_or(f.marginal_energy_per_unit);
        f.pollution_per_unit = factor.div_floor(f.pollution_per_unit).unwrap_or(f.pollution_per_unit);
    }
    f.modifiers.push(innovation);
    Ok(())
}

/// Facilities under construction become active the week after they were
/// started; shut facilities resume.
pub fn activate_facilities(world: &mut World) {
    let week = world.week;
    for f in world.facilities.iter_mut() {
        match f.state {
            FacilityState::Building if f.built_week < week => f.state = FacilityState::Active,
            FacilityState::Shutdown => f.state = FacilityState::Active,
            _ => {}
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn journey_examples() {
        assert_eq!(journey_energy(100, 10_000, 2, Ratio::ONE), 2_000);
        assert_eq!(journey_energy(0, 10_000, 2, Ratio::ONE), 0);
        assert_eq!(journey_energy(1, 1, 1, Ratio::ONE), 1);
        assert_eq!(journey_energy(100, 10_000, 2, Ratio::integer(2)), 1_000);
        assert_eq!(
            journey_pollution(100, 10_000, Ratio::new(1, 100).unwrap(), Ratio::ONE),
            10
        );
    }

    #[test]
    fn class_keys_and_validation() {
        let plant = FacilityClass::EnergyPlant {
            subtype: "wind".into(),
            recipe: Recipe::simple(GoodKind::Energy, 10),
        };
        assert_eq!(plant.key(), "energy_plant");
        assert!(plant.validate().is_ok());
        let bad = FacilityClass::Factory {
            recipe: Recipe::simple(GoodKind::Energy, 1),
        };
        assert!(bad.validate().is_err());
    }
}

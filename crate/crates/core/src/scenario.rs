//! Scenario definitions: the complete, validated input of a run.
//!
//! A scenario names every entity by a string id. [`crate::world::new_world`]
//! resolves names into dense numeric ids. Every optional field has a
//! default that is written back out by the canonical form, so a canonical
//! scenario carries no hidden defaults.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::agents::{Action, StrategyKind, StrategyParams};
use crate::digest::sha256_hex;
use crate::error::ScenarioError;
use crate::goods::GoodKind;
use crate::policy::{default_brackets, Bracket, PolicyChange, PolicyRegime};
use crate::production::{FacilityClass, InnovationKind};
use crate::ratio::Ratio;

pub const SCHEMA: &str = "energetics-scenario/1";

/// Economy-wide constants.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    /// kWh per km per tonne of cargo, before facility efficiency.
    pub transport_rate_kwh_per_km_t: u64,
    /// Pollution units per km per tonne of cargo, before facility efficiency.
    pub transport_pollution_per_km_t: Ratio,
    /// kWh charged per researcher-week of effort.
    pub energy_per_effort_kwh: u64,
    /// Weeks before an unattended energy debt is settled automatically.
    pub debt_grace_weeks: u32,
    /// Maximum actions per actor per week.
    pub action_budget: u32,
    /// Weekly allowance reduction for debts settled against allowance, as a
    /// fraction of the regional tax-free allowance.
    pub debt_reduction_fraction: Ratio,
    /// Energy the governments can inject into the grid each week.
    pub grid_bootstrap_kwh_per_week: u64,
    /// Embodied kWh per kWh of government-produced grid energy.
    pub grid_embodied_per_kwh: u64,
    /// Smallest efficiency factor the patent bureau accepts.
    pub patent_min_factor: Ratio,
    /// Largest efficiency factor the patent bureau accepts.
    pub patent_max_factor: Ratio,
    /// Price levels per book side shown to agents.
    pub view_depth: u32,
}

impl Default for Constants {
    fn default() -> Self {
        Constants {
            transport_rate_kwh_per_km_t: 2,
            transport_pollution_per_km_t: Ratio::new(1, 100).unwrap_or(Ratio::ZERO),
            energy_per_effort_kwh: 1_000,
            debt_grace_weeks: 12,
            action_budget: 32,
            debt_reduction_fraction: Ratio::new(1, 10).unwrap_or(Ratio::ONE),
            grid_bootstrap_kwh_per_week: 1_000_000_000,
            grid_embodied_per_kwh: 1,
            patent_min_factor: Ratio::new(101, 100).unwrap_or(Ratio::ONE),
            patent_max_factor: Ratio::new(3, 2).unwrap_or(Ratio::ONE),
            view_depth: 5,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GovernmentSpec {
    pub money: i64,
}

/// Physical good catalog entry.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoodSpec {
    pub good: GoodKind,
    pub mass_kg: u64,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegimeSpec {
    pub tax_free_allowance: i64,
    #[serde(default = "default_brackets")]
    pub brackets: Vec<Bracket>,
    pub pollution_cap: i64,
    #[serde(default = "default_true")]
    pub allowance_sale_enabled: bool,
    #[serde(default = "default_true")]
    pub quota_trade_enabled: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSpec {
    pub id: String,
    /// Posted grid price in cents per kWh.
    pub reference_price: i64,
    pub grid_buyback_fraction: Ratio,
    pub regime: RegimeSpec,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteSpec {
    pub id: String,
    pub region: String,
    pub position: [i64; 2],
    #[serde(default)]
    pub productivity: BTreeMap<String, Ratio>,
    #[serde(default)]
    pub deposits: BTreeMap<String, i64>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlueprintSpec {
    pub id: String,
    pub class: FacilityClass,
    #[serde(default)]
    pub bom: BTreeMap<GoodKind, u64>,
    #[serde(default)]
    pub build_energy_direct: u64,
    #[serde(default)]
    pub build_pollution: u64,
    #[serde(default)]
    pub required_licenses: Vec<String>,
    pub estimated_units: u64,
    #[serde(default)]
    pub marginal_energy_per_unit: u64,
    #[serde(default)]
    pub pollution_per_unit: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InnovationSpec {
    pub id: String,
    pub kind: InnovationKind,
    pub required_effort: u64,
    pub planned_licenses: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LotSpec {
    pub good: GoodKind,
    pub quantity: i64,
    #[serde(default)]
    pub embodied_per_unit: u64,
    /// Location of physical goods; defaults to the holder's home site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScriptStep {
    pub week: u32,
    pub actions: Vec<Action>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StrategySpec {
    pub kind: String,
    #[serde(default)]
    pub params: StrategyParams,
    /// Only for `scripted`. Actions use the engine's numeric ids.
    #[serde(default)]
    pub script: Vec<ScriptStep>,
}

impl StrategySpec {
    pub fn scripted_empty() -> Self {
        StrategySpec {
            kind: "scripted".to_string(),
            params: StrategyParams::default(),
            script: Vec::new(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorSpec {
    pub id: String,
    pub kind: String,
    /// Home site; the home region is the site's region.
    pub site: String,
    #[serde(default)]
    pub money: i64,
    pub strategy: StrategySpec,
    #[serde(default)]
    pub inventory: Vec<LotSpec>,
    /// Corporations only: member player id to pooled quota fraction.
    #[serde(default)]
    pub members: BTreeMap<String, Ratio>,
}

/// `count` identical actors named `{prefix}{n:04}` for n in 1..=count,
/// assigned to `sites` round-robin.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorGroupSpec {
    pub prefix: String,
    pub count: u32,
    pub kind: String,
    pub sites: Vec<String>,
    #[serde(default)]
    pub money: i64,
    pub strategy: StrategySpec,
    #[serde(default)]
    pub inventory: Vec<LotSpec>,
}

impl ActorGroupSpec {
    pub fn member_id(&self, n: u32) -> String {
        format!("{}{:04}", self.prefix, n)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilitySpec {
    pub id: String,
    pub owner: String,
    pub site: String,
    pub blueprint: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub estimated_units: Option<u64>,
    /// Build energy already sunk into the facility; defaults to the
    /// blueprint's direct build energy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub embodied_build_energy: Option<u64>,
    #[serde(default)]
    pub units_produced: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyEventSpec {
    pub week: u32,
    pub region: String,
    pub change: PolicyChange,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub schema: String,
    pub seed: u64,
    pub weeks: u32,
    #[serde(default)]
    pub constants: Constants,
    #[serde(default)]
    pub government: GovernmentSpec,
    #[serde(default)]
    pub goods: Vec<GoodSpec>,
    pub regions: Vec<RegionSpec>,
    pub sites: Vec<SiteSpec>,
    #[serde(default)]
    pub blueprints: Vec<BlueprintSpec>,
    #[serde(default)]
    pub innovations: Vec<InnovationSpec>,
    #[serde(default)]
    pub actors: Vec<ActorSpec>,
    #[serde(default)]
    pub actor_groups: Vec<ActorGroupSpec>,
    #[serde(default)]
    pub facilities: Vec<FacilitySpec>,
    #[serde(default)]
    pub policy_events: Vec<PolicyEventSpec>,
}

pub const GOVERNMENT_NAME: &str = "GOV";

fn check_unique<'a>(
    kind: &'static str,
    ids: impl Iterator<Item = &'a str>,
) -> Result<BTreeSet<&'a str>, ScenarioError> {
    let mut seen = BTreeSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(ScenarioError::DuplicateId {
                kind,
                id: id.to_string(),
            });
        }
    }
    Ok(seen)
}

fn non_negative(field: String, v: i64) -> Result<u64, ScenarioError> {
    u64::try_from(v).map_err(|_| ScenarioError::validation(field, "≥ 0"))
}

impl RegimeSpec {
    pub fn to_regime(&self, region: &str) -> Result<PolicyRegime, ScenarioError> {
        let _ = region;
        let regime = PolicyRegime {
            tax_free_allowance: non_negative("regime.tax_free_allowance".into(), self.tax_free_allowance)?,
            brackets: self.brackets.clone(),
            pollution_cap: non_negative("regime.pollution_cap".into(), self.pollution_cap)?,
            allowance_sale_enabled: self.allowance_sale_enabled,
            quota_trade_enabled: self.quota_trade_enabled,
        };
        regime
            .validate()
            .map_err(|e| ScenarioError::validation("regime.brackets", e.to_string()))?;
        Ok(regime)
    }
}

/// Kinds accepted in `actors[].kind`.
pub fn parse_actor_kind(s: &str) -> Option<crate::world::ActorKind> {
    match s {
        "player" => Some(crate::world::ActorKind::Player),
        "corporation" => Some(crate::world::ActorKind::Corporation),
        _ => None,
    }
}

impl Scenario {
    /// Minimal valid scenario: one region, one site, nothing else.
    pub fn minimal() -> Scenario {
        Scenario {
            schema: SCHEMA.to_string(),
            seed: 0,
            weeks: 0,
            constants: Constants::default(),
            government: GovernmentSpec::default(),
            goods: Vec::new(),
            regions: alloc::vec![RegionSpec {
                id: "R1".into(),
                reference_price: 10,
                grid_buyback_fraction: Ratio::new(4, 5).unwrap_or(Ratio::ONE),
                regime: RegimeSpec {
                    tax_free_allowance: 100_000,
                    brackets: default_brackets(),
                    pollution_cap: 1_000,
                    allowance_sale_enabled: true,
                    quota_trade_enabled: true,
                },
            }],
            sites: alloc::vec![SiteSpec {
                id: "S1".into(),
                region: "R1".into(),
                position: [0, 0],
                productivity: BTreeMap::new(),
                deposits: BTreeMap::new(),
            }],
            blueprints: Vec::new(),
            innovations: Vec::new(),
            actors: Vec::new(),
            actor_groups: Vec::new(),
            facilities: Vec::new(),
            policy_events: Vec::new(),
        }
    }

    /// Checks every referenced entity and regime rule.
    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.schema != SCHEMA {
            return Err(ScenarioError::validation("schema", format!("= {SCHEMA:?}")));
        }
        self.validate_constants()?;
        non_negative("government.money".into(), self.government.money)?;

        let mut goods_seen = BTreeSet::new();
        for g in &self.goods {
            if !g.good.is_physical() {
                return Err(ScenarioError::validation(
                    format!("goods[{}]", g.good),
                    "must be a resource or item",
                ));
            }
            if !goods_seen.insert(g.good.clone()) {
                return Err(ScenarioError::DuplicateId {
                    kind: "good",
                    id: g.good.to_string(),
                });
            }
        }

        if self.regions.is_empty() {
            return Err(ScenarioError::validation("regions", "must not be empty"));
        }
        let regions = check_unique("region", self.regions.iter().map(|r| r.id.as_str()))?;
        let mut regimes: BTreeMap<&str, PolicyRegime> = BTreeMap::new();
        for r in &self.regions {
            if r.reference_price <= 0 {
                return Err(ScenarioError::validation(
                    format!("regions[{}].reference_price", r.id),
                    "> 0",
                ));
            }
            if !r.grid_buyback_fraction.le_one() {
                return Err(ScenarioError::validation(
                    format!("regions[{}].grid_buyback_fraction", r.id),
                    "≤ 1",
                ));
            }
            regimes.insert(r.id.as_str(), r.regime.to_regime(&r.id)?);
        }

        let sites = check_unique("site", self.sites.iter().map(|s| s.id.as_str()))?;
        if sites.is_empty() {
            return Err(ScenarioError::validation("sites", "must not be empty"));
        }
        for s in &self.sites {
            if !regions.contains(s.region.as_str()) {
                return Err(ScenarioError::dangling(format!("site {}", s.id), &s.region));
            }
            for (class, m) in &s.productivity {
                if m.is_zero() {
                    return Err(ScenarioError::validation(
                        format!("sites[{}].productivity.{}", s.id, class),
                        "> 0",
                    ));
                }
            }
            for (res, stock) in &s.deposits {
                non_negative(format!("sites[{}].deposits.{}", s.id, res), *stock)?;
            }
        }

        let innovations = check_unique("innovation", self.innovations.iter().map(|i| i.id.as_str()))?;
        let blueprints = check_unique("blueprint", self.blueprints.iter().map(|b| b.id.as_str()))?;
        for b in &self.blueprints {
            let field = |f: &str| format!("blueprints[{}].{}", b.id, f);
            if b.estimated_units == 0 {
                return Err(ScenarioError::validation(field("estimated_units"), "> 0"));
            }
            b.class
                .validate()
                .map_err(|rule| ScenarioError::validation(field("class"), rule))?;
            for g in b.bom.keys() {
                if g.is_instrument() || !g.is_lot_good() {
                    return Err(ScenarioError::validation(
                        field("bom"),
                        "only resources, items, energy and licenses",
                    ));
                }
            }
            for l in &b.required_licenses {
                if !innovations.contains(l.as_str()) {
                    return Err(ScenarioError::dangling(format!("blueprint {}", b.id), l));
                }
            }
        }
        for i in &self.innovations {
            let field = |f: &str| format!("innovations[{}].{}", i.id, f);
            if i.planned_licenses == 0 {
                return Err(ScenarioError::validation(field("planned_licenses"), "> 0"));
            }
            if i.required_effort == 0 {
                return Err(ScenarioError::validation(field("required_effort"), "> 0"));
            }
            if let InnovationKind::RecipeUnlock { blueprint } = &i.kind {
                if !blueprints.contains(blueprint.as_str()) {
                    return Err(ScenarioError::dangling(format!("innovation {}", i.id), blueprint));
                }
            }
        }

        let mut actor_ids: Vec<String> = alloc::vec![GOVERNMENT_NAME.to_string()];
        let mut kinds: BTreeMap<String, crate::world::ActorKind> = BTreeMap::new();
        for a in &self.actors {
            actor_ids.push(a.id.clone());
        }
        for g in &self.actor_groups {
            for n in 1..=g.count {
                actor_ids.push(g.member_id(n));
            }
        }
        let actors = check_unique("actor", actor_ids.iter().map(String::as_str))?;

        for a in &self.actors {
            let field = |f: &str| format!("actors[{}].{}", a.id, f);
            let kind = parse_actor_kind(&a.kind)
                .ok_or_else(|| ScenarioError::validation(field("kind"), "must be player or corporation"))?;
            kinds.insert(a.id.clone(), kind);
            if !sites.contains(a.site.as_str()) {
                return Err(ScenarioError::dangling(format!("actor {}", a.id), &a.site));
            }
            non_negative(field("money"), a.money)?;
            validate_strategy(&field("strategy"), &a.strategy)?;
            validate_lots(&field("inventory"), &a.inventory, &sites, &innovations)?;
        }
        for g in &self.actor_groups {
            let field = |f: &str| format!("actor_groups[{}].{}", g.prefix, f);
            let kind = parse_actor_kind(&g.kind)
                .ok_or_else(|| ScenarioError::validation(field("kind"), "must be player or corporation"))?;
            if g.sites.is_empty() {
                return Err(ScenarioError::validation(field("sites"), "must not be empty"));
            }
            for s in &g.sites {
                if !sites.contains(s.as_str()) {
                    return Err(ScenarioError::dangling(format!("actor group {}", g.prefix), s));
                }
            }
            non_negative(field("money"), g.money)?;
            validate_strategy(&field("strategy"), &g.strategy)?;
            validate_lots(&field("inventory"), &g.inventory, &sites, &innovations)?;
            for n in 1..=g.count {
                kinds.insert(g.member_id(n), kind);
            }
        }
        let mut membership: BTreeSet<&str> = BTreeSet::new();
        for a in &self.actors {
            if a.members.is_empty() {
                continue;
            }
            if kinds.get(&a.id) != Some(&crate::world::ActorKind::Corporation) {
                return Err(ScenarioError::validation(
                    format!("actors[{}].members", a.id),
                    "only corporations have members",
                ));
            }
            for (m, f) in &a.members {
                if !actors.contains(m.as_str()) {
                    return Err(ScenarioError::dangling(format!("corporation {}", a.id), m));
                }
                if kinds.get(m) != Some(&crate::world::ActorKind::Player) {
                    return Err(ScenarioError::validation(
                        format!("actors[{}].members.{}", a.id, m),
                        "must be a player",
                    ));
                }
                if !f.le_one() {
                    return Err(ScenarioError::validation(
                        format!("actors[{}].members.{}", a.id, m),
                        "fraction in [0,1]",
                    ));
                }
                if !membership.insert(m.as_str()) {
                    return Err(ScenarioError::validation(
                        format!("actors[{}].members.{}", a.id, m),
                        "player belongs to at most one corporation",
                    ));
                }
            }
        }

        check_unique("facility", self.facilities.iter().map(|f| f.id.as_str()))?;
        for f in &self.facilities {
            let src = format!("facility {}", f.id);
            if !actors.contains(f.owner.as_str()) || f.owner == GOVERNMENT_NAME {
                return Err(ScenarioError::dangling(src, &f.owner));
            }
            if !sites.contains(f.site.as_str()) {
                return Err(ScenarioError::dangling(src, &f.site));
            }
            if !blueprints.contains(f.blueprint.as_str()) {
                return Err(ScenarioError::dangling(src, &f.blueprint));
            }
            if f.estimated_units == Some(0) {
                return Err(ScenarioError::validation(
                    format!("facilities[{}].estimated_units", f.id),
                    "> 0",
                ));
            }
        }

        let mut events: Vec<&PolicyEventSpec> = self.policy_events.iter().collect();
        events.sort_by_key(|e| e.week);
        for e in events {
            if e.week == 0 {
                return Err(ScenarioError::validation("policy_events.week", "≥ 1"));
            }
            let regime = regimes
                .get_mut(e.region.as_str())
                .ok_or_else(|| ScenarioError::dangling(format!("policy event at week {}", e.week), &e.region))?;
            let next = e.change.apply_to(regime);
            next.validate().map_err(|err| {
                ScenarioError::validation(format!("policy_events[week {}, {}]", e.week, e.region), err.to_string())
            })?;
            *regime = next;
        }
        Ok(())
    }

    fn validate_constants(&self) -> Result<(), ScenarioError> {
        let c = &self.constants;
        if c.action_budget == 0 {
            return Err(ScenarioError::validation("constants.action_budget", "> 0"));
        }
        if c.view_depth == 0 {
            return Err(ScenarioError::validation("constants.view_depth", "> 0"));
        }
        if c.debt_reduction_fraction.is_zero() || !c.debt_reduction_fraction.le_one() {
            return Err(ScenarioError::validation(
                "constants.debt_reduction_fraction",
                "in (0,1]",
            ));
        }
        if c.patent_min_factor > c.patent_max_factor {
            return Err(ScenarioError::validation(
                "constants.patent_min_factor",
                "≤ patent_max_factor",
            ));
        }
        if c.patent_min_factor <= Ratio::ONE {
            return Err(ScenarioError::validation("constants.patent_min_factor", "> 1"));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).unwrap_or_default())
    }

    /// Digest of everything except the policy schedule. Two runs with equal
    /// base digests differ at most in their policy events.
    pub fn base_digest(&self) -> String {
        let mut s = self.clone();
        s.policy_events.clear();
        s.digest()
    }
}

fn validate_strategy(field: &str, s: &StrategySpec) -> Result<(), ScenarioError> {
    let kind: StrategyKind = s.kind.parse().map_err(|_| {
        ScenarioError::validation(
            format!("{field}.kind"),
            "must be one of greedy_producer, trader, quota_arbitrageur, green_investor, scripted",
        )
    })?;
    if kind != StrategyKind::Scripted && !s.script.is_empty() {
        return Err(ScenarioError::validation(
            format!("{field}.script"),
            "only for scripted strategies",
        ));
    }
    Ok(())
}

fn validate_lots(
    field: &str,
    lots: &[LotSpec],
    sites: &BTreeSet<&str>,
    innovations: &BTreeSet<&str>,
) -> Result<(), ScenarioError> {
    let _ = innovations;
    for l in lots {
        non_negative(format!("{field}.quantity"), l.quantity)?;
        if !l.good.is_lot_good() || l.good.is_instrument() {
            return Err(ScenarioError::validation(
                format!("{field}.good"),
                "only resources, items, energy and licenses",
            ));
        }
        if let Some(s) = &l.site {
            if !l.good.is_physical() {
                return Err(ScenarioError::validation(
                    format!("{field}.site"),
                    "only physical goods have a site",
                ));
            }
            if !sites.contains(s.as_str()) {
                return Err(ScenarioError::dangling(field.to_string(), s));
            }
        }
    }
    Ok(())
}

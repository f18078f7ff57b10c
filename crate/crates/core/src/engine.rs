//! The weekly tick: eight phases in a fixed order, with a ledger drift
//! check after each.

use core::fmt;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec::Vec;
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agents::{self, Action, AgentMemory, Strategy};
use crate::digest;
use crate::ids::{ActorId, DebtId, FacilityId};
use crate::ledger::{self, Account, DebtSettlement, LedgerEntry, SettleRoute};
use crate::market::{self, AuditRecord, Trade};
use crate::metrics::{self, MetricsRow};
use crate::policy;
use crate::production::{self, FacilityState};
use crate::world::{self, ActorKind, ObservationView, WeekState, World};

/// Journal entries carried by an abort.
pub const ABORT_TAIL: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PolicyEvents,
    Decide,
    Actions,
    ForcedShutdown,
    Production,
    Arrivals,
    DebtSettlement,
    WeekEnd,
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::PolicyEvents,
        Phase::Decide,
        Phase::Actions,
        Phase::ForcedShutdown,
        Phase::Production,
        Phase::Arrivals,
        Phase::DebtSettlement,
        Phase::WeekEnd,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PolicyEvents => "policy_events",
            Phase::Decide => "decide",
            Phase::Actions => "actions",
            Phase::ForcedShutdown => "forced_shutdown",
            Phase::Production => "production",
            Phase::Arrivals => "arrivals",
            Phase::DebtSettlement => "debt_settlement",
            Phase::WeekEnd => "week_end",
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// An invariant breach. The run stops; nothing after the breach is trusted.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("invariant breach in week {week}, phase {phase}: {detail}")]
pub struct EngineAbort {
    pub week: u32,
    pub phase: Phase,
    pub actor: Option<ActorId>,
    pub detail: String,
    pub journal_tail: Vec<LedgerEntry>,
}

/// Everything a run produced.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunReport {
    pub seed: u64,
    pub weeks: u32,
    pub scenario_digest: String,
    pub scenario_base_digest: String,
    pub initial_digest: String,
    pub final_digest: String,
    pub rows: Vec<MetricsRow>,
    pub trades: Vec<Trade>,
    pub audit: Vec<AuditRecord>,
    /// Rejection counts by reason code.
    pub audit_summary: BTreeMap<String, u64>,
    pub journal: Vec<LedgerEntry>,
    /// Final per-account stock, for offline audits.
    #[serde(with = "crate::serde_seq")]
    pub final_stock: BTreeMap<Account, u128>,
    pub final_drift: i128,
}

/// Output of one week.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeekOutcome {
    pub row: MetricsRow,
    pub trades: Vec<Trade>,
    pub audit: Vec<AuditRecord>,
}

/// Per-actor, per-week random stream, keyed by seed, actor and week.
pub fn agent_rng(seed: u64, actor: ActorId, week: u32) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"energetics-agent-rng");
    h.update(seed.to_le_bytes());
    h.update(actor.0.to_le_bytes());
    h.update(week.to_le_bytes());
    let mut key = [0u8; 32];
    key.copy_from_slice(&h.finalize());
    ChaCha8Rng::from_seed(key)
}

/// One actor's decision input. Jobs are independent of each other.
pub struct DecideJob<'a> {
    pub actor: ActorId,
    pub strategy: &'a Strategy,
    pub memory: AgentMemory,
    pub view: ObservationView,
    pub rng: ChaCha8Rng,
}

impl DecideJob<'_> {
    pub fn run(mut self) -> (ActorId, Vec<Action>, AgentMemory) {
        let acts = agents::decide(self.strategy, &self.view, &mut self.memory, &mut self.rng);
        (self.actor, acts, self.memory)
    }
}

/// Runs decide jobs. Implementations must return results in job order.
pub trait Decider {
    fn decide_all(&self, jobs: Vec<DecideJob<'_>>) -> Vec<(ActorId, Vec<Action>, AgentMemory)>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct SerialDecider;

impl Decider for SerialDecider {
    fn decide_all(&self, jobs: Vec<DecideJob<'_>>) -> Vec<(ActorId, Vec<Action>, AgentMemory)> {
        jobs.into_iter().map(DecideJob::run).collect()
    }
}

fn check(world: &World, phase: Phase, actor: Option<ActorId>) -> Result<(), EngineAbort> {
    let drift = ledger::ledger_balance(world);
    if drift == 0 {
        return Ok(());
    }
    let mismatches = ledger::account_mismatches(world);
    let mut detail = alloc::format!("ledger drift {drift}");
    for (acc, journal, stock) in mismatches.iter().take(4) {
        detail.push_str(&alloc::format!("; {acc}: journal {journal} vs stock {stock}"));
    }
    Err(abort(world, phase, actor, detail))
}

/// Every actor's realized pollution must fit its quota.
fn check_quota(world: &World, phase: Phase) -> Result<(), EngineAbort> {
    for a in &world.actors {
        let headroom = policy::pollution_headroom(world, a.id);
        if a.kind != ActorKind::Government && headroom < 0 {
            let detail = alloc::format!("pollution {} over quota by {}", a.week_pollution, -headroom);
            return Err(abort(world, phase, Some(a.id), detail));
        }
    }
    Ok(())
}

fn abort(world: &World, phase: Phase, actor: Option<ActorId>, detail: String) -> EngineAbort {
    EngineAbort {
        week: world.week,
        phase,
        actor,
        detail,
        journal_tail: world.ledger.tail(ABORT_TAIL).to_vec(),
    }
}

fn audit(world: &mut World, actor: ActorId, action: &str, reason: crate::Rejection) {
    let week = world.week;
    world.current.audit.push(AuditRecord {
        week,
        actor,
        index: u32::MAX,
        action: String::from(action),
        reason,
    });
}

fn phase_policy(world: &mut World) -> Result<(), EngineAbort> {
    production::activate_facilities(world);
    world.grid_bootstrap_remaining = world.constants.grid_bootstrap_kwh_per_week;
    let week = world.week;
    let due: Vec<_> = world
        .policy_schedule
        .iter()
        .filter(|e| e.week == week)
        .cloned()
        .collect();
    for e in &due {
        policy::apply_policy_event(world, e).map_err(|err| {
            abort(
                world,
                Phase::PolicyEvents,
                None,
                alloc::format!("policy event rejected: {err}"),
            )
        })?;
    }
    Ok(())
}

fn phase_decide(world: &mut World, decider: &dyn Decider) -> Vec<(ActorId, Vec<Action>)> {
    let public = Arc::new(world::public_view(world));
    let mut jobs = Vec::new();
    for a in &world.actors {
        if a.kind == ActorKind::Government {
            continue;
        }
        let Ok(view) = world::actor_view_with(world, a.id, public.clone()) else {
            continue;
        };
        let slot = &world.agents[a.id.index()];
        jobs.push(DecideJob {
            actor: a.id,
            strategy: &slot.strategy,
            memory: slot.memory.clone(),
            view,
            rng: agent_rng(world.seed, a.id, world.week),
        });
    }
    let results = decider.decide_all(jobs);
    let mut out = Vec::with_capacity(results.len());
    for (actor, acts, memory) in results {
        world.agents[actor.index()].memory = memory;
        out.push((actor, acts));
    }
    out.sort_by_key(|(a, _)| *a);
    out
}

fn phase_shutdown(world: &mut World) {
    let mut plans: BTreeMap<ActorId, Vec<(FacilityId, u64)>> = BTreeMap::new();
    for (fid, batches) in &world.current.pending_production {
        let f = &world.facilities[fid.index()];
        if f.state == FacilityState::Active {
            plans
                .entry(f.owner)
                .or_default()
                .push((*fid, production::projected_pollution(world, *fid, *batches)));
        }
    }
    for (actor, plan) in plans {
        for fid in policy::resolve_forced_shutdown(world, actor, &plan) {
            world.facilities[fid.index()].state = FacilityState::Shutdown;
            world.current.pending_production.remove(&fid);
            world.current.shutdowns += 1;
        }
    }
}

fn phase_production(world: &mut World) {
    let production = core::mem::take(&mut world.current.pending_production);
    for (fid, batches) in production {
        if let Err(e) = production::produce(world, fid, batches) {
            let owner = world.facilities[fid.index()].owner;
            audit(world, owner, "produce", e);
        }
    }
    let research = core::mem::take(&mut world.current.pending_research);
    for (lab, (effort, target)) in research {
        if let Err(e) = production::research_tick(world, lab, effort, target) {
            let owner = world.facilities[lab.index()].owner;
            audit(world, owner, "research_tick", e);
        }
    }
}

fn phase_debts(world: &mut World) {
    let week = world.week;
    let grace = world.constants.debt_grace_weeks;
    let overdue: Vec<DebtId> = world
        .debts
        .iter()
        .filter(|d| d.remaining > 0 && d.settlement == DebtSettlement::Open)
        .filter(|d| week.saturating_sub(d.created_week) >= grace)
        .map(|d| d.id)
        .collect();
    for id in overdue {
        let debtor = world.debts[id.index()].debtor;
        let route = if world.actors[debtor.index()].kind == ActorKind::Player {
            SettleRoute::AllowanceReduction
        } else {
            SettleRoute::Buyback
        };
        let mut res = ledger::settle_debt(world, debtor, id, route).map(drop);
        if res.is_err() && route != SettleRoute::Buyback {
            res = ledger::settle_debt(world, debtor, id, SettleRoute::Buyback).map(drop);
        }
        if let Err(e) = res {
            audit(world, debtor, "settle_debt", e);
        }
    }
}

fn phase_week_end(world: &mut World) -> Result<WeekOutcome, EngineAbort> {
    ledger::realize_allowance_reductions(world);
    market::cancel_all_orders(world);
    world.current.direct_intents.clear();
    policy::burn_expired_instruments(world);
    if let Err(e) = policy::mint_allowance_instruments(world) {
        return Err(abort(
            world,
            Phase::WeekEnd,
            None,
            alloc::format!("minting failed: {e}"),
        ));
    }
    let row = metrics::week_row(world);
    let state = core::mem::take(&mut world.current);
    for a in world.actors.iter_mut() {
        a.week_energy_acquired = 0;
        a.week_pollution = 0;
    }
    world.current = WeekState::default();
    world.week += 1;
    Ok(WeekOutcome {
        row,
        trades: state.tape,
        audit: state.audit,
    })
}

/// Runs one week with the given decider.
pub fn step_week_with(world: &mut World, decider: &dyn Decider) -> Result<WeekOutcome, EngineAbort> {
    phase_policy(world)?;
    check(world, Phase::PolicyEvents, None)?;

    let decisions = phase_decide(world, decider);
    check(world, Phase::Decide, None)?;

    for (actor, acts) in &decisions {
        agents::apply_actions(world, *actor, acts);
    }
    check(world, Phase::Actions, None)?;

    phase_shutdown(world);
    check(world, Phase::ForcedShutdown, None)?;

    phase_production(world);
    check(world, Phase::Production, None)?;

    production::deliver_arrivals(world);
    check(world, Phase::Arrivals, None)?;

    phase_debts(world);
    check(world, Phase::DebtSettlement, None)?;
    check_quota(world, Phase::DebtSettlement)?;

    let out = phase_week_end(world)?;
    check(world, Phase::WeekEnd, None).map_err(|mut e| {
        e.week = out.row.week;
        e
    })?;
    Ok(out)
}

/// Runs one week with serial decisions and returns its metrics row.
pub fn step_week(world: &mut World) -> Result<MetricsRow, EngineAbort> {
    step_week_with(world, &SerialDecider).map(|o| o.row)
}

/// Runs `weeks` weeks with serial decisions.
pub fn run(world: &mut World, weeks: u32) -> Result<RunReport, EngineAbort> {
    run_with(world, weeks, &SerialDecider)
}

pub fn run_with(world: &mut World, weeks: u32, decider: &dyn Decider) -> Result<RunReport, EngineAbort> {
    let initial_digest = digest::world_digest(world);
    let mut rows = Vec::with_capacity(weeks as usize);
    let mut trades = Vec::new();
    let mut audit = Vec::new();
    for _ in 0..weeks {
        let out = step_week_with(world, decider)?;
        rows.push(out.row);
        trades.extend(out.trades);
        audit.extend(out.audit);
    }
    let mut audit_summary: BTreeMap<String, u64> = BTreeMap::new();
    for r in &audit {
        *audit_summary.entry(alloc::format!("{}", r.reason)).or_default() += 1;
    }
    Ok(RunReport {
        seed: world.seed,
        weeks,
        scenario_digest: world.provenance.scenario_digest.clone(),
        scenario_base_digest: world.provenance.scenario_base_digest.clone(),
        initial_digest,
        final_digest: digest::world_digest(world),
        rows,
        trades,
        audit,
        audit_summary,
        journal: world.ledger.entries.clone(),
        final_stock: ledger::account_stock(world),
        final_drift: ledger::ledger_balance(world),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Side;
    use crate::metrics::Fixed4;
    use crate::scenario::{ActorSpec, Scenario, StrategySpec};
    use crate::world::new_world;

    fn zero_row(week: u32) -> MetricsRow {
        MetricsRow {
            week,
            total_emissions_pu: 0,
            energy_traded_kwh: 0,
            mean_energy_price_cents: Fixed4(0),
            energy_purchased_kwh: 0,
            taxed_energy_kwh: 0,
            tax_revenue_cents: 0,
            quota_right_volume_pu: 0,
            quota_right_mean_price_cents: Fixed4(0),
            allowance_token_volume_kwh: 0,
            gini_money: Fixed4(0),
            outstanding_debt_kwh: 0,
            shutdown_count: 0,
            regime_change: String::new(),
        }
    }

    fn buyer_world() -> World {
        let mut s = Scenario::minimal();
        s.actors.push(ActorSpec {
            id: "P1".into(),
            kind: "player".into(),
            site: "S1".into(),
            money: 10_000_000,
            strategy: StrategySpec::scripted_empty(),
            inventory: Vec::new(),
            members: BTreeMap::new(),
        });
        let mut w = new_world(&s).unwrap();
        let script = [(
            0,
            alloc::vec![Action::GridTrade {
                side: Side::Bid,
                quantity: 150_000,
            }],
        )]
        .into_iter()
        .collect();
        w.agents[1].strategy = Strategy::scripted(script);
        w
    }

    #[test]
    fn empty_world_advances_with_zero_row() {
        let mut w = new_world(&Scenario::minimal()).unwrap();
        assert_eq!(step_week(&mut w).unwrap(), zero_row(0));
        assert_eq!(w.week, 1);
    }

    #[test]
    fn scripted_grid_purchase_row() {
        let mut w = buyer_world();
        let row = step_week(&mut w).unwrap();
        // 150,000 kWh at 10 c; 50,000 kWh above the allowance taxed at 20%.
        let expected = MetricsRow {
            energy_traded_kwh: 150_000,
            mean_energy_price_cents: Fixed4::from_int(10),
            energy_purchased_kwh: 150_000,
            taxed_energy_kwh: 50_000,
            tax_revenue_cents: 100_000,
            ..zero_row(0)
        };
        assert_eq!(row, expected);
        assert_eq!(w.actors[1].money, 10_000_000 - 1_500_000 - 100_000);
        assert_eq!(ledger::ledger_balance(&w), 0);
    }

    #[test]
    fn identical_snapshots_step_identically() {
        let a = buyer_world();
        let (mut x, mut y) = (a.clone(), a);
        assert_eq!(step_week(&mut x).unwrap(), step_week(&mut y).unwrap());
        assert_eq!(digest::world_digest(&x), digest::world_digest(&y));
    }

    #[test]
    fn zero_weeks_reports_initial_digest() {
        let mut w = buyer_world();
        let before = digest::world_digest(&w);
        let r = run(&mut w, 0).unwrap();
        assert!(r.rows.is_empty());
        assert_eq!(r.initial_digest, before);
        assert_eq!(r.final_digest, before);
    }

    #[test]
    fn agent_streams_are_independent() {
        use rand_core::RngCore;
        let mut a = agent_rng(7, ActorId(1), 0);
        let mut b = agent_rng(7, ActorId(2), 0);
        let mut c = agent_rng(7, ActorId(1), 1);
        let (x, y, z) = (a.next_u64(), b.next_u64(), c.next_u64());
        assert!(x != y && x != z && y != z);
        assert_eq!(agent_rng(7, ActorId(1), 0).next_u64(), x);
    }
}

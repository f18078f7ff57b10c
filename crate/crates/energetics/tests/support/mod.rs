//! Shared helpers: scenario paths, the fuzz world and a random action
//! generator that mixes valid and invalid requests.

#![allow(dead_code)]

use std::path::PathBuf;

use energetics_core::agents::{self, Action};
use energetics_core::goods::{GoodKind, ItemLot, LotKey};
use energetics_core::ids::{ActorId, BlueprintId, DebtId, FacilityId, InnovationId, RegionId, SiteId};
use energetics_core::ledger::{self, SettleRoute};
use energetics_core::market::{Side, Venue};
use energetics_core::ratio::Ratio;
use energetics_core::world::{new_world, ActorKind, World};
use energetics_core::{engine, Scenario};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

pub fn repo_path(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

pub fn data_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn scenario(rel: &str) -> Scenario {
    energetics::load_scenario(&repo_path(rel)).unwrap()
}

pub fn fuzz_world() -> World {
    let s = energetics::load_scenario(&data_path("fuzz.toml")).unwrap();
    new_world(&s).unwrap()
}

pub struct Gen {
    rng: ChaCha8Rng,
}

const QUANTITIES: [u64; 11] = [0, 1, 2, 3, 5, 10, 40, 1_000, 1_000_000, u64::MAX / 2, u64::MAX];
const PRICES: [u64; 10] = [0, 1, 2, 9, 10, 15, 100, 5_000, u64::MAX / 3, u64::MAX];

impl Gen {
    pub fn new(seed: u64) -> Gen {
        Gen {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn below(&mut self, n: u64) -> u64 {
        self.rng.next_u64() % n
    }

    pub fn chance(&mut self, num: u64, den: u64) -> bool {
        self.below(den) < num
    }

    fn pick<T: Clone>(&mut self, xs: &[T]) -> T {
        xs[self.below(xs.len() as u64) as usize].clone()
    }

    fn quantity(&mut self) -> u64 {
        if self.chance(3, 4) {
            self.pick(&QUANTITIES[..8])
        } else {
            self.pick(&QUANTITIES)
        }
    }

    fn price(&mut self) -> u64 {
        if self.chance(4, 5) {
            self.pick(&PRICES[..8])
        } else {
            self.pick(&PRICES)
        }
    }

    /// Ids run one or two past the end so unknown ids get exercised.
    fn index(&mut self, len: usize) -> u32 {
        self.below(len as u64 + 2) as u32
    }

    pub fn actor(&mut self, w: &World) -> ActorId {
        loop {
            let a = &w.actors[self.below(w.actors.len() as u64) as usize];
            if a.kind != ActorKind::Government {
                return a.id;
            }
        }
    }

    fn site(&mut self, w: &World) -> SiteId {
        SiteId(self.index(w.sites.len()))
    }

    fn facility(&mut self, w: &World, actor: ActorId) -> FacilityId {
        let own: Vec<FacilityId> = w.facilities.iter().filter(|f| f.owner == actor).map(|f| f.id).collect();
        if !own.is_empty() && self.chance(3, 4) {
            self.pick(&own)
        } else {
            FacilityId(self.index(w.facilities.len()))
        }
    }

    fn venue(&mut self, w: &World) -> Venue {
        if self.chance(1, 3) {
            Venue::Global
        } else {
            Venue::Regional(RegionId(self.index(w.regions.len())))
        }
    }

    fn good(&mut self, w: &World) -> GoodKind {
        match self.below(10) {
            0 | 1 => GoodKind::Energy,
            2 => GoodKind::Resource("ore".into()),
            3 => GoodKind::Item("steel".into()),
            4 => GoodKind::Item("kit".into()),
            5 => GoodKind::Item("nothing".into()),
            6 => GoodKind::License(InnovationId(self.index(w.innovations.len()))),
            7 => GoodKind::PollutionRight {
                valid_week: w.week + self.below(2) as u32,
            },
            8 => GoodKind::AllowanceToken {
                valid_week: w.week + self.below(2) as u32,
            },
            _ => GoodKind::DebtAssumption,
        }
    }

    /// Mostly a slice of something the actor holds, otherwise made up.
    fn lot(&mut self, w: &World, actor: ActorId) -> ItemLot {
        let held: Vec<(LotKey, u64)> = w.actors[actor.index()]
            .inventory
            .iter()
            .map(|(k, q)| (k.clone(), q))
            .collect();
        if !held.is_empty() && self.chance(3, 4) {
            let (key, q) = self.pick(&held);
            let quantity = if self.chance(4, 5) {
                1 + self.below(q)
            } else {
                self.quantity()
            };
            ItemLot::new(key, quantity)
        } else {
            let good = self.good(w);
            let site = if good.is_physical() { Some(self.site(w)) } else { None };
            ItemLot::new(LotKey::new(good, site, self.below(50)), self.quantity())
        }
    }

    fn side(&mut self) -> Side {
        if self.chance(1, 2) {
            Side::Bid
        } else {
            Side::Ask
        }
    }

    pub fn action(&mut self, w: &World, actor: ActorId) -> Action {
        match self.below(14) {
            0 | 1 => {
                let side = self.side();
                let (good, site, embodied_per_unit) = if side == Side::Ask && self.chance(2, 3) {
                    let lot = self.lot(w, actor);
                    (lot.key.good, lot.key.site, Some(lot.key.embodied_per_unit))
                } else {
                    let g = self.good(w);
                    let site = if g.is_physical() { Some(self.site(w)) } else { None };
                    (g, site, None)
                };
                let debt = if good == GoodKind::DebtAssumption && self.chance(1, 2) {
                    Some(DebtId(self.index(w.debts.len())))
                } else {
                    None
                };
                Action::SubmitOrder {
                    side,
                    venue: self.venue(w),
                    good,
                    quantity: self.quantity(),
                    limit_price: self.price(),
                    site,
                    embodied_per_unit,
                    debt,
                }
            }
            2 => {
                let role = self.side();
                let lot = if role == Side::Ask {
                    self.lot(w, actor)
                } else {
                    let other = self.actor(w);
                    self.lot(w, other)
                };
                Action::DirectTrade {
                    counterparty: ActorId(self.index(w.actors.len())),
                    role,
                    lot,
                    price: self.price(),
                }
            }
            3 => Action::GridTrade {
                side: self.side(),
                quantity: self.quantity(),
            },
            4 => Action::BeginConstruction {
                blueprint: BlueprintId(self.index(w.blueprints.len())),
                site: self.chance(1, 2).then(|| self.site(w)),
                estimated_units: self.chance(1, 3).then(|| self.quantity()),
            },
            5 | 6 => Action::Produce {
                facility: self.facility(w, actor),
                batches: self.quantity(),
            },
            7 => {
                let n = self.below(3);
                Action::TransportDispatch {
                    transporter: self.facility(w, actor),
                    cargo: (0..n).map(|_| self.lot(w, actor)).collect(),
                    to: self.site(w),
                }
            }
            8 => Action::ResearchTick {
                lab: self.facility(w, actor),
                effort: self.quantity(),
                target: self.chance(2, 3).then(|| InnovationId(self.index(w.innovations.len()))),
            },
            9 => {
                if self.chance(1, 2) {
                    Action::FilePatent {
                        lab: self.facility(w, actor),
                    }
                } else {
                    Action::ApplyLicense {
                        facility: self.facility(w, actor),
                        innovation: InnovationId(self.index(w.innovations.len())),
                    }
                }
            }
            10 => Action::RetireFacility {
                facility: self.facility(w, actor),
            },
            11 => {
                let own: Vec<DebtId> = w.debts.iter().filter(|d| d.debtor == actor).map(|d| d.id).collect();
                let debt = if !own.is_empty() && self.chance(3, 4) {
                    self.pick(&own)
                } else {
                    DebtId(self.index(w.debts.len()))
                };
                let route = match self.below(3) {
                    0 => SettleRoute::Buyback,
                    1 => SettleRoute::Sell { price: self.price() },
                    _ => SettleRoute::AllowanceReduction,
                };
                Action::SettleDebt { debt, route }
            }
            12 => Action::TransferQuotaToCorp {
                corporation: ActorId(self.index(w.actors.len())),
                fraction: Ratio::new(self.below(4), 1 + self.below(3)).unwrap(),
            },
            _ => {
                let (quantity, limit_price, venue) =
                    (self.quantity(), self.price(), self.chance(1, 2).then(|| self.venue(w)));
                if self.chance(1, 2) {
                    Action::BuyRights {
                        quantity,
                        limit_price,
                        venue,
                    }
                } else {
                    Action::BuyTokens {
                        quantity,
                        limit_price,
                        venue,
                    }
                }
            }
        }
    }
}

/// Counters from one fuzz sequence.
#[derive(Clone, Copy, Debug, Default)]
pub struct SequenceStats {
    pub actions: u64,
    pub accepted: u64,
    pub weeks: u64,
}

impl std::ops::AddAssign for SequenceStats {
    fn add_assign(&mut self, o: SequenceStats) {
        self.actions += o.actions;
        self.accepted += o.accepted;
        self.weeks += o.weeks;
    }
}

fn check_state(w: &World, money: u128, at: &str) -> Result<(), String> {
    let drift = ledger::ledger_balance(w);
    if drift != 0 {
        return Err(format!("{at}: ledger drift {drift}"));
    }
    if w.total_money() != money {
        return Err(format!("{at}: money {} != {money}", w.total_money()));
    }
    for a in &w.actors {
        if let Some((k, _)) = a.inventory.iter().find(|(_, q)| *q == 0) {
            return Err(format!("{at}: empty lot {k:?} held by {}", a.id));
        }
    }
    Ok(())
}

/// Applies a random action sequence through the validating entry point,
/// checking the state after every action, then closes the week with the
/// engine (forced shutdown, production, debts, quota check, minting).
pub fn run_sequence(base: &World, seed: u64) -> Result<SequenceStats, String> {
    let mut g = Gen::new(seed);
    let mut w = base.clone();
    let money = w.total_money();
    let mut stats = SequenceStats::default();
    let n = 1 + g.below(16);
    for i in 0..n {
        let actor = g.actor(&w);
        let action = g.action(&w, actor);
        stats.actions += 1;
        if agents::apply_action(&mut w, actor, &action).is_ok() {
            stats.accepted += 1;
        }
        check_state(&w, money, &format!("seed {seed} action {i} {action:?}"))?;
    }
    engine::step_week(&mut w).map_err(|e| format!("seed {seed}: {e}"))?;
    stats.weeks += 1;
    check_state(&w, money, &format!("seed {seed} week end"))?;
    Ok(stats)
}

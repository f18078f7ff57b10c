//! Offline re-check of an energy journal.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, BufRead};
use std::path::Path;

use energetics_core::ledger::{self, Account, LedgerEntry};

use crate::report::StockLine;

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AuditOutcome {
    pub entries: usize,
    /// Line numbers of entries that are not valid double entries.
    pub malformed: Vec<usize>,
    /// First line at which a holding account went negative.
    pub negative: Vec<(Account, usize)>,
    pub drift: i128,
    /// Accounts whose replayed balance differs from the stock file.
    pub stock_mismatches: Vec<(Account, i128, u128)>,
}

impl AuditOutcome {
    pub fn is_clean(&self) -> bool {
        self.malformed.is_empty() && self.negative.is_empty() && self.drift == 0 && self.stock_mismatches.is_empty()
    }
}

fn invalid(line: usize, msg: impl std::fmt::Display) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, format!("line {line}: {msg}"))
}

pub fn read_journal(path: &Path) -> io::Result<Vec<LedgerEntry>> {
    let f = io::BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| invalid(i + 1, e))?);
    }
    Ok(out)
}

pub fn read_stock(path: &Path) -> io::Result<BTreeMap<Account, u128>> {
    let f = io::BufReader::new(fs::File::open(path)?);
    let mut out = BTreeMap::new();
    for (i, line) in f.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let s: StockLine = serde_json::from_str(&line).map_err(|e| invalid(i + 1, e))?;
        let acc: Account = s
            .account
            .parse()
            .map_err(|e: ledger::ParseAccountError| invalid(i + 1, e.0))?;
        out.insert(acc, s.stock);
    }
    Ok(out)
}

/// Replays `entries`: well-formedness, running non-negativity of holding
/// accounts, drift, and agreement with `stock` if given.
pub fn audit_entries(entries: &[LedgerEntry], stock: Option<&BTreeMap<Account, u128>>) -> AuditOutcome {
    let mut out = AuditOutcome {
        entries: entries.len(),
        ..Default::default()
    };
    let mut bal: BTreeMap<Account, i128> = BTreeMap::new();
    for (i, e) in entries.iter().enumerate() {
        if !e.is_well_formed() {
            out.malformed.push(i + 1);
        }
        *bal.entry(e.from).or_default() -= e.amount as i128;
        *bal.entry(e.to).or_default() += e.amount as i128;
        if !e.from.is_boundary() && bal[&e.from] < 0 && !out.negative.iter().any(|(a, _)| *a == e.from) {
            out.negative.push((e.from, i + 1));
        }
    }
    out.drift = ledger::replay_drift(entries.iter());
    if let Some(stock) = stock {
        let mut accounts: Vec<Account> = bal
            .keys()
            .chain(stock.keys())
            .copied()
            .filter(|a| !a.is_boundary())
            .collect();
        accounts.sort();
        accounts.dedup();
        for a in accounts {
            let j = bal.get(&a).copied().unwrap_or(0);
            let s = stock.get(&a).copied().unwrap_or(0);
            if j != s as i128 {
                out.stock_mismatches.push((a, j, s));
            }
        }
    }
    out
}

pub fn audit_journal(journal: &Path, stock: Option<&Path>) -> io::Result<AuditOutcome> {
    let entries = read_journal(journal)?;
    let stock = stock.map(read_stock).transpose()?;
    Ok(audit_entries(&entries, stock.as_ref()))
}

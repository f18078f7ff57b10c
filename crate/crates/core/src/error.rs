use alloc::string::String;
use serde::{Deserialize, Serialize};

/// Why an operation or agent action was refused. Rejections are data: the
/// engine logs them to the exploit-audit stream and carries on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, thiserror::Error)]
#[serde(rename_all = "snake_case")]
pub enum Rejection {
    #[error("unknown-actor")]
    UnknownActor,
    #[error("unknown-region")]
    UnknownRegion,
    #[error("unknown-site")]
    UnknownSite,
    #[error("unknown-facility")]
    UnknownFacility,
    #[error("unknown-blueprint")]
    UnknownBlueprint,
    #[error("unknown-innovation")]
    UnknownInnovation,
    #[error("unknown-debt")]
    UnknownDebt,
    #[error("not-owner")]
    NotOwner,
    #[error("government-not-permitted")]
    GovernmentNotPermitted,
    #[error("insolvent")]
    Insolvent,
    #[error("tax-insolvent")]
    TaxInsolvent,
    #[error("missing-goods")]
    MissingGoods,
    #[error("missing-license")]
    MissingLicense,
    #[error("quota-exceeded")]
    QuotaExceeded,
    #[error("invalid-quantity")]
    InvalidQuantity,
    #[error("invalid-order")]
    InvalidOrder,
    #[error("facility-not-active")]
    FacilityNotActive,
    #[error("facility-retired")]
    AlreadyRetired,
    #[error("wrong-facility-class")]
    WrongFacilityClass,
    #[error("not-member")]
    NotMember,
    #[error("fraction-out-of-range")]
    FractionOutOfRange,
    #[error("no-research-target")]
    NoResearchTarget,
    #[error("research-incomplete")]
    ResearchIncomplete,
    #[error("over-effort-capacity")]
    OverEffortCapacity,
    #[error("patent-no-impact")]
    PatentNoImpact,
    #[error("patent-destabilizing")]
    PatentDestabilizing,
    #[error("already-patented")]
    AlreadyPatented,
    #[error("license-already-applied")]
    LicenseAlreadyApplied,
    #[error("over-capacity")]
    OverCapacity,
    #[error("in-transit")]
    InTransit,
    #[error("not-transportable")]
    NotTransportable,
    #[error("debt-settled")]
    DebtSettled,
    #[error("debt-route-locked")]
    DebtRouteLocked,
    #[error("no-counterparty")]
    NoCounterparty,
    #[error("insufficient-supply")]
    InsufficientSupply,
    #[error("route-ineligible")]
    RouteIneligible,
    #[error("trade-disabled")]
    TradeDisabled,
    #[error("instrument-not-sellable")]
    InstrumentNotSellable,
    #[error("budget-exceeded")]
    BudgetExceeded,
    #[error("no-output")]
    NoOutput,
    #[error("already-minted")]
    AlreadyMinted,
    #[error("arithmetic-overflow")]
    Overflow,
}

/// Scenario parsing and validation failures.
#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("validation error: {field} {rule}")]
    Validation { field: String, rule: String },
    #[error("duplicate {kind} id {id:?}")]
    DuplicateId { kind: &'static str, id: String },
    #[error("dangling reference: {source_ref} refers to missing {target:?}")]
    DanglingReference { source_ref: String, target: String },
}

impl ScenarioError {
    pub fn validation(field: impl Into<String>, rule: impl Into<String>) -> Self {
        ScenarioError::Validation {
            field: field.into(),
            rule: rule.into(),
        }
    }

    pub fn dangling(source_ref: impl Into<String>, target: impl Into<String>) -> Self {
        ScenarioError::DanglingReference {
            source_ref: source_ref.into(),
            target: target.into(),
        }
    }
}

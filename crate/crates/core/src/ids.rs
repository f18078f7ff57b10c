//! Dense numeric identifiers. Each id is the index of its entity in the
//! owning `World` collection, so ascending id order is scenario order
//! followed by creation order.

use core::fmt;

use serde::{Deserialize, Serialize};

macro_rules! dense_id {
    ($(#[$m:meta])* $name:ident, $prefix:literal) => {
        $(#[$m])*
        #[derive(
            Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
        )]
        #[serde(transparent)]
        pub struct $name(pub u32);

        impl $name {
            pub fn index(self) -> usize {
                self.0 as usize
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write!(f, concat!($prefix, "{}"), self.0)
            }
        }
    };
}

dense_id!(RegionId, "region#");
dense_id!(SiteId, "site#");
dense_id!(
    /// Actor 0 is always the government.
    ActorId,
    "actor#"
);
dense_id!(FacilityId, "facility#");
dense_id!(BlueprintId, "blueprint#");
dense_id!(InnovationId, "innovation#");
dense_id!(DebtId, "debt#");
dense_id!(ShipmentId, "shipment#");

pub const GOVERNMENT: ActorId = ActorId(0);

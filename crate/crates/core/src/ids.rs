use std::fmt;

use serde::{Deserialize, Serialize};

macro_rules! id_type {
    ($(#[$meta:meta])* $name:ident($inner:ty)) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(transparent)]
        pub struct $name(pub $inner);

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                self.0.fmt(f)
            }
        }

        impl std::str::FromStr for $name {
            type Err = std::num::ParseIntError;
            fn from_str(s: &str) -> Result<Self, Self::Err> {
                s.parse().map($name)
            }
        }
    };
}

id_type!(
    /// Ground-truth person identity. Never visible to the fusion engine.
    PersonId(u32)
);
id_type!(
    /// RFID tag identifier (EPC stand-in).
    TagId(u32)
);
id_type!(AntennaId(u32));
id_type!(
    /// Opaque body handle issued by the depth tracker; stable only while the body stays in view.
    SkeletonId(u64)
);

//! Machines and the office map shipped with the crate.

use crate::dsl::{load_prm, SourceDocument};
use crate::prm::PrmDefinition;

pub const A_R1_SRC: &str = include_str!("../fixtures/a_r1.prm");
pub const A_R2_SRC: &str = include_str!("../fixtures/a_r2.prm");
pub const A_R3_SRC: &str = include_str!("../fixtures/a_r3.prm");
pub const OFFICE_MAP: &str = include_str!("../fixtures/office.map");

fn load(src: &str, origin: &str) -> PrmDefinition {
    load_prm(&SourceDocument::new(src, origin)).unwrap_or_else(|e| panic!("fixture {origin}: {e}"))
}

/// Recurrent visits to `b` avoiding `a`, stays in `b` bounded.
pub fn a_r1() -> PrmDefinition {
    load(A_R1_SRC, "a_r1.prm")
}

/// Coffee and mail delivery with a cooling coffee temperature.
pub fn a_r2() -> PrmDefinition {
    load(A_R2_SRC, "a_r2.prm")
}

/// Four-variable timing task over `a`, `b`, `c`, `d`.
pub fn a_r3() -> PrmDefinition {
    load(A_R3_SRC, "a_r3.prm")
}

/// Looks up a shipped machine by name (`a_r1`, `a_r2`, `a_r3`).
pub fn by_name(name: &str) -> Option<PrmDefinition> {
    match name {
        "a_r1" => Some(a_r1()),
        "a_r2" => Some(a_r2()),
        "a_r3" => Some(a_r3()),
        _ => None,
    }
}

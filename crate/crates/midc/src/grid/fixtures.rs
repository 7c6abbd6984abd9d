//! Bundled system files, embedded so tests and the CLI can resolve them by
//! name without touching the filesystem.

const THREE_BUS_MINIMAL: &str = include_str!("../../fixtures/three_bus_minimal.cfg");
const NEW_ENGLAND_MIDC: &str = include_str!("../../fixtures/new_england_midc.cfg");
const G6_TRIP: &str = include_str!("../../fixtures/g6_trip.cfg");

/// Returns the text of a bundled fixture, or `None` for unknown names.
pub fn bundled_fixture(name: &str) -> Option<&'static str> {
    match name {
        "three_bus_minimal" => Some(THREE_BUS_MINIMAL),
        "new_england_midc" => Some(NEW_ENGLAND_MIDC),
        "g6_trip" => Some(G6_TRIP),
        _ => None,
    }
}

pub fn bundled_fixture_names() -> &'static [&'static str] {
    &["three_bus_minimal", "new_england_midc", "g6_trip"]
}

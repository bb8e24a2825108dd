//! Protocols, traces, and the built-in spin/two-observer processes.

mod builtin;
mod protocol;

pub use builtin::{
    cat_flip_probabilities, cat_protocol, dog_protocol, labeled_amplitudes, names, pet_flip_probabilities,
    pet_protocol, run_cat, run_dog, run_pet, with_second_look, ScenarioBases,
};
pub(crate) use protocol::protocol_evolve;
pub use protocol::{run_protocol, Protocol, Report, Step, StepKind, Trace, TraceRecord};

/// Source of the bundled `cat.qwp`.
pub const CAT_QWP: &str = include_str!("../../scenarios/cat.qwp");
/// Source of the bundled `dog.qwp`.
pub const DOG_QWP: &str = include_str!("../../scenarios/dog.qwp");
/// Source of the bundled `pet.qwp`.
pub const PET_QWP: &str = include_str!("../../scenarios/pet.qwp");

/// Bundled scenario source by name (`cat`, `dog` or `pet`).
pub fn bundled_source(name: &str) -> Option<&'static str> {
    match name {
        "cat" => Some(CAT_QWP),
        "dog" => Some(DOG_QWP),
        "pet" => Some(PET_QWP),
        _ => None,
    }
}

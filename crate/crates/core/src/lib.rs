pub mod complex;
pub mod error;
pub mod extlog;
pub mod function;
pub mod moduli;
pub mod partition;
pub mod profile;
pub mod covering;
pub mod annuli;
pub mod synthesis;
pub mod realize;
pub mod report;

pub use complex::{ComplexPoint, HpComplex};
pub use error::{Error, Result};
pub use extlog::ExtLogReal;
pub use function::{evaluate, derivative, function_by_name, EntireFunction, FnRef, McClass};
pub use annuli::{AnnuliChain, ChainEntry};
pub use covering::{Annulus, CoveringCertificate};
pub use partition::{Itinerary, Partition};
pub use profile::Profile;
pub use realize::RealizationResult;
pub use synthesis::{RateSpec, TransitionSystem};

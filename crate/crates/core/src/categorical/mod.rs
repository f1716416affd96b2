//! Categorical items: construction of the full-data distribution from an
//! observed-data distribution, and the queries built on it.

mod event;
mod full_data;
pub mod loglinear;
mod observed;
mod simulate;
mod space;

#[cfg(test)]
pub(crate) mod testing;

pub use event::{Event, Functional};
pub use full_data::{build_eta, build_full_data, EtaTable, FullDataDistribution};
pub use loglinear::{loglinear_decomposition, LoglinearDecomposition, TermKey};
pub use observed::{ObservedDistribution, MASS_TOLERANCE};
pub use simulate::{empirical_observed, simulate, tabulate, MaskedRecord};
pub use space::{CategoricalSpace, MAX_TABLE_ENTRIES};

pub(crate) use full_data::construct;
pub(crate) use space::Layout;

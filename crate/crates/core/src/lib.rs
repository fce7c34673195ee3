pub mod circuit;
pub mod fock;
pub mod procmat;
pub mod qmath;
pub mod settings;
pub mod switch;
pub mod tomo;
pub mod witness;

pub use qmath::{C64, CMatrix, LabeledOperator, LabeledVector, Space};
pub use settings::{ExperimentSetting, OutcomeKey, ProbabilityTable};

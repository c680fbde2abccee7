//! One module per subcommand.

pub mod compare;
pub mod eval;
pub mod gait_diagram;
pub mod gradcheck;
pub mod sweep;
pub mod train;

pub use compare::{cmd_compare, CompareRow, COMPARE_METRICS};
pub use eval::{cmd_eval, GaitChoice};
pub use gait_diagram::{cmd_gait_diagram, gait_diagram, GaitDiagram, SelectorPattern};
pub use gradcheck::{cmd_gradcheck, GradcheckOptions, GradcheckReport};
pub use sweep::{cmd_sweep, degradation, scaled_config, SweepCell};
pub use train::{cmd_train, train_seeds, TrainedSeed};

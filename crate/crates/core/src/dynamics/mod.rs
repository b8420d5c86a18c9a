//! Riemann-invariant state, its reconstruction and time stepping.

mod state;
mod step;
mod tracer;

pub use state::{derived_fields, init_state, reconstruct_u, theta, DerivedFields, State};
pub use step::{default_threshold, detect_explosion, Cutoff, StepMode, StepReport, Stepper};
pub use tracer::{flow_inverse, flow_map, CharTracer, RiccatiProbe, Sign, TracerSample};

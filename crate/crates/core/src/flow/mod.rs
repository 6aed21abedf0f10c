//! Reference solvers for the flow of curves and convex surfaces with
//! monitoring of the quantities controlled by the noncollapsing estimates.

pub mod config;
pub mod curve_flow;
pub mod oracle;
pub mod residual;
pub mod run;
pub mod support_flow;

pub use config::{FlowConfig, Geometry};
pub use curve_flow::{step_curve, CurveLaw, Integrator};
pub use oracle::{sphere_oracle, RadiusTrajectory};
pub use residual::{residual_evo_f, residual_evo_k, symmetric_history};
pub use run::{run_flow, DiagnosticsRecord, FlowRun, FlowState, StopReason, Verdict, Verdicts, RECORD_COLUMNS};
pub use support_flow::{step_support, SupportStepper, SurfaceLaw};

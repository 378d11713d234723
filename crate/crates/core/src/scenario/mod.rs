//! Physical model of the multi-UAV downlink: configuration, domain types,
//! link and energy evaluation, and feasibility checks.

mod audit;
mod config;
mod model;

pub use audit::{audit_feasibility, Violation, ViolationKind, ENERGY_TOL, KINEMATIC_TOL, MOTION_TOL, POWER_TOL, SCHEDULE_TOL};
pub use config::{db_to_linear, dbm_to_watts, Point, ScenarioConfig, DEFAULT_AREA};
pub use model::{
    average_rate, channel_gain, channel_gains, energies, min_rate, propulsion_energy, rates, sinr, slot_propulsion,
    AuxGains, FlightPlan, LinkMetrics, PerformanceReport, PowerPlan, Schedule, Tensor3, UavTrack,
};

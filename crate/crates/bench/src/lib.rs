//! Fixtures shared by the benchmarks.

use mist_core::dynamics::SimulationConfig;
use mist_core::sweep::SweepConfig;
use mist_core::transmon::TransmonParams;
use mist_core::StripConfig;

pub const DELTA: f64 = 1.1;
pub const N_G: f64 = 0.2;

pub fn strip() -> StripConfig {
    SweepConfig::default().strip_at(DELTA, N_G).expect("default strip")
}

pub fn transmon() -> TransmonParams {
    strip().eigen.params
}

/// Ground-state simulation lasting `duration` ns.
pub fn simulation(duration: f64) -> SimulationConfig {
    let mut sim = SweepConfig::default()
        .simulation_at(DELTA, N_G, 0)
        .expect("default simulation");
    sim.drive.duration = duration;
    sim
}

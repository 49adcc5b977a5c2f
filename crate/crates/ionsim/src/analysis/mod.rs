//! Ground-manifold enumeration, population statistics, preparation errors and readout sampling.

pub mod detection;
pub mod manifold;
pub mod preparation;
pub mod stats;

pub use detection::{apply_detection_and_sample, detection_channel, DetectionModel, SampleResult};
pub use manifold::{classical_energy, classical_ground_manifold, default_eps_deg, GroundManifold};
pub use preparation::{imperfect_global_rotation, preparation_fidelity};
pub use stats::{
    bhattacharyya, manifold_population, population_histogram, single_ion_bhattacharyya, sx_distribution,
    total_variation,
};

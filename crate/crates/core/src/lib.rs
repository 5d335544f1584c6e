//! Traffic fundamental diagrams built from the jamiton traveling waves of
//! second order macroscopic models, where one density can carry a whole
//! range of flow rates.
//!
//! Two model families are supported, Payne-Whitham (PW) and the
//! inhomogeneous Aw-Rascle-Zhang (ARZ) model. All quantities are SI
//! internally: densities in veh/m, speeds in m/s, flow rates in veh/s and
//! specific volumes in m/veh.
//!
//! The pipeline is
//!
//! * [`models`]: desired velocity, pressure and hesitation curves with exact
//!   derivatives in Eulerian (density) and Lagrangian (specific volume) form.
//! * [`stability`]: characteristic speeds, the sub-characteristic condition
//!   and the unstable density bands.
//! * [`jamiton`]: sonic parameters, shock states, profiles and the length and
//!   vehicle-count integrals of jamitons.
//! * [`fdgen`]: maximal, temporally aggregated and effective fundamental
//!   diagrams with their envelopes.
//! * [`simulator`]: a finite-volume ring-road solver used as an empirical
//!   cross-check.
//! * [`sensordata`]: loop-detector CSV ingestion and coverage against a
//!   computed diagram.

pub mod error;
pub mod fdgen;
pub mod jamiton;
pub mod models;
pub mod numeric;
pub mod render;
pub mod sensordata;
pub mod simulator;
pub mod stability;
pub mod units;

pub use error::{Error, Result};
pub use fdgen::{FdMode, FdSegment, FundamentalDiagram};
pub use jamiton::{JamitonFamily, JamitonProfile};
pub use models::{Family, ModelSpec};
pub use simulator::{SimDiagnostics, SimGrid};
pub use stability::{CharSpeeds, StabilityBand};

/// Map over a slice, in parallel when the `parallel` feature is enabled.
/// Output order always follows input order.
pub(crate) fn par_map<T, R, F>(items: &[T], f: F) -> Vec<R>
where
    T: Sync,
    R: Send,
    F: Fn(&T) -> R + Sync + Send,
{
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        items.par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        items.iter().map(f).collect()
    }
}

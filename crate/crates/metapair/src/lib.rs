//! Simulation and analysis toolkit for photon-pair generation in resonant
//! nonlinear metasurfaces.
//!
//! The crate models the full chain from a pumped metasurface to analyzed
//! detector records:
//!
//! * [`optics`]: resonances, polarization-selective enhancement spectra, and
//!   transmission curves of a patterned nonlinear film.
//! * [`spdc`]: energy-conserving pair spectra, absolute pair rates, and
//!   time-stamped pair event generation with Poisson or thermal statistics.
//! * [`detection`]: beamsplitters, bandpass filters, dispersive fiber,
//!   and detectors with efficiency, jitter, dark counts, and dead time.
//! * [`correlations`]: coincidence histograms, normalized second-order
//!   correlation estimates, Cauchy-Schwarz tests, and pump-power fits.
//! * [`spectroscopy`]: reconstruction of pair spectra from arrival-time
//!   differences after propagation through dispersive fiber.
//! * [`graph`]: multi-pump entanglement topology over wavelength bins,
//!   classification, and pump planning for target graphs.
//!
//! Everything downstream of a scenario seed is deterministic; see [`rng`].

pub mod constants;
pub mod correlations;
pub mod detection;
pub mod error;
pub mod graph;
pub mod io;
pub mod optics;
pub mod pipeline;
pub mod rng;
pub mod scenario;
pub mod spdc;
pub mod spectroscopy;

pub use error::{Error, Result};

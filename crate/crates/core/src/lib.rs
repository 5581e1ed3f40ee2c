//! Numerical machinery for Fourier restriction to hyperbolic surfaces
//! z ↦ (z, φ(z)) with φ a small perturbation of `xy`.
//!
//! The modules follow the pipeline: [`phase`] validates the surface,
//! [`hypgeo`] computes the transversality geometry, [`sublevel`] supplies
//! the one-variable decompositions, [`caps`] and [`rects`] build the cap and
//! strip families, [`rescale`] implements the anisotropic rescaling,
//! [`extension`] evaluates the extension operator and broad points, and
//! [`wavepacket`] builds approximate wave packets.

pub mod caps;
pub mod extension;
pub mod geom;
pub mod hypgeo;
pub mod phase;
pub mod quad;
pub mod rects;
pub mod rescale;
pub mod sublevel;
pub mod wavepacket;

pub use caps::{make_caps, restrict, Amplitude, Cap, CapRegion, Density};
pub use extension::{extend, ExtensionField, FreqGrid};
pub use geom::{Point, Polygon, Rect};
pub use hypgeo::{frame, FrameData, PairClass, PairTag};
pub use num_complex::Complex64;
pub use phase::{builtin_family, validate_hyp, PhaseFunction, ValidationReport};
pub use rects::{build_family, CoverSet, Family, Strip, StripKind};
pub use rescale::RescaleData;
pub use sublevel::{Interval, IntervalDecomposition};
pub use wavepacket::Packet;

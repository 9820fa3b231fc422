//! Dense columnar packings of hard spheres on the inner wall of a cylinder.
//!
//! For cylinder-to-sphere diameter ratios between 1 and `1 + 1/sin(pi/5)`
//! every sphere of a dense packing touches the wall, so a packing is a set
//! of sites `(phi, z)` on the cylinder of centers. This crate grows such
//! packings by *sequential deposition* — each sphere drops to the lowest
//! point of the support surface formed by the material below — seeded from
//! a two-parameter template, and provides the machinery around that engine:
//!
//! * [`geometry`]: the contact equation and angular window,
//! * [`deposition`]: templates and the greedy engine itself,
//! * [`density`]: number-density fits, volume fractions, parameter sweeps,
//! * [`analysis`]: contact graphs, screw periodicity, structure labels
//!   (zigzag, helices, doublets, symmetric `(l, m, n)` lattices and their
//!   line slips), and rolled-out phyllotactic coordinates,
//! * [`io`]: column files, result tables, manifests, diagrams.
//!
//! ```
//! use cylpack::{DiameterRatio, TemplateParams, DepositionConfig};
//!
//! let d = DiameterRatio::new(1.5)?;
//! let params = TemplateParams::new(std::f64::consts::PI, None, 1)?;
//! let cfg = DepositionConfig { target_length: 12.0, ..Default::default() };
//! let column = cylpack::run_deposition(d, &params, &cfg)?;
//! let density = cylpack::fit_number_density(&column)?;
//! assert!((density.vf - 0.342133492853).abs() < 1e-9);
//! # Ok::<(), cylpack::Error>(())
//! ```

pub mod analysis;
pub mod density;
pub mod deposition;
pub mod error;
pub mod geometry;
pub mod io;

pub use analysis::{
    analyze_column, boundary_curve, classify_structure, contact_graph, detect_periodicity,
    lattice_decomposition, phyllotactic_points, ContactGraph, HelicalPeriod, LatticeDecomposition,
    LineSlipInfo, Lmn, PhyllotacticPoint, StructureLabel, StructureReport,
};
pub use density::{
    fit_number_density, sweep_diameter, sweep_templates, volume_fraction, DensityEstimate,
    DiameterSweep, SweepGrid, SweepRecord,
};
pub use deposition::{
    build_template, deposit_group, deposit_next, run_deposition, support_height, Column,
    DepositionConfig, TemplateParams,
};
pub use error::{Error, Result};
pub use geometry::{
    angular_window, arc_length, center_distance, contact_offset, wrap_angle, ContactOffset,
    DiameterRatio, SurfaceSite, BULK_BOUND, MAX_RATIO,
};

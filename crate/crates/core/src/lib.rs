//! Numerical toolkit for Whitney decompositions, quasi-hyperbolic distances,
//! `(ε,δ)` classification, `bmo_λ` norm estimation and the extension operator
//! `T_λ` on planar domains.

pub mod bmo;
pub mod cigar;
pub mod domain;
pub mod dyadic;
pub mod error;
pub mod extension;
pub mod geom;
pub mod qhyper;
pub mod whitney;

pub use bmo::{GridFunction, NormReport};
pub use cigar::{classify, ClassificationReport, Verdict};
pub use domain::{make_domain, Domain, DomainSpec};
pub use dyadic::{DyadicCube, Window};
pub use error::{Error, Result};
pub use extension::{extend, lambda_max, ExtensionResult, MatchPolicy};
pub use geom::{Point, Rect};
pub use qhyper::{qh_distance, Geodesic, MetricGraph, Polyline};
pub use whitney::{build_whitney, Tag, WhitneyCube, WhitneyDecomposition};

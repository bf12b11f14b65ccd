use crate::dyadic::DyadicCube;
use crate::geom::Point;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid domain parameters: {0}")]
    InvalidSpec(String),

    #[error("polygon loop {loop_a} edge {edge_a} intersects loop {loop_b} edge {edge_b}")]
    SelfIntersection {
        loop_a: usize,
        edge_a: usize,
        loop_b: usize,
        edge_b: usize,
    },

    #[error("cannot parse domain spec: {0}")]
    Parse(String),

    #[error("cubes belong to different windows")]
    DifferentWindows,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Whitney invariant {invariant} violated by cube {cube}: {detail}")]
    WhitneyInvariant {
        invariant: &'static str,
        cube: DyadicCube,
        detail: String,
    },

    #[error("cube {0} is not part of the decomposition")]
    CubeNotFound(DyadicCube),

    #[error("point {0} lies in no interior Whitney cube")]
    PointNotCovered(Point),

    #[error("no matching cube for {cube} within search radius {search_radius}")]
    NoMatch { cube: DyadicCube, search_radius: f64 },

    #[error("no point of {cube} has distance >= {required} from the boundary (best {best})")]
    InteriorPointNotFound {
        cube: DyadicCube,
        required: f64,
        best: f64,
    },

    #[error("no Whitney cube of side >= {min_side} within distance {max_dist} of {point}")]
    BigCubeNotFound {
        point: Point,
        min_side: f64,
        max_dist: f64,
    },

    #[error("Whitney cubes of {from} and {to} are not connected")]
    ChainDisconnected { from: DyadicCube, to: DyadicCube },

    #[error("integrand 1/d unbounded near {0}: segment touches the boundary")]
    UnboundedIntegrand(Point),

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("points lie in different grid components (sizes {from_size} and {to_size}) at this resolution")]
    Disconnected { from_size: usize, to_size: usize },

    #[error("interior set is empty at lambda = {lambda}")]
    InteriorSetEmpty { lambda: f64 },

    #[error("cube {0} contains no defined grid cell")]
    NoDefinedCells(DyadicCube),

    #[error("matching failed for {} complement cubes (first: {})", .0.len(), .0[0])]
    MatchingFailed(Vec<DyadicCube>),
}

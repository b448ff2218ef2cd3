//! Direction sets on the unit sphere and the 26-neighbor router.

mod icosphere;
mod router;

pub use icosphere::{icosphere, icosphere_mesh, nearest_point, SpherePointSet, DEFAULT_LEVEL, MAX_LEVEL};
pub use router::{build_router, route, NeighborOffset, RouterTable, ROUTE_UNIT_TOLERANCE};
pub(crate) use router::shared_router;

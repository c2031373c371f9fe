//! Convexity near infinity and closed geodesics.

pub mod closed;
pub mod convexity;

pub use closed::{
    find_closed_geodesics, return_mismatch, ClosedGeodesic, ClosedSearch, SearchParams,
};
pub use convexity::{
    check_collar_orbits, check_turning_points, convexity_defect, find_eps0,
    finite_difference_rho_ddot, homogeneous_defect, turning_points, CollarCheck, ConvexityScan,
    EventCheck, ScanGrid, TurningPoint,
};

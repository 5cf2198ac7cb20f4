pub mod curve_geometry;
pub mod level_set_cover;
pub mod osc_symbolic;
pub mod quadrature;
pub mod xreal;

pub mod evaluate;
pub mod fit_isotherm;
pub mod fit_params;
pub mod predict;
pub mod rifts;
pub mod simulate;
pub mod sweep;
pub mod train;

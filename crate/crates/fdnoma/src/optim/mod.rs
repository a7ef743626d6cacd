//! Power-allocation solvers: the global polyblock method on the monotonic
//! reformulation and the SCA method on the difference-of-concave form.

pub mod monotonic;
pub mod sca;

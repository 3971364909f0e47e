//! Smooth and linear GAM trainers: fused-lasso (FLAM), penalized splines,
//! and penalized logistic regression variants.

pub mod flam;
pub mod linear;
pub mod spline;
pub mod tv;

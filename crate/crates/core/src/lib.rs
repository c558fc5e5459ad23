pub mod diagnostics;
pub mod fields;
pub mod flow;
pub mod initial;
pub mod lemmas;
pub mod quadrature;
pub mod sphere;
pub mod verify;

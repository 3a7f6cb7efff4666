//! Dense numeric kernel: matrices, a reverse-mode tape, parameter
//! initialization, Adam, and a finite-difference gradient checker.

mod gradcheck;
mod init;
mod matrix;
mod param;
mod tape;

pub use gradcheck::grad_check;
pub use init::xavier_init;
pub use matrix::{sigmoid, Matrix, Scalar};
pub use param::{adam_step, AdamConfig, Param};
pub use tape::{Csr, Grads, Tape, Var, BCE_EPS};

pub(crate) use tape::{bce_value, group_sum_value};

//! Loss, ADAM, the early-stopped training loop and gradient checking.

pub mod adam;
pub mod gradcheck;
pub mod loss;
pub mod train;

pub use adam::{adam_step, AdamState};
pub use gradcheck::{
    check_model, gradient_check, relative_error, Coverage, GradCheckReport, REL_ERROR_FLOOR,
};
pub use loss::bce_loss;
pub use train::{
    batch_gradients, mean_loss, train_loop, train_loop_with, EarlyStopper, EpochRecord,
    TrainConfig, TrainOutcome, TrainTrace,
};

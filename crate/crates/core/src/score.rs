use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive};

/// Scalar used for similarity scores, candidate scores and metrics.
pub trait Score: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static {
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any float")
    }

    fn of_count(n: usize) -> Self {
        Self::from_usize(n).expect("count fits in a float")
    }
}

impl<T: Float + FromPrimitive + Debug + Display + Default + Send + Sync + 'static> Score for T {}

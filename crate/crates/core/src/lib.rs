pub mod chain;
pub mod levy;
pub mod numeric;
pub mod replica;
pub mod transfer;
pub mod disorder;
pub mod lyapunov;
pub mod experiment;

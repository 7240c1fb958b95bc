pub mod bpc;
pub mod evaluation;
pub mod grasp;
pub mod instance;
pub mod lp;
pub mod master;
pub mod oracle;
pub mod pricing;
pub mod rng;
pub mod stabilization;
pub mod woc;

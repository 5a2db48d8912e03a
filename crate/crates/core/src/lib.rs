pub mod cli_io;
pub mod instance;
pub mod ipm;
pub mod linalg;
pub mod maintenance;
pub mod solver;

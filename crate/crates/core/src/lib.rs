//! Mixed-integer rotated-cone solver for congested capacitated facility
//! location, with instance generation, a brute-force oracle, a benchmark
//! harness and Conic Benchmark Format I/O.

pub mod lp;
pub mod model;
pub mod ccflp;
pub mod cuts;
pub mod oracle;
pub mod rng;
pub mod bnb;
pub mod cbf;
pub mod bench;

#![allow(dead_code)]

pub mod gradcheck;
pub mod ising_exact;
pub mod zipf;

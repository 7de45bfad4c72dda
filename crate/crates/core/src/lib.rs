pub mod ad;
pub mod audio;
pub mod cli;
pub mod dnnha;
pub mod evalkit;
pub mod losses;
pub mod periphery;
pub mod trainer;

pub mod attribute;
pub mod bench;
pub mod corrupt;
pub mod generate;
pub mod mfc;
pub mod monitor;
pub mod rank;

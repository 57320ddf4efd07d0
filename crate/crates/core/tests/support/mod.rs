pub mod metric_oracles;
pub mod screens;
pub mod trees;

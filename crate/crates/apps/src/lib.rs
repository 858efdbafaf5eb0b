//! Model files, the portfolio and lot-sizing studies, the two-stage test
//! instance and the command-line front end.

pub mod lotsizing;
pub mod model_file;
pub mod portfolio;
pub mod teststrict;
pub mod verify;

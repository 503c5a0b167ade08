pub mod burgers;
pub mod cgle;
pub mod ics;

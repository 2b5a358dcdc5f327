pub mod basis;
pub mod bounds;
pub mod linalg;
pub mod par;
pub mod persist;
pub mod problems;
pub mod srom;
pub mod strom;
pub mod system;

//! Command-line dispatch (stub while modules land).
pub fn run(_args: &[String]) -> u8 {
    3
}

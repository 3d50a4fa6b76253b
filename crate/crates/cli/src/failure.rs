use ran_topo_core::pipeline::ErrorClass;

/// A failed command: process exit code plus the message for stderr.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn new(class: ErrorClass, message: String) -> Self {
        let code = match class {
            ErrorClass::Config => 2,
            ErrorClass::Io => 3,
            ErrorClass::Internal => 4,
        };
        Self { code, message }
    }
}

use crate::error::{Error, Result};

/// Holds the record of one forward pass until the matching backward pass
/// consumes it.
#[derive(Debug)]
pub struct Tape<R> {
    record: Option<R>,
}

impl<R> Default for Tape<R> {
    fn default() -> Self {
        Tape { record: None }
    }
}

impl<R> Tape<R> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, r: R) {
        self.record = Some(r);
    }

    pub fn is_recorded(&self) -> bool {
        self.record.is_some()
    }

    pub fn take(&mut self) -> Result<R> {
        self.record.take().ok_or(Error::BackwardWithoutForward)
    }
}

use crate::linalg::Point2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SequenceError {
    #[error("fixation sequence is empty")]
    Empty,
    #[error("fixation {index} is not finite")]
    NonFinite { index: usize },
}

/// An ordered, nonempty list of finite fixation points (pixels).
#[derive(Debug, Clone, PartialEq)]
pub struct FixationSequence {
    points: Vec<Point2>,
}

impl FixationSequence {
    pub fn new(points: Vec<Point2>) -> Result<Self, SequenceError> {
        if points.is_empty() {
            return Err(SequenceError::Empty);
        }
        if let Some(index) = points.iter().position(|p| !p.is_finite()) {
            return Err(SequenceError::NonFinite { index });
        }
        Ok(FixationSequence { points })
    }

    pub fn points(&self) -> &[Point2] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    /// Always false; sequences are nonempty by construction.
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn into_points(self) -> Vec<Point2> {
        self.points
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_empty_and_non_finite() {
        assert_eq!(FixationSequence::new(vec![]), Err(SequenceError::Empty));
        let err = FixationSequence::new(vec![Point2::ZERO, Point2::new(1.0, f64::INFINITY)]);
        assert_eq!(err, Err(SequenceError::NonFinite { index: 1 }));
    }
}

use crate::error::{Error, Result};

/// Square confusion matrix, rows = ground truth, columns = prediction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(classes: usize) -> Self {
        Self {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(Error::invalid("confusion matrix must be square"));
        }
        Ok(Self {
            classes,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.classes + pred]
    }

    pub fn add(&mut self, truth: usize, pred: usize) {
        self.counts[truth * self.classes + pred] += 1;
    }

    /// `TP / (TP + FP + FN)`, or 0 for an empty denominator.
    pub fn iou(&self, class: usize) -> f64 {
        let tp = self.get(class, class);
        let fn_: u64 = (0..self.classes).map(|p| self.get(class, p)).sum::<u64>() - tp;
        let fp: u64 = (0..self.classes).map(|t| self.get(t, class)).sum::<u64>() - tp;
        let denom = tp + fp + fn_;
        if denom == 0 {
            0.0
        } else {
            tp as f64 / denom as f64
        }
    }
}

/// Mean IoU over the `present` classes only.
pub fn mean_iou(confusion: &ConfusionMatrix, present: &[usize]) -> Result<f64> {
    if present.is_empty() {
        return Err(Error::invalid("no classes to average over"));
    }
    if let Some(c) = present.iter().find(|&&c| c >= confusion.classes()) {
        return Err(Error::invalid(format!("class {c} outside the confusion matrix")));
    }
    Ok(present.iter().map(|&c| confusion.iou(c)).sum::<f64>() / present.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_is_perfect() {
        let cm = ConfusionMatrix::from_rows(&[vec![3, 0, 0], vec![0, 7, 0], vec![0, 0, 1]]).unwrap();
        assert_eq!(mean_iou(&cm, &[0, 1, 2]).unwrap(), 1.0);
    }

    #[test]
    fn two_class_example() {
        // class 0: 5 / (5 + 0 + 5); class 1: 10 / (10 + 5 + 0)
        let cm = ConfusionMatrix::from_rows(&[vec![5, 5], vec![0, 10]]).unwrap();
        assert!((mean_iou(&cm, &[0, 1]).unwrap() - (0.5 + 10.0 / 15.0) / 2.0).abs() < 1e-15);
        assert!((mean_iou(&cm, &[0, 1]).unwrap() - 0.583_333_333_333_333_4).abs() < 1e-12);
        assert_eq!(mean_iou(&cm, &[0]).unwrap(), 0.5);
    }

    #[test]
    fn absent_class_counts_as_zero() {
        let cm = ConfusionMatrix::from_rows(&[vec![4, 0], vec![0, 0]]).unwrap();
        assert_eq!(mean_iou(&cm, &[0, 1]).unwrap(), 0.5);
    }

    #[test]
    fn errors() {
        let cm = ConfusionMatrix::new(2);
        assert!(mean_iou(&cm, &[]).is_err());
        assert!(mean_iou(&cm, &[2]).is_err());
        assert!(ConfusionMatrix::from_rows(&[vec![1, 2]]).is_err());
    }
}

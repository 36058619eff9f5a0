use alloc::vec::Vec;

use crate::matching::Assignment;
use crate::tokens::{LabelGrid, TokenClass, NUM_CLASSES};

/// Per-class token counts for macro F1, accumulable across sentences.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TokenConfusion {
    pub tp: [u64; NUM_CLASSES],
    pub fp: [u64; NUM_CLASSES],
    pub fn_: [u64; NUM_CLASSES],
}

impl TokenConfusion {
    pub fn record(&mut self, predicted: TokenClass, target: TokenClass) {
        if predicted == target {
            self.tp[target.index()] += 1;
        } else {
            self.fp[predicted.index()] += 1;
            self.fn_[target.index()] += 1;
        }
    }

    pub fn merge(&mut self, other: &TokenConfusion) {
        for c in 0..NUM_CLASSES {
            self.tp[c] += other.tp[c];
            self.fp[c] += other.fp[c];
            self.fn_[c] += other.fn_[c];
        }
    }

    /// F1 of one class, or `None` if the class occurs in neither prediction
    /// nor target.
    pub fn class_f1(&self, class: TokenClass) -> Option<f64> {
        let c = class.index();
        let denom = 2 * self.tp[c] + self.fp[c] + self.fn_[c];
        (denom > 0).then(|| 2.0 * self.tp[c] as f64 / denom as f64)
    }

    /// Mean F1 over the classes that occur; 1.0 for an empty confusion.
    pub fn macro_f1(&self) -> f64 {
        let scores: Vec<f64> = TokenClass::ALL.iter().filter_map(|&c| self.class_f1(c)).collect();
        if scores.is_empty() {
            1.0
        } else {
            scores.iter().sum::<f64>() / scores.len() as f64
        }
    }
}

/// Token confusion of predicted slot masks against their assigned gold
/// masks; unmatched slots are compared with all-Background.
pub fn token_confusion(pred: &LabelGrid, gold: &LabelGrid, assignment: &Assignment) -> TokenConfusion {
    let mut conf = TokenConfusion::default();
    for (n, mask) in pred.masks().iter().enumerate() {
        let target = assignment.gold_for_slot(n).map(|m| &gold.masks()[m]);
        for (t, &p) in mask.labels().iter().enumerate() {
            let g = target.map_or(TokenClass::Background, |m| m.labels()[t]);
            conf.record(p, g);
        }
    }
    conf
}

/// Macro-averaged token F1 over the four classes.
pub fn token_macro_f1(pred: &LabelGrid, gold: &LabelGrid, assignment: &Assignment) -> f64 {
    token_confusion(pred, gold, assignment).macro_f1()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::{hungarian_max, SimilarityMatrix};
    use crate::tokens::{TokenClass::*, TripletMask};
    use alloc::vec;

    #[test]
    fn identical_grids_score_one() {
        let g = LabelGrid::new(3, vec![TripletMask::new(vec![Subject, Relation, Object])]).unwrap();
        let a = Assignment { pairs: vec![(0, 0)], total: 1.0 };
        assert_eq!(token_macro_f1(&g, &g, &a), 1.0);
    }

    #[test]
    fn all_background_prediction_hand_count() {
        // 4 tokens, gold [S, R, O, B], one slot predicting all Background.
        // Background: tp 1, fp 3, fn 0 -> 2/5. S, R, O: tp 0 -> 0. Macro = 0.1.
        let gold = LabelGrid::new(4, vec![TripletMask::new(vec![Subject, Relation, Object, Background])]).unwrap();
        let pred = LabelGrid::new(4, vec![TripletMask::background(4)]).unwrap();
        let a = Assignment { pairs: vec![(0, 0)], total: 0.0 };
        let conf = token_confusion(&pred, &gold, &a);
        assert_eq!(conf.class_f1(Background), Some(0.4));
        assert_eq!(conf.class_f1(Subject), Some(0.0));
        assert!((conf.macro_f1() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn gold_order_does_not_matter_after_rematching() {
        let m1 = TripletMask::new(vec![Subject, Relation, Object, Background]);
        let m2 = TripletMask::new(vec![Background, Relation, Subject, Object]);
        let pred = LabelGrid::new(4, vec![m2.clone(), TripletMask::background(4), m1.clone()]).unwrap();
        let score = |gold: &LabelGrid| {
            let sim = SimilarityMatrix::from_fn(3, 2, |n, m| {
                let same = pred.masks()[n].labels().iter().zip(gold.masks()[m].labels()).filter(|(a, b)| a == b).count();
                same as f64
            });
            token_macro_f1(&pred, gold, &hungarian_max(&sim).unwrap())
        };
        let a = LabelGrid::new(4, vec![m1.clone(), m2.clone()]).unwrap();
        let b = LabelGrid::new(4, vec![m2, m1]).unwrap();
        assert_eq!(score(&a), score(&b));
        assert_eq!(score(&a), 1.0);
    }
}

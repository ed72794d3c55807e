use std::cmp::Reverse;

use super::RuleKind;

/// A supergroup competing for acceptance within one queue group.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub supergroup: usize,
    pub total_value: i64,
    /// Smallest processing-order position among the members.
    pub earliest_position: usize,
}

/// Reorders candidates in place into visiting order.
pub type CandidateOrdering = fn(&mut [Candidate]);

fn by_value(c: &mut [Candidate]) {
    c.sort_by_key(|c| (Reverse(c.total_value), c.supergroup));
}

fn by_arrival(c: &mut [Candidate]) {
    c.sort_by_key(|c| (c.earliest_position, c.supergroup));
}

/// The ordering procedure of a rule.
pub fn dispatch_rule(kind: RuleKind) -> CandidateOrdering {
    match kind {
        RuleKind::ValuePriority => by_value,
        RuleKind::FifoStrict => by_arrival,
        // The whole-group rejection is applied by the selector.
        RuleKind::AllOrNothingGroup => by_value,
    }
}

impl RuleKind {
    /// Whether one failed supergroup rejects the whole queue group.
    pub fn is_all_or_nothing(self) -> bool {
        matches!(self, RuleKind::AllOrNothingGroup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cand(supergroup: usize, total_value: i64, earliest_position: usize) -> Candidate {
        Candidate {
            supergroup,
            total_value,
            earliest_position,
        }
    }

    fn order(kind: RuleKind, mut c: Vec<Candidate>) -> Vec<usize> {
        dispatch_rule(kind)(&mut c);
        c.into_iter().map(|c| c.supergroup).collect()
    }

    #[test]
    fn value_priority_descends() {
        assert_eq!(
            order(RuleKind::ValuePriority, vec![cand(1, 5, 0), cand(2, 9, 1)]),
            [2, 1]
        );
    }

    #[test]
    fn equal_values_fall_back_to_id() {
        assert_eq!(
            order(
                RuleKind::ValuePriority,
                vec![cand(7, 3, 0), cand(2, 3, 5), cand(4, 3, 1)]
            ),
            [2, 4, 7]
        );
        assert_eq!(
            order(RuleKind::AllOrNothingGroup, vec![cand(7, 3, 0), cand(2, 3, 5)]),
            [2, 7]
        );
    }

    #[test]
    fn fifo_follows_position() {
        assert_eq!(
            order(
                RuleKind::FifoStrict,
                vec![cand(0, 100, 9), cand(1, 1, 2), cand(2, 50, 2)]
            ),
            [1, 2, 0]
        );
    }
}

//! Resource budgets. Everything that can blow up combinatorially checks one
//! of these before allocating; callers override fields as needed.

#[derive(Clone, Debug)]
pub struct Caps {
    /// Maximum word degree accepted by coproduct expansion.
    pub max_word_degree: usize,
    /// Maximum number of (left, right) pairs a coproduct expansion may emit.
    pub max_coproduct_pairs: usize,
    /// Maximum number of terms a word-sum product may accumulate
    /// (bounds morphism pullback expansions).
    pub max_wordsum_terms: usize,
    /// Maximum entry count of a transfer matrix (n^2d).
    pub max_transfer_entries: usize,
    /// Entry count above which matrix powering switches from exact rationals
    /// to binary64 floats.
    pub float_switch_entries: usize,
    /// Maximum syllable count in free-product state evaluation.
    pub max_syllables: usize,
    /// Maximum group order for direct Haar averaging over a finite group.
    pub max_direct_average: usize,
    /// Maximum entry count of a materialized UCP output matrix.
    pub max_ucp_entries: usize,
}

impl Default for Caps {
    fn default() -> Self {
        Caps {
            max_word_degree: 8,
            max_coproduct_pairs: 1_000_000,
            max_wordsum_terms: 100_000,
            max_transfer_entries: 1_000_000,
            float_switch_entries: 10_000,
            max_syllables: 12,
            max_direct_average: 100_000,
            max_ucp_entries: 50_000_000,
        }
    }
}

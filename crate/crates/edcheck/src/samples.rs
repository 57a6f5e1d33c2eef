//! Sample programs shipped with the crate.

pub const COUNTING: &str = include_str!("../programs/counting.edp");
pub const BUYERS: &str = include_str!("../programs/buyers.edp");
pub const CONSENSUS: &str = include_str!("../programs/consensus.edp");
pub const MESSAGE_LOOP: &str = include_str!("../programs/messageloop.edp");
pub const SPARSE_MAT: &str = include_str!("../programs/sparsemat.edp");
pub const SORTING: &str = include_str!("../programs/sorting.edp");

/// Name and source of every sample.
pub const ALL: [(&str, &str); 6] = [
    ("counting", COUNTING),
    ("buyers", BUYERS),
    ("consensus", CONSENSUS),
    ("messageloop", MESSAGE_LOOP),
    ("sparsemat", SPARSE_MAT),
    ("sorting", SORTING),
];

//! Holds the `acceptance` test target; run it with
//! `cargo test -p dilemma-acceptance --test acceptance`.

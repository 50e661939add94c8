//! Holds the `acceptance` test target, which prints one pass/fail line per
//! acceptance criterion. Run it with `cargo test -p bsq-verify --test acceptance`.

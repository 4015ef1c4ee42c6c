//! Holds the `acceptance` test target, which runs every acceptance criterion
//! at its pinned tolerance and prints one PASS/FAIL line per criterion.
//!
//! It lives in its own package so that it runs after every other test
//! binary in the workspace.

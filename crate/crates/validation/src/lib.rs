//! Holds the `acceptance` test target, which prints one pass/fail line per
//! criterion. It lives in its own package so that a red criterion does not
//! stop the rest of the workspace tests from running.

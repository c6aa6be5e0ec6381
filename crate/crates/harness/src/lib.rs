//! Convergence-study harness: built-in cases, error norms, EOC, CSV.

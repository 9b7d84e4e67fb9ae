//! Home of the end-to-end acceptance suite (`cargo test -p poisson-ou-validation --test acceptance`).
//! The suite lives in its own package so that it runs after every other test binary.

//! Finite-scale laboratory for monochromatic sumsets `X + X`.
//!
//! Vectors live in the direct sum of copies of ℚ ([`qvec`]). A coloring
//! oracle ([`oracle`]) assigns each vector one of `r` colors. The witness
//! builders ([`pipeline2`], [`pipeline_r`]) combine pattern vectors
//! ([`pattern`]) with homogeneous-set searches ([`ramsey`]) to produce sets
//! `X` whose sumset is monochromatic, and every witness is re-evaluated
//! against the oracle before it is returned.

pub mod certificate;
pub mod deltasys;
pub mod oracle;
pub mod pattern;
pub mod pipeline2;
pub mod pipeline_r;
pub mod qvec;
pub mod ramsey;
pub mod search;

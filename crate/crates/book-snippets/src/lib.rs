//! The guide's chapters, compiled as doc-tests so every code block in
//! `book/src` runs under `cargo test`. One module per chapter, so a failing
//! block names its chapter.

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/introduction.md")]
mod introduction {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/geometry.md")]
mod geometry {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/fields.md")]
mod fields {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/flow.md")]
mod flow {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/comparing.md")]
mod comparing {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/verification.md")]
mod verification {}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/cli.md")]
mod cli {}

#[cfg(doctest)]
#[doc = include_str!("../../../README.md")]
mod readme {}

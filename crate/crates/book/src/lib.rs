//! Compiles every listing in `book/src` as a doctest, one module per chapter.

#[doc = include_str!("../../../book/src/intro.md")]
pub mod intro {}
#[doc = include_str!("../../../book/src/graphs.md")]
pub mod graphs {}
#[doc = include_str!("../../../book/src/glpp.md")]
pub mod glpp {}
#[doc = include_str!("../../../book/src/twod.md")]
pub mod twod {}
#[doc = include_str!("../../../book/src/lbp.md")]
pub mod lbp {}
#[doc = include_str!("../../../book/src/evaluation.md")]
pub mod evaluation {}
#[doc = include_str!("../../../book/src/cli.md")]
pub mod cli {}
#[doc = include_str!("../../../README.md")]
pub mod readme {}

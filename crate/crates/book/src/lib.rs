//! Runs the guide's code blocks as doc-tests. Each chapter is its own module
//! so a failing snippet points at the chapter it came from.

#[doc = include_str!("../../../book/src/introduction.md")]
pub mod introduction {}
#[doc = include_str!("../../../book/src/subject-language.md")]
pub mod subject_language {}
#[doc = include_str!("../../../book/src/metrics.md")]
pub mod metrics {}
#[doc = include_str!("../../../book/src/families.md")]
pub mod families {}
#[doc = include_str!("../../../book/src/combining.md")]
pub mod combining {}
#[doc = include_str!("../../../book/src/corpus.md")]
pub mod corpus {}

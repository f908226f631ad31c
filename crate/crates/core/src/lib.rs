//! Generative-field analysis for convolutional generators.
//!
//! A receptive field tells which input region a unit of a perceiving CNN
//! sees; a generative field tells which output region a unit of a generator
//! can influence. This crate computes generative fields statically from an
//! architecture description ([`arch`], [`fields`]), checks them against
//! brute-force impulse propagation ([`footprint`]), and provides the
//! style-space machinery built on top of them: layout and control-unit
//! masking ([`style`]), control-signal statistics ([`sparsity`]), a Gaussian
//! style regularizer ([`regularizer`]) and the editing losses ([`losses`]).
//!
//! ```
//! use genfield::{arch::ArchSpec, fields::fields_table};
//!
//! let arch = ArchSpec::stylegan2(256)?;
//! let table = fields_table(&arch)?;
//! assert_eq!(table.records[6].generative_field, 59);
//! # Ok::<(), genfield::Error>(())
//! ```

pub mod arch;
pub mod csvio;
mod error;
pub mod fields;
pub mod footprint;
pub mod losses;
pub mod regularizer;
pub mod sparsity;
pub mod style;

pub use error::{Error, Result};

// The guide under book/ is compiled as doctests so its snippets stay current.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/architectures.md")]
    mod architectures {}
    #[doc = include_str!("../../../book/src/generative-fields.md")]
    mod generative_fields {}
    #[doc = include_str!("../../../book/src/footprints.md")]
    mod footprints {}
    #[doc = include_str!("../../../book/src/style-space.md")]
    mod style_space {}
    #[doc = include_str!("../../../book/src/sparsity.md")]
    mod sparsity {}
    #[doc = include_str!("../../../book/src/regularizer.md")]
    mod regularizer {}
    #[doc = include_str!("../../../book/src/losses.md")]
    mod losses {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}

//! Extended-precision and exact-rational tooling for the discrete entropy
//! power inequality along binomial and sum-of-IID families.
//!
//! ```
//! use epi_core::dist::BernoulliParam;
//! use epi_core::epi::epi_gap;
//! use epi_core::precision::Precision;
//!
//! let p = BernoulliParam::parse("0.05", Precision::default()).unwrap();
//! assert!(epi_gap(1, 2, &p).gap.is_negative());
//! ```

pub mod asymptotics;
pub mod discrimination;
pub mod dist;
pub mod epi;
pub mod error;
pub mod moments;
pub mod polycert;
pub mod precision;
pub mod quadrature;

#[cfg(doctest)]
mod book {
    macro_rules! chapter {
        ($name:ident, $file:literal) => {
            #[doc = include_str!(concat!("../../../book/src/", $file))]
            pub struct $name;
        };
    }

    chapter!(Introduction, "introduction.md");
    chapter!(Precision, "precision.md");
    chapter!(Distributions, "distributions.md");
    chapter!(Epi, "epi.md");
    chapter!(Discrimination, "discrimination.md");
    chapter!(Moments, "moments.md");
    chapter!(Certificates, "certificates.md");
    chapter!(Asymptotics, "asymptotics.md");
    chapter!(Cli, "cli.md");
}

//! Numerical toolkit for martingale square functions and the diffusion
//! semigroups a martingale filtration induces.
//!
//! The library works with two models:
//!
//! * a finite measure space with a chain of refining partitions (a filtered
//!   probability space), carrying scalar or vector valued functions, and
//! * a finite dimensional matrix algebra with a tensor-factor filtration and
//!   the normalized trace.
//!
//! On both it builds the subordinated semigroup
//! `T^t = sum_n exp(-t b_{n-1}) dE_n` from a nonnegative increasing sequence
//! `b`, and provides the associated square functions: the martingale square
//! function `S`, its `q`-variants, the closed-form kernel quadratic form `G`,
//! and the Littlewood-Paley `g`-function computed by adaptive quadrature.
//! The `suites` module packages the quantitative checks (two-sided pointwise
//! bounds with explicit constants, kernel spectrum enclosures, semigroup
//! axioms, martingale/semigroup norm equivalences, constant growth in `p`)
//! into deterministic, seedable verification runs.
//!
//! All numeric kernels are generic over the scalar type through
//! [`scalar::Real`]; `f64` aliases for the main types are exported below.

pub mod constants_lab;
pub mod gamma_construction;
pub mod kahan;
pub mod littlewood_paley;
pub mod nc_matrix;
pub mod probability;
pub mod quadrature;
pub mod semigroup;
pub mod special;
pub mod suites;

mod scalar;

pub use scalar::Real;

/// `f64` concrete aliases for the core types.
pub type SpaceF64 = probability::FiniteMeasureSpace<f64>;
pub type FiltrationF64 = probability::Filtration<f64>;
pub type MartingaleF64 = probability::MartingaleFunction<f64>;
pub type ExponentF64 = probability::Exponent<f64>;
pub type SequenceF64 = semigroup::SubordinationSequence<f64>;
pub type KernelF64 = littlewood_paley::KernelMatrix<f64>;
pub type GammaSequencesF64 = gamma_construction::GammaSequences<f64>;
pub type TracialF64 = nc_matrix::TracialElement<f64>;
pub type RatioReportF64 = constants_lab::RatioReport<f64>;
pub type GrowthReportF64 = constants_lab::GrowthReport<f64>;

//! Query service and command-line front end for weighted climate
//! aggregation.
//!
//! A [`catalog::Catalog`] indexes a data directory, [`query::RawQuery`]
//! validates a request into a [`query::Query`], the catalog turns it into a
//! [`catalog::Plan`], and [`pipeline::run`] executes the plan with
//! `wclim_core`. [`server`] exposes the same steps over HTTP.

pub mod catalog;
pub mod error;
pub mod pipeline;
pub mod query;
pub mod server;

pub use catalog::{Catalog, Plan};
pub use error::{ApiError, ErrorCode};
pub use query::{Query, RawQuery};
pub use server::{router, AppState, ServiceConfig};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/service.md")]
    mod service {}
}

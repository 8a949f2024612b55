// SPDX-License-Identifier: Apache-2.0

pub mod agent;
pub mod backend;
pub mod cli;
pub mod dataset;
pub mod metrics;
pub mod prompts;
pub mod text;
pub mod types;
pub mod verifier;

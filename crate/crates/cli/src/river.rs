//! River overflow model `S = Zv + (Q / (B·Ks·√((Zm − Zv)/L)))^0.6 − Hd − Cb`.
//!
//! The shipped marginals are placeholders with plausible ranges, labelled
//! `provenance: "placeholder"` in every report. Supply all eight in a config
//! to replace them.

use crate::config::{MarginalSpec, PayoutSpec, RunConfig, SolverSpec, SpectralSpec};
use crate::CliError;

pub const RIVER_NAMES: [&str; 8] = ["Q", "Ks", "Zv", "Zm", "Hd", "Cb", "L", "B"];
pub const RIVER_EXPR: &str = "Zv + (Q/(B*Ks*sqrt((Zm - Zv)/L)))^0.6 - Hd - Cb";

/// Index of `Zv` and `Zm` in [`RIVER_NAMES`].
const ZV: usize = 2;
const ZM: usize = 3;

pub fn placeholder_marginals() -> Vec<MarginalSpec> {
    vec![
        MarginalSpec::TruncatedGumbel {
            loc: 1013.0,
            scale: 558.0,
            lo: 500.0,
            hi: 3000.0,
        },
        MarginalSpec::TruncatedNormal {
            mean: 30.0,
            sd: 8.0,
            lo: 15.0,
            hi: 54.0,
        },
        MarginalSpec::Triangular {
            a: 49.0,
            mode: 50.0,
            b: 51.0,
        },
        MarginalSpec::Triangular {
            a: 54.0,
            mode: 55.0,
            b: 56.0,
        },
        MarginalSpec::Uniform { a: 7.0, b: 9.0 },
        MarginalSpec::Triangular {
            a: 55.0,
            mode: 55.5,
            b: 56.0,
        },
        MarginalSpec::Triangular {
            a: 4990.0,
            mode: 5000.0,
            b: 5010.0,
        },
        MarginalSpec::Triangular {
            a: 295.0,
            mode: 300.0,
            b: 305.0,
        },
    ]
}

fn payout() -> PayoutSpec {
    PayoutSpec {
        expr: Some(RIVER_EXPR.into()),
        names: Some(RIVER_NAMES.iter().map(|s| s.to_string()).collect()),
        ..Default::default()
    }
}

pub fn default_config() -> RunConfig {
    RunConfig {
        payout: payout(),
        marginals: placeholder_marginals(),
        spectral: SpectralSpec::Es { m0: 0.05 },
        solver: SolverSpec::Comonotone,
        override_compatibility: false,
        partition_minus: None,
        discretization: 64,
        // 3^8 probe points keep the eight-variable classification fast
        grid_per_axis: 3,
        twist_block: None,
        output_dir: None,
        seed: 0,
        stability: None,
        multirisk: None,
        provenance: Some("placeholder".into()),
    }
}

/// The default river config, or the user's with the river payout imposed.
pub fn river_config(user: Option<&RunConfig>) -> Result<RunConfig, CliError> {
    let cfg = match user {
        None => default_config(),
        Some(u) => {
            if u.marginals.len() != RIVER_NAMES.len() {
                return Err(CliError::Config(format!(
                    "the river model needs 8 marginals in the order {RIVER_NAMES:?}, got {}",
                    u.marginals.len()
                )));
            }
            let mut c = u.clone();
            c.payout = PayoutSpec {
                domain: u.payout.domain.clone(),
                ..payout()
            };
            c.provenance.get_or_insert_with(|| "user".into());
            c
        }
    };
    cfg.validate()?;
    let marginals = cfg.build_marginals()?;
    let domain = cfg.domain(&marginals);
    if domain[ZM].0 <= domain[ZV].1 {
        return Err(CliError::Config(format!(
            "Zm must exceed Zv on the whole box: min Zm = {} but max Zv = {}",
            domain[ZM].0, domain[ZV].1
        )));
    }
    Ok(cfg)
}

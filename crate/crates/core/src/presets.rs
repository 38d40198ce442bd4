//! Named parameter sets and initial data for the reference simulations.

use crate::model::{ModelParams, SensitivitySpec};
use crate::pde::{InitialData, WaveScale};

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: &'static str,
    pub description: &'static str,
    pub params: ModelParams,
    pub initial: InitialData,
    pub t_end: f64,
    /// Domain lengths to sweep; empty means just `params.length`.
    pub lengths: Vec<f64>,
}

pub const PRESET_NAMES: [&str; 5] = ["fig2", "fig3", "fig56", "fig4d_a", "fig4d_b"];

/// Lengths for the domain-size study, chosen to bracket `L = 5` and `L = 12`.
pub const FIG56_LENGTHS: [f64; 8] = [1.0, 2.0, 3.0, 5.0, 8.0, 10.0, 12.0, 15.0];

fn log_params(d1: f64, d2: f64, chi: f64, lambda: f64, length: f64) -> ModelParams {
    ModelParams::new(d1, d2, chi, lambda, length, SensitivitySpec::Logarithmic).expect("preset parameters are valid")
}

fn perturbation(a: f64, m: f64) -> InitialData {
    InitialData {
        base_u: None,
        base_v: None,
        u: (a, m),
        v: (a, m),
        scale: WaveScale::Absolute,
    }
}

pub fn preset(name: &str) -> Option<Preset> {
    let p = match name {
        "fig2" => Preset {
            name: "fig2",
            description: "single boundary spike at x = 0",
            params: log_params(1.0, 1.0, 20.0, 1.0, 1.0),
            initial: perturbation(0.01, 1.0),
            t_end: 100.0,
            lengths: vec![],
        },
        "fig3" => Preset {
            name: "fig3",
            description: "multiple interior spikes on the longer interval",
            params: log_params(1.0, 1.0, 20.0, 1.0, 10.0),
            initial: perturbation(0.01, 1.0),
            t_end: 500.0,
            lengths: vec![],
        },
        "fig56" => Preset {
            name: "fig56",
            description: "spike count against domain length",
            params: log_params(0.1, 1.0, 5.0, 1.0, 1.0),
            initial: perturbation(0.01, 1.5),
            t_end: 500.0,
            lengths: FIG56_LENGTHS.to_vec(),
        },
        "fig4d_a" => Preset {
            name: "fig4d_a",
            description: "u0 = v0 = 2 + 0.01 cos 3πx on (0, 1)",
            params: log_params(0.1, 1.0, 5.0, 1.0, 1.0),
            initial: InitialData {
                base_u: Some(2.0),
                base_v: Some(2.0),
                u: (0.01, 3.0),
                v: (0.01, 3.0),
                scale: WaveScale::Absolute,
            },
            t_end: 200.0,
            lengths: vec![],
        },
        "fig4d_b" => Preset {
            name: "fig4d_b",
            description: "u0 = 1 + cos 1.5πx, v0 = 1 + 0.5 cos πx on (0, 10)",
            params: log_params(0.1, 1.0, 5.0, 1.0, 10.0),
            initial: InitialData {
                base_u: Some(1.0),
                base_v: Some(1.0),
                u: (1.0, 1.5),
                v: (0.5, 1.0),
                scale: WaveScale::Absolute,
            },
            t_end: 200.0,
            lengths: vec![],
        },
        _ => return None,
    };
    Some(p)
}

//! Named experiment configurations.
//!
//! Each preset encodes one published protocol: 1000-dimensional Gaussian
//! problems, 100 trials, base seed 7. Sweep values that the sources only
//! show graphically use evenly spaced grids over the plotted ranges.

use super::{ExperimentConfig, OneOrMany, Snr, SolverKind, SolverSpec};

pub const PRESET_NAMES: [&str; 11] = [
    "exp1-tau",
    "exp1-c",
    "exp2-aop",
    "exp3-noise",
    "exp4-epsvm",
    "contour",
    "fig-piht-m",
    "fig-piht-noise",
    "fig-piht-k",
    "table1",
    "table2",
];

fn base(name: &str, m: Vec<usize>, k: usize, solvers: Vec<SolverSpec>) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        n: 1000,
        m: OneOrMany::many(m),
        k: OneOrMany::one(k),
        r_f: OneOrMany::one(0.1),
        r_n: OneOrMany::one(Snr::INF),
        trials: 100,
        base_seed: 7,
        solvers: OneOrMany::many(solvers),
    }
}

/// `lo + step * i` over an inclusive integer range, computed as exact
/// rationals to keep grid values identical across platforms.
fn grid(lo_num: i64, step_num: i64, den: i64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|i| (lo_num + step_num * i as i64) as f64 / den as f64)
        .collect()
}

fn piht(tau: f64, c: f64) -> SolverSpec {
    SolverSpec {
        tau: Some(OneOrMany::one(tau)),
        c: Some(OneOrMany::one(c)),
        ..SolverSpec::new(SolverKind::Piht)
    }
}

fn piht_family() -> Vec<SolverSpec> {
    vec![
        SolverSpec::new(SolverKind::Biht),
        SolverSpec {
            label: Some("piht(-0.1)".into()),
            ..piht(-0.1, 1.0)
        },
        SolverSpec {
            label: Some("piht(-0.2)".into()),
            ..piht(-0.2, 1.0)
        },
        SolverSpec {
            label: Some("piht(-0.4)".into()),
            ..piht(-0.4, 1.0)
        },
    ]
}

fn epsvm_tau(tau: f64) -> SolverSpec {
    SolverSpec {
        label: Some(format!("epsvm({tau})")),
        tau: Some(OneOrMany::one(tau)),
        c: Some(OneOrMany::one(1.0)),
        ..SolverSpec::new(SolverKind::Epsvm)
    }
}

/// Returns the named preset, or `None` for an unknown name.
pub fn preset(name: &str) -> Option<ExperimentConfig> {
    let config = match name {
        // Slope sweep at zero bias: n=1000, K=10, m=500, 10% flips, no noise.
        "exp1-tau" => base(
            name,
            vec![500],
            10,
            vec![SolverSpec {
                tau: Some(OneOrMany::many(grid(-100, 5, 100, 21))),
                c: Some(OneOrMany::one(0.0)),
                ..SolverSpec::new(SolverKind::Piht)
            }],
        ),
        // Bias sweep at tau = -0.2 on the same problem.
        "exp1-c" => base(
            name,
            vec![500],
            10,
            vec![SolverSpec {
                tau: Some(OneOrMany::one(-0.2)),
                c: Some(OneOrMany::many(grid(0, 1, 5, 11))),
                ..SolverSpec::new(SolverKind::Piht)
            }],
        ),
        // Sign-correction comparison over m: K=15, 10% flips.
        "exp2-aop" => base(
            name,
            (2..=15).map(|i| i * 100).collect(),
            15,
            vec![
                SolverSpec::new(SolverKind::Biht),
                piht(-0.2, 1.0),
                SolverSpec::new(SolverKind::AopBiht),
                SolverSpec {
                    tau: Some(OneOrMany::one(-0.2)),
                    c: Some(OneOrMany::one(1.0)),
                    ..SolverSpec::new(SolverKind::AopPiht)
                },
            ],
        ),
        // Same four solvers against measurement noise (flips kept at 10%;
        // rerun with --rf 0 for the noise-only panel): K=15, m=800.
        "exp3-noise" => {
            let mut config = base(
                name,
                vec![800],
                15,
                vec![
                    SolverSpec::new(SolverKind::Biht),
                    piht(-0.2, 1.0),
                    SolverSpec::new(SolverKind::AopBiht),
                    SolverSpec {
                        tau: Some(OneOrMany::one(-0.2)),
                        c: Some(OneOrMany::one(1.0)),
                        ..SolverSpec::new(SolverKind::AopPiht)
                    },
                ],
            );
            config.r_n = OneOrMany::many(snr_grid());
            config
        }
        // Regularized-model slope sweep: K=15, m=300, mu = sqrt(ln n / m).
        "exp4-epsvm" => base(
            name,
            vec![300],
            15,
            vec![SolverSpec {
                tau: Some(OneOrMany::many(grid(-100, 5, 100, 20))),
                c: Some(OneOrMany::one(1.0)),
                mu_coef: Some(OneOrMany::one(1.0)),
                ..SolverSpec::new(SolverKind::Epsvm)
            }],
        ),
        // Joint tau x C map on the same problem.
        "contour" => base(
            name,
            vec![300],
            15,
            vec![SolverSpec {
                tau: Some(OneOrMany::many(grid(-100, 10, 100, 10))),
                c: Some(OneOrMany::one(1.0)),
                mu_coef: Some(OneOrMany::many(grid(4, 1, 10, 10))),
                ..SolverSpec::new(SolverKind::Epsvm)
            }],
        ),
        // Thresholding solvers over a wide m range: K=20, 10% flips.
        "fig-piht-m" => base(
            name,
            vec![100, 200, 350, 500, 800, 1100, 1500, 2000, 3000, 4000, 5000],
            20,
            piht_family(),
        ),
        // Same curves against noise at m=800.
        "fig-piht-noise" => {
            let mut config = base(name, vec![800], 20, piht_family());
            config.r_n = OneOrMany::many(snr_grid());
            config
        }
        // Sensitivity to a wrong sparsity estimate (true K=20, m=800).
        "fig-piht-k" => {
            let estimates = vec![5, 10, 15, 20, 25, 30, 40, 50, 60, 80];
            let mut solvers = piht_family();
            for spec in &mut solvers {
                spec.k_est = Some(OneOrMany::many(estimates.clone()));
            }
            base(name, vec![800], 20, solvers)
        }
        // Regularized solvers over m, noiseless: K=20, 10% flips.
        "table1" => base(
            name,
            vec![200, 350, 500, 650, 800, 1100, 1400, 1700, 2000],
            20,
            vec![
                epsvm_tau(-0.4),
                epsvm_tau(-0.5),
                epsvm_tau(-0.7),
                epsvm_tau(-0.9),
                SolverSpec::new(SolverKind::Passive),
            ],
        ),
        // The same sweep with measurement noise at snr = 10.
        "table2" => {
            let mut config = preset("table1").unwrap();
            config.name = name.to_string();
            config.r_n = OneOrMany::one(Snr(10.0));
            config
        }
        _ => return None,
    };
    Some(config)
}

fn snr_grid() -> Vec<Snr> {
    [1.0, 2.0, 5.0, 10.0, 15.0, 20.0, 30.0, 40.0, 50.0]
        .into_iter()
        .map(Snr)
        .collect()
}

//! Experiment execution and metrics emission.
//!
//! Every (size, replicate) cell derives its own seed from the master seed;
//! all enabled algorithms inside a cell share the same owner split, seed
//! set, and hash basis. Output bytes are a pure function of the config, so
//! re-running a config reproduces every file exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::baselines;
use crate::data::{self, Dataset, FeatureStats, GaussianSpec, OwnerSplit, SplitSpec};
use crate::error::Error;
use crate::kernel::{mmd_sq, KernelParams};
use crate::privacy::{make_schedule, Composition};
use crate::protocol::{
    self, ParamPlan, PracticalPlan, ProtocolConfig, SeedSetSpec, SummaryTrace,
};
use crate::rng::{derive_seed, stream};
use crate::Result;

use super::config::{Algorithm, DataSource, ExperimentConfig, Mode};

pub const METRICS_HEADER: &str = "alg,size,seed,mmd_sq,pct_vs_greedy,accessed,eps,delta";

/// One output row of the metrics table.
#[derive(Debug, Clone, Serialize)]
pub struct MetricsRow {
    pub alg: &'static str,
    pub size: usize,
    /// Replicate index within the experiment.
    pub seed: usize,
    pub mmd_sq: Option<f64>,
    pub pct_vs_greedy: Option<f64>,
    pub accessed: Option<u64>,
    pub eps: Option<f64>,
    pub delta: Option<f64>,
}

impl MetricsRow {
    fn csv_line(&self) -> String {
        fn opt_f(v: Option<f64>) -> String {
            v.map(|x| format!("{x}")).unwrap_or_default()
        }
        fn opt_u(v: Option<u64>) -> String {
            v.map(|x| format!("{x}")).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{}",
            self.alg,
            self.size,
            self.seed,
            opt_f(self.mmd_sq),
            opt_f(self.pct_vs_greedy),
            opt_u(self.accessed),
            opt_f(self.eps),
            opt_f(self.delta)
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub rows: Vec<MetricsRow>,
    pub failures: Vec<String>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Serialize)]
struct LedgerTotals {
    events: usize,
    eps_sum: f64,
    eps_sqrt_log: f64,
    eps_sqrt_exp: f64,
    eps_total: f64,
    delta_total: f64,
}

impl From<Composition> for LedgerTotals {
    fn from(c: Composition) -> Self {
        LedgerTotals {
            events: c.events,
            eps_sum: c.eps_sum,
            eps_sqrt_log: c.eps_sqrt_log,
            eps_sqrt_exp: c.eps_sqrt_exp,
            eps_total: c.eps_total,
            delta_total: c.delta_total,
        }
    }
}

#[derive(Debug, Serialize)]
struct RunMeta<'a> {
    size: usize,
    replicate: usize,
    cell_seed: u64,
    protocol: &'a ProtocolConfig,
    basis: crate::rff::BasisSpec,
    status: protocol::Termination,
    accessed_total: u64,
    expected_access_bound: Option<f64>,
    parsimony_factor: f64,
    owner_channel: LedgerTotals,
    validation_channel: LedgerTotals,
    verification_failures: &'a [(usize, usize)],
}

struct Instance {
    owners: Vec<OwnerSplit>,
    validation: Dataset,
    seed_set: Dataset,
    total_points: usize,
}

struct CsvData {
    train: Dataset,
    validation: Dataset,
}

fn build_instance(
    config: &ExperimentConfig,
    csv: Option<&CsvData>,
    cell_seed: u64,
) -> Result<Instance> {
    let instance_seed = derive_seed(cell_seed, stream::INSTANCE);
    let (mut owners, mut validation) = match config.source {
        DataSource::Synthetic => {
            let owner_params: Vec<GaussianSpec> = config
                .owner_means
                .iter()
                .zip(&config.owner_stds)
                .map(|(m, s)| GaussianSpec {
                    mean: m.clone(),
                    std: s.clone(),
                })
                .collect();
            let validation_params = GaussianSpec {
                mean: config.validation_mean.clone(),
                std: config.validation_std.clone(),
            };
            data::synth_shift(
                config.dim,
                &config.owner_sizes,
                &owner_params,
                config.validation_size,
                &validation_params,
                instance_seed,
            )?
        }
        DataSource::Csv => {
            let csv = csv.expect("csv data loaded for csv source");
            let owners = data::split_owners(
                &csv.train,
                &SplitSpec::Fractions(config.split_fractions.clone()),
                instance_seed,
            )?;
            (owners, csv.validation.clone())
        }
    };

    if config.standardize {
        let stats = FeatureStats::from_dataset(&validation)?;
        stats.apply(&mut validation)?;
        for o in owners.iter_mut() {
            stats.apply(&mut o.dataset)?;
        }
    }

    let seed_set = protocol::build_seed_set(
        &SeedSetSpec::Synthetic {
            size: config.seed_size,
            scale: config.seed_scale,
        },
        validation.dim,
        derive_seed(cell_seed, stream::SEED_SET),
    )?;
    let total_points = owners.iter().map(|o| o.dataset.len()).sum();
    Ok(Instance {
        owners,
        validation,
        seed_set,
        total_points,
    })
}

fn protocol_config(
    config: &ExperimentConfig,
    size: usize,
    cell_seed: u64,
    owners: usize,
    seed_set: Dataset,
) -> Result<ProtocolConfig> {
    let tau_default = ((owners as f64).powf(2.0 / 3.0).round() as usize).max(1);
    let plan = match config.mode {
        Mode::Theory => {
            let schedule = make_schedule(
                config.eps_target,
                config.delta_tilde,
                size.max(2),
                config.rff_dim,
                owners,
                config.rff_dim * config.rff_dim,
            )?;
            ParamPlan::Theory(schedule)
        }
        Mode::Practical => ParamPlan::Practical(PracticalPlan {
            eps_v: config.eps_v,
            eps_first: config.eps_first,
            eps_base: config.eps_base,
            t_subs: config.t_subs,
            eps_auc: config.eps_auc,
            tau: if config.tau == 0 {
                tau_default
            } else {
                config.tau
            },
            delta_tilde: config.delta_tilde,
        }),
        Mode::NoiseOff => ParamPlan::NoiseOff,
    };
    Ok(ProtocolConfig {
        p: size,
        d: config.rff_dim,
        gamma: config.gamma,
        seed: cell_seed,
        bid_form: config.bid_form,
        plan,
        seed_set: SeedSetSpec::Provided(seed_set),
        events_per_iter: config.events_per_iter,
        eta: if config.eta > 0.0 {
            Some(config.eta)
        } else {
            None
        },
    })
}

fn clamp_mmd(v: f64) -> f64 {
    if v < 0.0 && v > -1e-9 {
        0.0
    } else {
        v
    }
}

fn trace_csv(trace: &SummaryTrace) -> String {
    let mut out = String::from(
        "epoch,winner_owner,winner_point,winner_bid,exact_gain,gain_regret,mmd_sq,\
         accessed_total,owner_eps,owner_events,validation_eps,validation_events,requested,bids\n",
    );
    for e in &trace.epochs {
        let requested = e
            .requested
            .iter()
            .map(|o| o.to_string())
            .collect::<Vec<_>>()
            .join("|");
        let bids = e
            .bids
            .iter()
            .map(|b| format!("{}:{}:{}", b.owner_id, b.point_id, b.value))
            .collect::<Vec<_>>()
            .join("|");
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            e.ell,
            e.winner_owner,
            e.winner_point,
            e.winner_bid,
            e.exact_gain,
            e.gain_regret,
            clamp_mmd(e.mmd_sq_collected),
            e.accessed_total,
            e.owner_channel.eps_total,
            e.owner_channel.events,
            e.validation_channel.eps_total,
            e.validation_channel.events,
            requested,
            bids
        );
    }
    out
}

/// Run the whole experiment described by `config`: for every summary size
/// and replicate, run each enabled algorithm on an identical instance and
/// append one metrics row. Failures of a single sub-run are recorded and the
/// sweep continues.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let out_dir = Path::new(&config.out_dir);
    fs::create_dir_all(out_dir)?;

    let csv = match config.source {
        DataSource::Csv => Some(CsvData {
            train: data::load_csv(&config.csv_path, config.csv_has_header)?,
            validation: data::load_csv(&config.validation_csv_path, config.csv_has_header)?,
        }),
        DataSource::Synthetic => None,
    };

    let kp = KernelParams::new(config.gamma)?;
    let mut rows: Vec<MetricsRow> = Vec::new();
    let mut failures: Vec<String> = Vec::new();
    let mut files: Vec<PathBuf> = Vec::new();

    for (size_idx, &size) in config.sizes.iter().enumerate() {
        for rep in 0..config.repetitions {
            let cell_seed = derive_seed(
                derive_seed(config.master_seed, 0xCE11_0000 + size_idx as u64),
                rep as u64,
            );
            let instance = match build_instance(config, csv.as_ref(), cell_seed) {
                Ok(i) => i,
                Err(e) => {
                    failures.push(format!("cell size={size} rep={rep}: {e}"));
                    continue;
                }
            };

            // Canonical order: greedy runs first so the comparison column is
            // available to the other rows regardless of config order.
            let enabled = [Algorithm::Greedy, Algorithm::Private, Algorithm::Uniform]
                .into_iter()
                .filter(|a| config.algs.contains(a));
            let mut greedy_mmd: Option<f64> = None;
            for alg in enabled {
                match alg {
                    Algorithm::Greedy => {
                        match baselines::greedy_nonprivate(
                            &instance.owners,
                            &instance.validation,
                            size,
                            &kp,
                            &instance.seed_set,
                        )
                        .and_then(|run| {
                            mmd_sq(&instance.validation, &run.summary, &kp)
                        }) {
                            Ok(m) => {
                                let m = clamp_mmd(m);
                                greedy_mmd = Some(m);
                                rows.push(MetricsRow {
                                    alg: Algorithm::Greedy.label(),
                                    size,
                                    seed: rep,
                                    mmd_sq: Some(m),
                                    pct_vs_greedy: Some(0.0),
                                    accessed: Some(instance.total_points as u64),
                                    eps: Some(f64::INFINITY),
                                    delta: Some(0.0),
                                });
                            }
                            Err(e) => {
                                failures.push(format!("greedy size={size} rep={rep}: {e}"));
                                rows.push(MetricsRow {
                                    alg: Algorithm::Greedy.label(),
                                    size,
                                    seed: rep,
                                    mmd_sq: None,
                                    pct_vs_greedy: None,
                                    accessed: None,
                                    eps: None,
                                    delta: None,
                                });
                            }
                        }
                    }
                    Algorithm::Private => {
                        let pconfig = match protocol_config(
                            config,
                            size,
                            cell_seed,
                            instance.owners.len(),
                            instance.seed_set.clone(),
                        ) {
                            Ok(c) => c,
                            Err(e) => {
                                failures.push(format!("private size={size} rep={rep}: {e}"));
                                continue;
                            }
                        };
                        match protocol::run_protocol(
                            &instance.owners,
                            &instance.validation,
                            &pconfig,
                        ) {
                            Ok((summary, trace)) => {
                                let m = clamp_mmd(mmd_sq(
                                    &instance.validation,
                                    &summary,
                                    &kp,
                                )?);
                                let delta_tilde = config.delta_tilde;
                                let owner_comp =
                                    trace.owner_ledger.compose(delta_tilde)?;
                                let validation_comp =
                                    trace.validation_ledger.compose(delta_tilde)?;
                                let pct = greedy_mmd.and_then(|g| {
                                    (g.abs() > f64::MIN_POSITIVE)
                                        .then(|| 100.0 * (m - g) / g)
                                });
                                rows.push(MetricsRow {
                                    alg: Algorithm::Private.label(),
                                    size,
                                    seed: rep,
                                    mmd_sq: Some(m),
                                    pct_vs_greedy: pct,
                                    accessed: Some(trace.accessed_total),
                                    eps: Some(owner_comp.eps_total),
                                    delta: Some(owner_comp.delta_total),
                                });

                                let expected_access_bound = match &pconfig.plan {
                                    ParamPlan::Theory(s) => Some(
                                        size as f64
                                            * (instance.owners.len() as f64 / s.tau as f64
                                                + 1.0 / s.eps_auc),
                                    ),
                                    ParamPlan::Practical(p) => Some(
                                        size as f64
                                            * (instance.owners.len() as f64 / p.tau as f64
                                                + 1.0 / p.eps_auc),
                                    ),
                                    ParamPlan::NoiseOff => None,
                                };
                                let meta = RunMeta {
                                    size,
                                    replicate: rep,
                                    cell_seed,
                                    protocol: &pconfig,
                                    basis: trace.basis,
                                    status: trace.status,
                                    accessed_total: trace.accessed_total,
                                    expected_access_bound,
                                    parsimony_factor: trace.parsimony_factor,
                                    owner_channel: owner_comp.into(),
                                    validation_channel: validation_comp.into(),
                                    verification_failures: &trace.verification_failures,
                                };
                                let stem = format!("run_p{size}_r{rep}");
                                let meta_path = out_dir.join(format!("{stem}.meta.json"));
                                fs::write(
                                    &meta_path,
                                    serde_json::to_string_pretty(&meta)
                                        .map_err(|e| Error::Config(e.to_string()))?,
                                )?;
                                files.push(meta_path);
                                if config.write_traces {
                                    let trace_path =
                                        out_dir.join(format!("{stem}.trace.csv"));
                                    fs::write(&trace_path, trace_csv(&trace))?;
                                    files.push(trace_path);
                                }
                                if config.dump_ledgers {
                                    #[derive(Serialize)]
                                    struct Channel<'a> {
                                        composed: LedgerTotals,
                                        events: &'a crate::privacy::PrivacyLedger,
                                    }
                                    #[derive(Serialize)]
                                    struct Ledgers<'a> {
                                        owner: Channel<'a>,
                                        validation: Channel<'a>,
                                    }
                                    let ledger_path =
                                        out_dir.join(format!("{stem}.ledgers.json"));
                                    fs::write(
                                        &ledger_path,
                                        serde_json::to_string(&Ledgers {
                                            owner: Channel {
                                                composed: trace
                                                    .owner_ledger
                                                    .compose(delta_tilde)?
                                                    .into(),
                                                events: &trace.owner_ledger,
                                            },
                                            validation: Channel {
                                                composed: trace
                                                    .validation_ledger
                                                    .compose(delta_tilde)?
                                                    .into(),
                                                events: &trace.validation_ledger,
                                            },
                                        })
                                        .map_err(|e| Error::Config(e.to_string()))?,
                                    )?;
                                    files.push(ledger_path);
                                }
                            }
                            Err(e) => {
                                failures.push(format!("private size={size} rep={rep}: {e}"));
                                rows.push(MetricsRow {
                                    alg: Algorithm::Private.label(),
                                    size,
                                    seed: rep,
                                    mmd_sq: None,
                                    pct_vs_greedy: None,
                                    accessed: None,
                                    eps: None,
                                    delta: None,
                                });
                            }
                        }
                    }
                    Algorithm::Uniform => {
                        match baselines::uniform_sampling(
                            &instance.owners,
                            size,
                            derive_seed(cell_seed, stream::UNIFORM_BASELINE),
                        )
                        .and_then(|(summary, _)| {
                            mmd_sq(&instance.validation, &summary, &kp)
                        }) {
                            Ok(m) => {
                                let m = clamp_mmd(m);
                                let pct = greedy_mmd.and_then(|g| {
                                    (g.abs() > f64::MIN_POSITIVE)
                                        .then(|| 100.0 * (m - g) / g)
                                });
                                rows.push(MetricsRow {
                                    alg: Algorithm::Uniform.label(),
                                    size,
                                    seed: rep,
                                    mmd_sq: Some(m),
                                    pct_vs_greedy: pct,
                                    accessed: Some(size as u64),
                                    eps: Some(f64::INFINITY),
                                    delta: Some(0.0),
                                });
                            }
                            Err(e) => {
                                failures.push(format!("uniform size={size} rep={rep}: {e}"));
                                rows.push(MetricsRow {
                                    alg: Algorithm::Uniform.label(),
                                    size,
                                    seed: rep,
                                    mmd_sq: None,
                                    pct_vs_greedy: None,
                                    accessed: None,
                                    eps: None,
                                    delta: None,
                                });
                            }
                        }
                    }
                }
            }
        }
    }

    let mut csv_text = String::from(METRICS_HEADER);
    csv_text.push('\n');
    for row in &rows {
        csv_text.push_str(&row.csv_line());
        csv_text.push('\n');
    }
    let metrics_path = out_dir.join("metrics.csv");
    fs::write(&metrics_path, csv_text)?;
    files.push(metrics_path);

    #[derive(Serialize)]
    struct ExperimentMeta<'a> {
        config: &'a ExperimentConfig,
        failures: &'a [String],
    }
    let exp_path = out_dir.join("experiment.json");
    fs::write(
        &exp_path,
        serde_json::to_string_pretty(&ExperimentMeta {
            config,
            failures: &failures,
        })
        .map_err(|e| Error::Config(e.to_string()))?,
    )?;
    files.push(exp_path);

    Ok(ExperimentReport {
        rows,
        failures,
        files,
    })
}

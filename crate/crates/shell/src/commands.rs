//! The subcommands, callable in-process.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use vesicle_core::dynamics::{presets, run as integrate, Observer, RecordingObserver};
use vesicle_core::ledger::{ensemble_moments, mean_and_half_width, merge_records, MomentReport};
use vesicle_core::noise::{sobolev_sums, trace_diagnostics};
use vesicle_core::veriflab::{self, CheckKind, RatioReport, SweepConfig};
use vesicle_core::{BalanceRecord, Domain, DomainSpec, Error, NoisePath, SystemState};

use crate::config::{write_manifest, Resolved, RunConfig};
use crate::csv::{fmt, ledger_row, write_row, LEDGER_HEADER};
use crate::error::{io, Result, ShellError};
use crate::snapshot;

/// Runs `f` on a pool of `threads` workers, or on rayon's default pool
/// (sized by `RAYON_NUM_THREADS` or the machine) when `None`.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(t) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(t)
                .build()
                .map_err(|e| ShellError::Config(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(io(dir))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io(path))?))
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub final_state: SystemState,
    pub ledger_rows: usize,
    pub snapshots: Vec<PathBuf>,
}

/// Streams ledger rows and snapshots as the run advances.
struct RunSink {
    ledger: BufWriter<File>,
    every: u64,
    snapshot_every: u64,
    snap_dir: PathBuf,
    last_step: u64,
    window: Vec<BalanceRecord>,
    rows: usize,
    snapshots: Vec<PathBuf>,
    failure: Option<ShellError>,
}

impl RunSink {
    fn snapshot(&mut self, state: &SystemState) -> Result<()> {
        let path = self.snap_dir.join(format!("step_{:010}.vsfl", state.step));
        snapshot::write(&path, state)?;
        self.snapshots.push(path);
        Ok(())
    }

    fn handle(&mut self, state: &SystemState, record: &BalanceRecord) -> Result<()> {
        self.window.push(*record);
        let done = state.step == self.last_step;
        if self.window.len() as u64 == self.every || done {
            let merged = merge_records(&self.window)?;
            writeln!(self.ledger, "{}", ledger_row(&merged)).map_err(io("ledger.csv"))?;
            self.window.clear();
            self.rows += 1;
        }
        if self.snapshot_every > 0 && state.step.is_multiple_of(self.snapshot_every) {
            self.snapshot(state)?;
        }
        Ok(())
    }
}

impl Observer for RunSink {
    fn observe(&mut self, state: &SystemState, record: &BalanceRecord) -> vesicle_core::Result<()> {
        self.handle(state, record).map_err(|e| {
            let msg = e.to_string();
            self.failure = Some(e);
            Error::InvalidParameter(format!("output: {msg}"))
        })
    }
}

/// One trajectory with ledger, snapshots and manifest under `out`.
///
/// On blow-up the ledger so far is kept and the last finite state is written
/// to `blowup.vsfl` before the error is returned.
pub fn run(resolved: &Resolved, out: &Path) -> Result<RunOutcome> {
    let snap_dir = out.join("snapshots");
    create_dir(&snap_dir)?;
    write_manifest(resolved, out, "run")?;
    let mut ledger = create(&out.join("ledger.csv"))?;
    writeln!(ledger, "{LEDGER_HEADER}").map_err(io(out.join("ledger.csv")))?;

    let initial = resolved
        .initial
        .clone()
        .masked(&resolved.model.mask(resolved.stepper.galerkin_n));
    let mut sink = RunSink {
        ledger,
        every: resolved.config.output.ledger_every,
        snapshot_every: resolved.config.output.snapshot_every,
        snap_dir,
        last_step: initial.step + resolved.stepper.steps(),
        window: Vec::new(),
        rows: 0,
        snapshots: Vec::new(),
        failure: None,
    };
    sink.snapshot(&initial)?;
    let path = NoisePath::new(resolved.noise, resolved.stepper.dt);
    let result = integrate(&resolved.model, &initial, &resolved.stepper, &path, &mut sink);
    sink.ledger.flush().map_err(io(out.join("ledger.csv")))?;
    if let Some(e) = sink.failure.take() {
        return Err(e);
    }
    let final_state = match result {
        Ok(s) => s,
        Err(Error::BlowUp {
            t,
            reason,
            last_finite,
        }) => {
            snapshot::write(&out.join("blowup.vsfl"), &last_finite)?;
            return Err(Error::BlowUp {
                t,
                reason,
                last_finite,
            }
            .into());
        }
        Err(e) => return Err(e.into()),
    };
    snapshot::write(&out.join("final.vsfl"), &final_state)?;
    Ok(RunOutcome {
        final_state,
        ledger_rows: sink.rows,
        snapshots: sink.snapshots,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct EnsembleSummary {
    pub trajectories: usize,
    pub moment: u32,
    pub sup_mean_fk: f64,
    pub mean_sup_fk: f64,
    pub half_width_sup_fk: f64,
    pub dissipation_integral: f64,
    pub half_width_dissipation: f64,
    pub martingale_mean: f64,
    pub half_width_martingale: f64,
    pub mean_abs_residual_rate: f64,
}

#[derive(Clone, Debug)]
pub struct EnsembleOutcome {
    pub report: MomentReport,
    pub summary: EnsembleSummary,
    pub records: Vec<Vec<BalanceRecord>>,
}

/// Trajectories on streams `stream_id + r` for `r < trajectories`, each run
/// independently; every reduction runs in trajectory order, so the result
/// does not depend on the thread count.
pub fn ensemble_records(resolved: &Resolved, trajectories: usize) -> Result<Vec<Vec<BalanceRecord>>> {
    (0..trajectories)
        .into_par_iter()
        .map(|r| {
            let spec = resolved.noise.with_stream(resolved.noise.stream_id + r as u64);
            let path = NoisePath::new(spec, resolved.stepper.dt);
            let mut rec = RecordingObserver::default();
            integrate(&resolved.model, &resolved.initial, &resolved.stepper, &path, &mut rec)
                .map(|_| rec.records)
                .map_err(|e| match e {
                    Error::BlowUp {
                        t,
                        reason,
                        last_finite,
                    } => Error::BlowUp {
                        t,
                        reason: format!("trajectory {r}: {reason}"),
                        last_finite,
                    },
                    other => other,
                })
        })
        .collect::<vesicle_core::Result<Vec<_>>>()
        .map_err(Into::into)
}

pub fn ensemble(resolved: &Resolved, trajectories: usize, out: Option<&Path>) -> Result<EnsembleOutcome> {
    if trajectories < 2 {
        return Err(ShellError::Config("an ensemble needs at least 2 trajectories".into()));
    }
    let k = resolved.config.ensemble.moment;
    let records = ensemble_records(resolved, trajectories)?;
    let report = ensemble_moments(&records, k)?;
    let rates: Vec<f64> = records
        .iter()
        .map(|rec| {
            let total: f64 = rec.iter().map(|r| r.residual.abs()).sum();
            total / rec.iter().map(|r| r.dt).sum::<f64>()
        })
        .collect();
    let summary = EnsembleSummary {
        trajectories,
        moment: k,
        sup_mean_fk: report.sup_mean_fk,
        mean_sup_fk: report.mean_sup_fk,
        half_width_sup_fk: report.half_width_sup_fk,
        dissipation_integral: report.dissipation_integral,
        half_width_dissipation: report.half_width_dissipation,
        martingale_mean: report.martingale_mean,
        half_width_martingale: report.half_width_martingale,
        mean_abs_residual_rate: mean_and_half_width(&rates).0,
    };
    if let Some(out) = out {
        create_dir(out)?;
        let mut cfg = resolved.config.clone();
        cfg.ensemble.trajectories = trajectories;
        let resolved = Resolved {
            config: cfg,
            ..resolved.clone()
        };
        write_manifest(&resolved, out, "ensemble")?;
        write_moments(out, &report, &records)?;
        let path = out.join("summary.toml");
        let text = toml::to_string(&summary).map_err(|e| ShellError::Config(e.to_string()))?;
        fs::write(&path, text).map_err(io(path))?;
    }
    Ok(EnsembleOutcome {
        report,
        summary,
        records,
    })
}

fn write_moments(out: &Path, report: &MomentReport, records: &[Vec<BalanceRecord>]) -> Result<()> {
    let path = out.join("moments.csv");
    let mut w = create(&path)?;
    let fail = io(&path);
    let mut body = || -> std::io::Result<()> {
        writeln!(
            w,
            "t,mean_F{k},half_width_F{k},mean_cum_martingale,half_width_cum_martingale,mean_cum_residual,half_width_cum_residual",
            k = report.k
        )?;
        let mut mart = vec![0.0; records.len()];
        let mut resid = vec![0.0; records.len()];
        for (ti, &t) in report.times.iter().enumerate() {
            if ti > 0 {
                for (r, rec) in records.iter().enumerate() {
                    mart[r] += rec[ti - 1].martingale_increment;
                    resid[r] += rec[ti - 1].residual;
                }
            }
            let (mm, mh) = mean_and_half_width(&mart);
            let (rm, rh) = mean_and_half_width(&resid);
            write_row(
                &mut w,
                &[t, report.mean_fk[ti], report.half_width_fk[ti], mm, mh, rm, rh],
            )?;
        }
        w.flush()
    };
    body().map_err(fail)
}

/// Runs every verification suite; writes `verify.csv` and `verify.txt` when
/// `out` is given. Failing reports are returned, not raised.
pub fn verify(cfg: &SweepConfig, out: Option<&Path>) -> Result<Vec<RatioReport>> {
    cfg.validate()?;
    let reports = veriflab::run_all(cfg)?;
    if let Some(out) = out {
        create_dir(out)?;
        let path = out.join("verify.csv");
        let mut w = create(&path)?;
        let mut body = || -> std::io::Result<()> {
            writeln!(w, "id,kind,empirical_max_ratio,q50,q90,q99,pass")?;
            for r in &reports {
                let kind = match r.kind {
                    CheckKind::Identity => "identity",
                    CheckKind::Ratio => "ratio",
                };
                writeln!(
                    w,
                    "{},{kind},{},{},{},{},{}",
                    r.id,
                    fmt(r.empirical_max_ratio),
                    fmt(r.quantiles[0]),
                    fmt(r.quantiles[1]),
                    fmt(r.quantiles[2]),
                    r.pass
                )?;
            }
            w.flush()
        };
        body().map_err(io(&path))?;
        let text: String = reports.iter().map(|r| r.summary() + "\n").collect();
        let path = out.join("verify.txt");
        fs::write(&path, text).map_err(io(path))?;
    }
    Ok(reports)
}

#[derive(Clone, Debug)]
pub struct TwinReport {
    pub delta: f64,
    pub times: Vec<f64>,
    /// `‖w₁ − w₂‖_V + ‖φ₁ − φ₂‖_{H²}` at each sample time.
    pub distance: Vec<f64>,
    pub bitwise_equal: bool,
    pub growth: GrowthFit,
}

/// Least-squares fit `ln d(t) ≈ c₀ + c₁t + c₂t²` over the run.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthFit {
    pub rate: f64,
    pub curvature: f64,
    /// `c₂T²`: how far the log-distance departs from a line over `[0, T]`.
    pub curvature_excess: f64,
    /// Largest `ln(d(t)/d(0))/t`, the Gronwall rate the samples need.
    pub gronwall_rate: f64,
}

/// `d(t)` is accepted as Gronwall-like when its log departs from a line by
/// less than this over the horizon.
pub const CURVATURE_TOLERANCE: f64 = 1.0;

impl GrowthFit {
    pub fn at_most_linear(&self) -> bool {
        self.curvature_excess <= CURVATURE_TOLERANCE
    }
}

fn growth_fit(times: &[f64], distance: &[f64]) -> GrowthFit {
    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(distance)
        .filter(|(_, d)| **d > 0.0)
        .map(|(&t, &d)| (t - times[0], d.ln()))
        .collect();
    if pts.len() < 3 {
        return GrowthFit {
            rate: 0.0,
            curvature: 0.0,
            curvature_excess: 0.0,
            gronwall_rate: 0.0,
        };
    }
    // normal equations for the quadratic, in the scaled variable s = t/T
    let horizon = pts.last().unwrap().0;
    let mut a = [[0.0; 3]; 3];
    let mut b = [0.0; 3];
    for &(t, y) in &pts {
        let s = t / horizon;
        let basis = [1.0, s, s * s];
        for i in 0..3 {
            b[i] += basis[i] * y;
            for j in 0..3 {
                a[i][j] += basis[i] * basis[j];
            }
        }
    }
    let c = solve3(a, b);
    let y0 = pts[0].1;
    let gronwall_rate = pts[1..]
        .iter()
        .map(|&(t, y)| (y - y0) / t)
        .fold(f64::NEG_INFINITY, f64::max);
    GrowthFit {
        rate: c[1] / horizon,
        curvature: c[2] / (horizon * horizon),
        curvature_excess: c[2],
        gronwall_rate,
    }
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..3 {
            let f = a[row][col] / a[col][col];
            for k in col..3 {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let s: f64 = (row + 1..3).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn twin_distance(resolved: &Resolved, a: &SystemState, b: &SystemState) -> f64 {
    let m = &resolved.model;
    let lam = m.domain.eigenvalues();
    let (wa, wb) = (a.w(m), b.w(m));
    let v: f64 = wa
        .iter()
        .zip(&wb)
        .zip(lam)
        .map(|((x, y), l)| (1.0 + l) * (x - y).powi(2))
        .sum();
    let p: f64 = a
        .phi
        .iter()
        .zip(&b.phi)
        .zip(lam)
        .map(|((x, y), l)| (1.0 + l).powi(2) * (x - y).powi(2))
        .sum();
    v.sqrt() + p.sqrt()
}

/// Initial state displaced by exactly `delta` in `‖w‖_V + ‖φ‖_{H²}`, along
/// a fixed smooth direction.
pub fn perturbed(resolved: &Resolved, delta: f64) -> SystemState {
    let m = &resolved.model;
    let mask = m.mask(resolved.stepper.galerkin_n);
    let base = resolved.initial.clone().masked(&mask);
    if delta == 0.0 {
        return base;
    }
    let dir = presets::random(&m.domain, 0x7_1a5e, 1.0, 2.0).masked(&mask);
    let zero = SystemState {
        v: vec![0.0; dir.v.len()],
        phi: vec![0.0; dir.phi.len()],
        ..dir.clone()
    };
    let scale = delta / twin_distance(resolved, &dir, &zero);
    SystemState {
        v: base.v.iter().zip(&dir.v).map(|(x, d)| x + scale * d).collect(),
        phi: base.phi.iter().zip(&dir.phi).map(|(x, d)| x + scale * d).collect(),
        ..base
    }
}

/// Two trajectories on one noise path from initial data `delta` apart,
/// sampled every `every` steps.
pub fn twin(resolved: &Resolved, delta: f64, every: u64, out: Option<&Path>) -> Result<TwinReport> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(ShellError::Config("delta must be >= 0".into()));
    }
    if every == 0 {
        return Err(ShellError::Config("sampling cadence must be >= 1".into()));
    }
    let path = NoisePath::new(resolved.noise, resolved.stepper.dt);
    let trajectory = |start: SystemState| -> Result<Vec<SystemState>> {
        let mut states = vec![start.clone()];
        let mut obs = |s: &SystemState, _: &BalanceRecord| -> vesicle_core::Result<()> {
            if s.step.is_multiple_of(every) {
                states.push(s.clone());
            }
            Ok(())
        };
        integrate(&resolved.model, &start, &resolved.stepper, &path, &mut obs)?;
        Ok(states)
    };
    let a = trajectory(perturbed(resolved, 0.0))?;
    let b = trajectory(perturbed(resolved, delta))?;
    let bitwise_equal = a == b;
    let times: Vec<f64> = a.iter().map(|s| s.t).collect();
    let distance: Vec<f64> = a.iter().zip(&b).map(|(x, y)| twin_distance(resolved, x, y)).collect();
    let growth = growth_fit(&times, &distance);
    if let Some(out) = out {
        create_dir(out)?;
        write_manifest(resolved, out, &format!("twin --delta {delta:e}"))?;
        let p = out.join("twin.csv");
        let mut w = create(&p)?;
        let mut body = || -> std::io::Result<()> {
            writeln!(w, "t,distance")?;
            for (t, d) in times.iter().zip(&distance) {
                write_row(&mut w, &[*t, *d])?;
            }
            w.flush()
        };
        body().map_err(io(&p))?;
    }
    Ok(TwinReport {
        delta,
        times,
        distance,
        bitwise_equal,
        growth,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpectrumRow {
    pub index: usize,
    pub j: usize,
    pub k: usize,
    pub lambda: f64,
    pub sigma_a: f64,
    pub sigma_b: f64,
    /// Running `Σ (σ^A)²/(1 + α²λ)`.
    pub tr_a_weighted: f64,
    /// Running `Σ (σ^B)²`.
    pub tr_b: f64,
    /// Running `Σ (σ^B)²λ²`.
    pub tr_b_delta2: f64,
}

/// Eigenvalue and trace table over the first `limit` modes in eigenvalue
/// order. Does not require the trace hypothesis to hold.
pub fn spectrum(cfg: &RunConfig, limit: Option<usize>) -> Result<Vec<SpectrumRow>> {
    let n = cfg.domain.modes;
    let domain = Domain::new(DomainSpec {
        modes_per_axis: n,
        collocation_per_axis: cfg.domain.collocation.unwrap_or(8 * n),
    })?;
    let spec = cfg.noise.spec();
    let count = limit.unwrap_or(n * n).min(n * n);
    let mut rows = Vec::with_capacity(count);
    let mut acc = [0.0; 3];
    for (i, m) in domain.modes()[..count].iter().enumerate() {
        let (sa, sb) = (spec.sigma_a(m.eigenvalue), spec.sigma_b(m.eigenvalue));
        acc[0] += sa * sa / cfg.alpha.helmholtz_symbol(m.eigenvalue);
        acc[1] += sb * sb;
        acc[2] += sb * sb * m.eigenvalue * m.eigenvalue;
        rows.push(SpectrumRow {
            index: i,
            j: m.j,
            k: m.k,
            lambda: m.eigenvalue,
            sigma_a: sa,
            sigma_b: sb,
            tr_a_weighted: acc[0],
            tr_b: acc[1],
            tr_b_delta2: acc[2],
        });
    }
    // the running sums and the library's traces must agree
    let d = trace_diagnostics(&spec, &domain, count, cfg.alpha.alpha)?;
    debug_assert!((d.tr_b_delta2 - acc[2]).abs() <= 1e-9 * acc[2].abs().max(1.0));
    Ok(rows)
}

pub fn spectrum_text(cfg: &RunConfig, rows: &[SpectrumRow]) -> Result<String> {
    let mut s = format!(
        "{:>6} {:>4} {:>4} {:>8} {:>12} {:>12} {:>14} {:>14} {:>14}\n",
        "index", "j", "k", "lambda", "sigma_A", "sigma_B", "sum_A/(1+a2l)", "sum_B^2", "sum_B^2 l^2"
    );
    for r in rows {
        s.push_str(&format!(
            "{:>6} {:>4} {:>4} {:>8} {:>12.4e} {:>12.4e} {:>14.6e} {:>14.6e} {:>14.6e}\n",
            r.index, r.j, r.k, r.lambda, r.sigma_a, r.sigma_b, r.tr_a_weighted, r.tr_b, r.tr_b_delta2
        ));
    }
    let n = cfg.domain.modes;
    let domain = Domain::new(DomainSpec {
        modes_per_axis: n,
        collocation_per_axis: cfg.domain.collocation.unwrap_or(8 * n),
    })?;
    let sums = sobolev_sums(&cfg.noise.spec(), &domain, rows.len())?;
    let spec = cfg.noise.spec();
    s.push_str(&format!(
        "trace hypothesis (p_A > 1/2, p_B > 3/2): {}\n",
        if spec.hypothesis_holds() { "holds" } else { "fails" }
    ));
    s.push_str(&format!(
        "phase-noise images: sum |.|_inf^2 = {:.6e}, sum |.|_W22^2 = {:.6e}, sum |grad .|_3^2 = {:.6e}\n",
        sums.sum_inf, sums.sum_w22, sums.sum_grad3
    ));
    Ok(s)
}

use std::io::Write;
use std::path::PathBuf;

use baker_core::classical::{
    evolve_density, periodic_orbits, Alignment, ClassicalDensity, PhasePoint, SloppyParams,
};
use baker_core::io::{self, GridMetadata};
use baker_core::phasespace::{husimi, lattice_window, return_probability, return_probability_points, CoherentFrame};
use baker_core::quantum::{
    apply_channel, measurement_channel, shift_channel, sloppy_channel, von_neumann_entropy, KrausChannel,
    QuantumState, ShiftMode,
};
use baker_core::spectral::{self, SpectralOptions};
use baker_core::{Error, Result};
use serde::Serialize;

use crate::output::OutputDir;
use crate::{
    ChannelArgs, ChannelKind, ClassicalEvolveArgs, Cli, Command, EntropyArgs, Format, HusimiArgs, InvariantArgs,
    OrbitsArgs, QuantumEvolveArgs, ReturnProbArgs, SpectrumArgs,
};

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    let mut out = OutputDir::create(&cli.common.out)?;
    let ctx = Context {
        format: cli.common.format,
        plot: cli.common.plot,
    };
    match &cli.command {
        Command::ClassicalEvolve(a) => classical_evolve(a, &ctx, &mut out)?,
        Command::QuantumEvolve(a) => quantum_evolve(a, &ctx, &mut out)?,
        Command::Husimi(a) => husimi_cmd(a, &ctx, &mut out)?,
        Command::Orbits(a) => orbits(a, &ctx, &mut out)?,
        Command::ReturnProb(a) => return_prob(a, &ctx, &mut out)?,
        Command::Spectrum(a) => spectrum(a, &ctx, &mut out)?,
        Command::Invariant(a) => invariant(a, &mut out)?,
        Command::Entropy(a) => entropy(a, &ctx, &mut out)?,
    }
    out.finish(cli)
}

struct Context {
    format: Format,
    plot: bool,
}

fn shift_mode(fractional: bool) -> ShiftMode {
    if fractional {
        ShiftMode::Fractional
    } else {
        ShiftMode::Strict
    }
}

fn build_channel(a: &ChannelArgs) -> Result<KrausChannel> {
    let mode = shift_mode(a.fractional);
    match a.channel {
        ChannelKind::Sloppy => sloppy_channel(a.n, a.delta, mode),
        ChannelKind::Shift => shift_channel(a.n, a.delta, mode),
        ChannelKind::Measurement => measurement_channel(a.n),
    }
}

/// Sorted, deduplicated snapshot times.
fn snapshot_times(steps: &[usize]) -> Vec<usize> {
    let mut t = steps.to_vec();
    t.sort_unstable();
    t.dedup();
    t
}

fn write_grid(
    out: &mut OutputDir,
    ctx: &Context,
    stem: &str,
    grid: &baker_core::phasespace::HusimiGrid,
    meta: GridMetadata,
) -> Result<()> {
    let csv_name = format!("{stem}.csv");
    out.write(&csv_name, |w| io::write_grid_csv(w, grid))?;
    out.write(&format!("{stem}.json"), |w| io::write_grid_metadata(w, &meta))?;
    if ctx.plot {
        let title = format!("{} N={} delta={} T={}", meta.kind, meta.n, meta.delta, meta.t);
        let script = io::heatmap_script(&csv_name, &title);
        out.write(&format!("{stem}.py"), |w| Ok(w.write_all(script.as_bytes())?))?;
    }
    Ok(())
}

fn classical_evolve(a: &ClassicalEvolveArgs, ctx: &Context, out: &mut OutputDir) -> Result<()> {
    let params = SloppyParams::new(a.delta)?;
    let alignment = if a.fractional { Alignment::Fractional } else { Alignment::Strict };
    let start = ClassicalDensity::gaussian(a.m, PhasePoint::new(a.q0, a.p0)?, a.n)?;
    let times = snapshot_times(&a.steps);
    let last = times.last().copied().unwrap_or(0);
    let history = evolve_density(&start, params, last, alignment)?;
    for &t in &times {
        let f = &history[t];
        match ctx.format {
            Format::Csv => out.write(&format!("density_T{t}.csv"), |w| io::write_density_csv(w, f, a.delta))?,
            Format::Json => out.write(&format!("density_T{t}.json"), |w| io::write_density_json(w, f, a.delta))?,
        }
    }
    Ok(())
}

fn quantum_evolve(a: &QuantumEvolveArgs, ctx: &Context, out: &mut OutputDir) -> Result<()> {
    let ch = build_channel(&a.channel)?;
    let frame = CoherentFrame::new(a.channel.n)?;
    let mut rho = QuantumState::pure(&frame.state_at(a.q0, a.p0)?)?;
    let mut now = 0;
    for t in snapshot_times(&a.steps) {
        while now < t {
            rho = apply_channel(&ch, &rho)?;
            now += 1;
        }
        let grid = husimi(&rho, &frame)?;
        let meta = GridMetadata {
            n: a.channel.n,
            delta: a.channel.delta,
            t,
            kind: "husimi".into(),
        };
        write_grid(out, ctx, &format!("husimi_T{t}"), &grid, meta)?;
    }
    Ok(())
}

fn husimi_cmd(a: &HusimiArgs, ctx: &Context, out: &mut OutputDir) -> Result<()> {
    let frame = CoherentFrame::new(a.n)?;
    let rho = match &a.state {
        Some(path) => {
            let m = io::read_matrix_json(std::io::BufReader::new(std::fs::File::open(path)?))?;
            if m.nrows() != a.n {
                return Err(Error::DimensionMismatch {
                    expected: a.n,
                    found: m.nrows(),
                });
            }
            QuantumState::new(m)?
        }
        None => QuantumState::pure(&frame.state_at(a.q0, a.p0)?)?,
    };
    let grid = husimi(&rho, &frame)?;
    let meta = GridMetadata {
        n: a.n,
        delta: 0.0,
        t: 0,
        kind: "husimi".into(),
    };
    write_grid(out, ctx, "husimi", &grid, meta)
}

fn orbits(a: &OrbitsArgs, ctx: &Context, out: &mut OutputDir) -> Result<()> {
    let list = periodic_orbits(a.t, SloppyParams::new(a.delta)?)?;
    match ctx.format {
        Format::Json => out.write(&format!("orbits_T{}.json", a.t), |w| io::write_orbits_json(w, &list)),
        Format::Csv => out.write(&format!("orbits_T{}.csv", a.t), |w| {
            writeln!(w, "T,n,index,q,p")?;
            for orbit in &list {
                for (k, x) in orbit.points.iter().enumerate() {
                    writeln!(w, "{},{},{},{},{}", orbit.period, orbit.n, k, io::num(x.q), io::num(x.p))?;
                }
            }
            Ok(())
        }),
    }
}

/// Parse `a0:a1,b0:b1`.
fn parse_window(s: &str) -> Result<((usize, usize), (usize, usize))> {
    let bad = || Error::Parse(format!("window must look like a0:a1,b0:b1, got {s:?}"));
    let range = |part: &str| -> Result<(usize, usize)> {
        let (lo, hi) = part.split_once(':').ok_or_else(bad)?;
        let lo = lo.trim().parse().map_err(|_| bad())?;
        let hi = hi.trim().parse().map_err(|_| bad())?;
        if lo >= hi {
            return Err(bad());
        }
        Ok((lo, hi))
    };
    let (q, p) = s.split_once(',').ok_or_else(bad)?;
    Ok((range(q)?, range(p)?))
}

fn return_prob(a: &ReturnProbArgs, ctx: &Context, out: &mut OutputDir) -> Result<()> {
    let n = a.channel.n;
    let ch = build_channel(&a.channel)?;
    let frame = CoherentFrame::new(n)?;
    if a.stride == 0 {
        return Err(Error::OutOfRange {
            name: "stride",
            value: 0.0,
            reason: "stride must be at least 1",
        });
    }
    if a.stride == 1 && a.window.is_none() {
        let grid = return_probability(&ch, &frame, a.t)?;
        let meta = GridMetadata {
            n,
            delta: a.channel.delta,
            t: a.t,
            kind: "return-probability".into(),
        };
        return write_grid(out, ctx, &format!("return_T{}", a.t), &grid, meta);
    }
    let (qr, pr) = match &a.window {
        Some(w) => parse_window(w)?,
        None => ((0, n), (0, n)),
    };
    let points = lattice_window(n, a.stride, qr, pr);
    let values = return_probability_points(&ch, &frame, a.t, &points)?;
    let rows: Vec<(usize, usize, f64)> = points.iter().zip(values).map(|(&(q, p), v)| (q, p, v)).collect();
    out.write(&format!("return_T{}_points.csv", a.t), |w| io::write_points_csv(w, n, &rows))
}

fn spectrum(a: &SpectrumArgs, ctx: &Context, out: &mut OutputDir) -> Result<()> {
    let ch = build_channel(&a.channel)?;
    let opts = SpectralOptions {
        dense_bound: a.dense_bound,
        leading_count: a.k,
        ..SpectralOptions::default()
    };
    let report = spectral::channel_spectrum_with(&ch, &opts)?;
    if ctx.format == Format::Csv {
        out.write("spectrum.csv", |w| io::write_spectrum_csv(w, &report.eigenvalues))?;
    }
    out.write("spectrum.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &report)?;
        Ok(writeln!(w)?)
    })
}

#[derive(Serialize)]
struct InvariantSummary {
    #[serde(rename = "N")]
    n: usize,
    delta: f64,
    iterations: usize,
    residual: f64,
    entropy: f64,
    purity: f64,
}

fn invariant(a: &InvariantArgs, out: &mut OutputDir) -> Result<()> {
    let ch = build_channel(&a.channel)?;
    let inv = spectral::invariant_state(&ch, a.tol, a.max_iter)?;
    let summary = InvariantSummary {
        n: a.channel.n,
        delta: a.channel.delta,
        iterations: inv.iterations,
        residual: inv.residual,
        entropy: von_neumann_entropy(&inv.state)?,
        purity: inv.state.purity(),
    };
    out.write("invariant_state.json", |w| io::write_matrix_json(w, inv.state.matrix()))?;
    out.write("invariant.json", |w| {
        serde_json::to_writer_pretty(&mut *w, &summary)?;
        Ok(writeln!(w)?)
    })
}

fn entropy(a: &EntropyArgs, ctx: &Context, out: &mut OutputDir) -> Result<()> {
    let curve = spectral::entropy_curve_with(a.n, a.delta, shift_mode(a.fractional), a.tmax, a.samples, a.seed)?;
    match ctx.format {
        Format::Csv => out.write("entropy.csv", |w| io::write_entropy_csv(w, &curve)),
        Format::Json => out.write("entropy.json", |w| {
            serde_json::to_writer_pretty(&mut *w, &curve)?;
            Ok(writeln!(w)?)
        }),
    }
}

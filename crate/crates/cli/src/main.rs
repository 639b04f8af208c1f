use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use dendrite::calculus::PiecewiseLinearFn;
use dendrite::classify::{self, GeneratorSpec};
use dendrite::format;
use dendrite::measure::SpeedMeasure;
use dendrite::simulate::{self, Clock, Stop, WalkConfig};
use dendrite::{gen, potential, spectral, verify, EdgeId, Error, PointRef, TreeFile, TreeSpec};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

mod points;

use points::{parse_point, point_label};

#[derive(Parser)]
#[command(name = "dendrite", version, about = "Potential theory and Brownian motion on metric trees")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a tree file: a k-ary truncation, a random tree or the Y fixture.
    Gen {
        #[command(subcommand)]
        kind: GenKind,
    },
    /// Capacities, Green kernels, hitting laws and distances on a tree file.
    Compute {
        #[command(subcommand)]
        op: ComputeOp,
    },
    /// Principal eigenvalue with Dirichlet set B and its two-sided bounds.
    Spectrum(SpectrumArgs),
    /// Total-variation curve of the heat flow against the mixing bound.
    Mixing(MixingArgs),
    /// Recurrence verdict with its evidence.
    Classify(ClassifyArgs),
    /// Monte Carlo walks of the mesh chain.
    Simulate(SimulateArgs),
    /// Run the acceptance suite.
    Selftest {
        /// Run only this criterion (1 to 10).
        #[arg(long)]
        criterion: Option<usize>,
    },
}

#[derive(Args, Clone)]
struct Emit {
    /// Write the CSV here instead of stdout, with a `.manifest` sidecar.
    #[arg(long, value_name = "PATH")]
    emit: Option<PathBuf>,
}

#[derive(Subcommand)]
enum GenKind {
    /// Depth-n truncation of the k-ary tree with edge lengths first * c^m.
    Kary {
        #[arg(long)]
        k: usize,
        #[arg(long)]
        c: f64,
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 1.0)]
        first: f64,
        #[command(flatten)]
        out: Emit,
    },
    /// Random recursive tree with uniform lengths and random speed measure.
    Random {
        #[arg(long)]
        vertices: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 0.2)]
        min_len: f64,
        #[arg(long, default_value_t = 2.0)]
        max_len: f64,
        /// Probability of an atom at each vertex.
        #[arg(long, default_value_t = 0.0)]
        atoms: f64,
        /// Keep Lebesgue measure instead of random densities.
        #[arg(long)]
        lebesgue: bool,
        #[command(flatten)]
        out: Emit,
    },
    /// Root v0 with edges v0-v1 (1), v1-v2 (2), v1-v3 (3).
    Y {
        #[command(flatten)]
        out: Emit,
    },
}

#[derive(Args)]
struct FileArg {
    /// Tree file in the `rtree v1` format.
    #[arg(long)]
    file: PathBuf,
}

#[derive(Subcommand)]
enum ComputeOp {
    /// Capacity of the condenser (A, B): `cap,value`.
    Cap {
        #[command(flatten)]
        input: FileArg,
        #[arg(long = "a", required = true)]
        a: Vec<String>,
        #[arg(long = "b", required = true)]
        b: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[command(flatten)]
        out: Emit,
    },
    /// Green kernel with pole x killed on B: `vertex,value`, or `green,value` at --y.
    Green {
        #[command(flatten)]
        input: FileArg,
        #[arg(long)]
        x: String,
        #[arg(long = "b", required = true)]
        b: Vec<String>,
        #[arg(long)]
        y: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[command(flatten)]
        out: Emit,
    },
    /// Equilibrium potential, 0 on A and 1 on B: `vertex,value`.
    Harmonic {
        #[command(flatten)]
        input: FileArg,
        #[arg(long = "a", required = true)]
        a: Vec<String>,
        #[arg(long = "b", required = true)]
        b: Vec<String>,
        #[arg(long, default_value_t = 0.0)]
        alpha: f64,
        #[command(flatten)]
        out: Emit,
    },
    /// Probability from x of reaching a before b: `hit,value`.
    Hit {
        #[command(flatten)]
        input: FileArg,
        #[arg(long)]
        x: String,
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[command(flatten)]
        out: Emit,
    },
    /// Exit law from x through points that x separates: `point,probability`.
    Exit {
        #[command(flatten)]
        input: FileArg,
        #[arg(long)]
        x: String,
        #[arg(long = "to", required = true)]
        to: Vec<String>,
        #[command(flatten)]
        out: Emit,
    },
    /// Expected integral of f before hitting b: `occupation,value`.
    Occupation {
        #[command(flatten)]
        input: FileArg,
        #[arg(long)]
        x: String,
        #[arg(long)]
        b: String,
        /// `vertex,value` table for f; f = 1 when absent.
        #[arg(long)]
        f: Option<PathBuf>,
        #[command(flatten)]
        out: Emit,
    },
    /// Effective resistance from the root to depth n of a k-ary generator.
    Resistance {
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        c: Option<f64>,
        #[arg(long, default_value_t = 1.0)]
        first: f64,
        /// Take the generator from the metadata of a tree file instead.
        #[arg(long)]
        file: Option<PathBuf>,
        #[arg(long)]
        depth: usize,
        #[command(flatten)]
        out: Emit,
    },
    /// Distance between two points: `distance,value`.
    Distance {
        #[command(flatten)]
        input: FileArg,
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[command(flatten)]
        out: Emit,
    },
    /// Diameter and total mass: `diameter,value` and `mass,value`.
    Diameter {
        #[command(flatten)]
        input: FileArg,
        #[command(flatten)]
        out: Emit,
    },
}

#[derive(Args)]
struct SpectrumArgs {
    #[command(flatten)]
    input: FileArg,
    /// Dirichlet set; omit it together with --gap for the spectral gap only.
    #[arg(long = "b")]
    b: Vec<String>,
    /// Mesh size; defaults to total length / 400.
    #[arg(long)]
    h: Option<f64>,
    /// Also report the spectral gap.
    #[arg(long)]
    gap: bool,
    /// Write the eigenfunction as a `vertex,value` table on the mesh.
    #[arg(long, value_name = "PATH")]
    eigenfunction: Option<PathBuf>,
    #[command(flatten)]
    out: Emit,
}

#[derive(Args)]
struct MixingArgs {
    #[command(flatten)]
    input: FileArg,
    /// Edges `u:v` carrying the initial law (normalised speed measure on them).
    /// Defaults to the first edge.
    #[arg(long = "from-edge")]
    from_edge: Vec<String>,
    /// Final time; defaults to 6 * 2 * diam * mass.
    #[arg(long)]
    t_max: Option<f64>,
    #[arg(long, default_value_t = 60)]
    steps: usize,
    /// Mesh size; defaults to total length / 250.
    #[arg(long)]
    h: Option<f64>,
    /// Largest mesh diagonalised densely.
    #[arg(long, default_value_t = spectral::DEFAULT_DENSE_CAP)]
    max_vertices: usize,
    /// Add a column with the estimate driven by the spectral gap.
    #[arg(long)]
    diagnostic: bool,
    #[command(flatten)]
    out: Emit,
}

#[derive(Args)]
struct ClassifyArgs {
    /// Branching number and length ratio of a k-ary generator.
    #[arg(long, num_args = 2, value_names = ["K", "C"], conflicts_with = "file")]
    kary: Option<Vec<f64>>,
    #[arg(long, default_value_t = 1.0)]
    first: f64,
    #[arg(long, required_unless_present = "kary")]
    file: Option<PathBuf>,
    #[command(flatten)]
    out: Emit,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    input: FileArg,
    #[arg(long)]
    mesh_h: f64,
    #[arg(long, default_value_t = 10_000)]
    walks: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    start: String,
    /// Stop points; repeat for several.
    #[arg(long = "stop", required_unless_present = "horizon")]
    stop: Vec<String>,
    /// Run every walk for this long instead.
    #[arg(long, conflicts_with = "stop")]
    horizon: Option<f64>,
    /// Count jumps instead of drawing exponential holding times.
    #[arg(long)]
    jump_clock: bool,
    #[arg(long, default_value_t = 1_000_000_000)]
    max_jumps: u64,
    /// Worker threads; defaults to DENDRITE_THREADS or the core count.
    #[arg(long)]
    threads: Option<usize>,
    /// Per-walk CSV `walk_id,exit,elapsed,killed`; the summary still goes to stdout.
    #[arg(long, value_name = "PATH")]
    emit: Option<PathBuf>,
}

/// Everything that can end a run, with its exit code.
enum Failure {
    Usage(String),
    Input(String),
    Numerical(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_numerical() || matches!(e, Error::Simulation(_)) {
            Failure::Numerical(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}

type Outcome<T = ()> = Result<T, Failure>;

/// What a run records about itself next to each emitted file.
struct Run {
    argv: Vec<String>,
    input: Option<PathBuf>,
    seed: Option<u64>,
    started: Instant,
}

impl Run {
    fn manifest(&self) -> Outcome<String> {
        let hash = match &self.input {
            Some(p) => hex::encode(Sha256::digest(read(p)?.as_bytes())),
            None => String::new(),
        };
        let mut out = String::from("key,value\n");
        let _ = writeln!(out, "command,{}", self.argv.join(" "));
        let _ = writeln!(out, "input_sha256,{hash}");
        let _ = writeln!(out, "seed,{}", self.seed.map(|s| s.to_string()).unwrap_or_default());
        let _ = writeln!(out, "version,{}", env!("CARGO_PKG_VERSION"));
        let _ = writeln!(out, "wall_time_s,{}", self.started.elapsed().as_secs_f64());
        Ok(out)
    }

    /// Prints `text`, or writes it and the manifest when a path is given.
    fn emit(&self, text: &str, path: Option<&Path>) -> Outcome {
        match path {
            None => {
                print!("{text}");
                Ok(())
            }
            Some(p) => {
                write(p, text)?;
                let mut side = p.as_os_str().to_owned();
                side.push(".manifest");
                write(Path::new(&side), &self.manifest()?)
            }
        }
    }
}

fn read(p: &Path) -> Outcome<String> {
    std::fs::read_to_string(p).map_err(|e| Failure::Input(format!("cannot read {}: {e}", p.display())))
}

fn write(p: &Path, text: &str) -> Outcome {
    std::fs::write(p, text).map_err(|e| Failure::Input(format!("cannot write {}: {e}", p.display())))
}

fn load(p: &Path) -> Outcome<TreeFile> {
    format::parse(&read(p)?).map_err(|e| Failure::Input(format!("{}: {e}", p.display())))
}

fn points(tree: &TreeSpec<f64>, specs: &[String]) -> Outcome<Vec<PointRef<f64>>> {
    specs.iter().map(|s| parse_point(tree, s).map_err(Failure::from)).collect()
}

fn vertex_table(tree: &TreeSpec<f64>, f: &PiecewiseLinearFn<f64>) -> String {
    f.to_csv(tree)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let mut run = Run { argv, input: None, seed: None, started: Instant::now() };
    match dispatch(cli.command, &mut run) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let (code, msg) = match f {
                Failure::Usage(m) => (1, m),
                Failure::Input(m) => (2, m),
                Failure::Numerical(m) => (3, m),
            };
            eprintln!("dendrite: {msg}");
            ExitCode::from(code)
        }
    }
}

fn dispatch(command: Command, run: &mut Run) -> Outcome {
    match command {
        Command::Gen { kind } => generate(kind, run),
        Command::Compute { op } => compute(op, run),
        Command::Spectrum(a) => spectrum(a, run),
        Command::Mixing(a) => mixing(a, run),
        Command::Classify(a) => classify_cmd(a, run),
        Command::Simulate(a) => simulate_cmd(a, run),
        Command::Selftest { criterion } => selftest(criterion),
    }
}

fn generate(kind: GenKind, run: &mut Run) -> Outcome {
    let (file, out) = match kind {
        GenKind::Kary { k, c, depth, first, out } => {
            let g = GeneratorSpec::new(k, c).with_first_edge(first);
            let tree = g.truncate(depth)?;
            let measure = SpeedMeasure::lebesgue(&tree);
            (TreeFile { tree, measure, generator: Some(g) }, out)
        }
        GenKind::Random { vertices, seed, min_len, max_len, atoms, lebesgue, out } => {
            if !(0.0 < min_len && min_len < max_len && max_len.is_finite()) {
                return Err(Failure::Input("need 0 < min-len < max-len".into()));
            }
            if !(0.0..=1.0).contains(&atoms) {
                return Err(Failure::Input("atom probability must lie in [0, 1]".into()));
            }
            run.seed = Some(seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let tree = gen::random_tree(&mut rng, vertices.max(2), min_len, max_len);
            let measure = if lebesgue {
                SpeedMeasure::lebesgue(&tree)
            } else {
                gen::random_measure(&mut rng, &tree, 0.5, 2.0, atoms)?
            };
            (TreeFile { tree, measure, generator: None }, out)
        }
        GenKind::Y { out } => {
            let tree = gen::y_tree();
            let measure = SpeedMeasure::lebesgue(&tree);
            (TreeFile { tree, measure, generator: None }, out)
        }
    };
    run.emit(&format::serialize(&file), out.emit.as_deref())
}

fn compute(op: ComputeOp, run: &mut Run) -> Outcome {
    let mut text = String::new();
    let out = match op {
        ComputeOp::Cap { input, a, b, alpha, out } => {
            let f = loaded(run, &input.file)?;
            let (a, b) = (points(&f.tree, &a)?, points(&f.tree, &b)?);
            let cap = potential::capacity(&f.tree, &f.measure, &a, &b, alpha)?;
            let _ = writeln!(text, "cap,{cap}");
            out
        }
        ComputeOp::Green { input, x, b, y, alpha, out } => {
            let f = loaded(run, &input.file)?;
            let x = parse_point(&f.tree, &x)?;
            let b = points(&f.tree, &b)?;
            let g = potential::green_general(&f.tree, &f.measure, &b, &[(x, 1.0)], alpha)?;
            match y {
                Some(y) => {
                    let y = parse_point(&f.tree, &y)?;
                    let _ = writeln!(text, "green,{}", g.value_at(&y)?);
                }
                None => text = vertex_table(&f.tree, &g.source_values()),
            }
            out
        }
        ComputeOp::Harmonic { input, a, b, alpha, out } => {
            let f = loaded(run, &input.file)?;
            let (a, b) = (points(&f.tree, &a)?, points(&f.tree, &b)?);
            let h = potential::harmonic(&f.tree, &f.measure, &a, &b, alpha)?;
            text = vertex_table(&f.tree, &h.source_values());
            out
        }
        ComputeOp::Hit { input, x, a, b, out } => {
            let f = loaded(run, &input.file)?;
            let [x, a, b] = [x, a, b].map(|s| parse_point(&f.tree, &s));
            let p = potential::hitting_probability(&f.tree, &x?, &a?, &b?)?;
            let _ = writeln!(text, "hit,{p}");
            out
        }
        ComputeOp::Exit { input, x, to, out } => {
            let f = loaded(run, &input.file)?;
            let x = parse_point(&f.tree, &x)?;
            let targets = points(&f.tree, &to)?;
            let probs = potential::star_exit_distribution(&f.tree, &x, &targets)?;
            text.push_str("point,probability\n");
            for (p, q) in targets.iter().zip(probs) {
                let _ = writeln!(text, "{},{q}", point_label(&f.tree, p));
            }
            out
        }
        ComputeOp::Occupation { input, x, b, f: fpath, out } => {
            let f = loaded(run, &input.file)?;
            let (x, b) = (parse_point(&f.tree, &x)?, parse_point(&f.tree, &b)?);
            let fun = match fpath {
                Some(p) => PiecewiseLinearFn::from_csv(&f.tree, &read(&p)?)?,
                None => PiecewiseLinearFn::constant(&f.tree, 1.0),
            };
            let v = potential::expected_occupation(&f.tree, &f.measure, &x, &b, &fun)?;
            let _ = writeln!(text, "occupation,{v}");
            out
        }
        ComputeOp::Resistance { k, c, first, file, depth, out } => {
            let g = match (file, k, c) {
                (Some(p), None, None) => loaded(run, &p)?
                    .generator
                    .ok_or_else(|| Failure::Input(format!("{} has no generator metadata", p.display())))?,
                (None, Some(k), Some(c)) => GeneratorSpec::new(k, c).with_first_edge(first),
                _ => return Err(Failure::Usage("give either --file or both --k and --c".into())),
            };
            let r = potential::effective_resistance_to_depth(&g, depth)?;
            let _ = writeln!(text, "resistance,{r}");
            out
        }
        ComputeOp::Distance { input, x, y, out } => {
            let f = loaded(run, &input.file)?;
            let (x, y) = (parse_point(&f.tree, &x)?, parse_point(&f.tree, &y)?);
            let _ = writeln!(text, "distance,{}", f.tree.distance(&x, &y)?);
            out
        }
        ComputeOp::Diameter { input, out } => {
            let f = loaded(run, &input.file)?;
            let _ = writeln!(text, "diameter,{}", f.tree.diameter());
            let _ = writeln!(text, "total_length,{}", f.tree.total_length());
            let _ = writeln!(text, "mass,{}", f.measure.total_mass(&f.tree));
            out
        }
    };
    run.emit(&text, out.emit.as_deref())
}

fn loaded(run: &mut Run, path: &Path) -> Outcome<TreeFile> {
    run.input = Some(path.to_path_buf());
    load(path)
}

fn spectrum(a: SpectrumArgs, run: &mut Run) -> Outcome {
    let f = loaded(run, &a.input.file)?;
    let h = a.h.unwrap_or(f.tree.total_length() / 400.0);
    if a.b.is_empty() && !a.gap {
        return Err(Failure::Usage("give a Dirichlet set with --b or ask for --gap".into()));
    }
    let mut text = String::new();
    let mut eigenfunction = None;
    if !a.b.is_empty() {
        let b = points(&f.tree, &a.b)?;
        let res = spectral::principal_eigenvalue(&f.tree, &f.measure, &b, h)?;
        let _ = writeln!(text, "lambda,{}", res.eigenvalue);
        let _ = writeln!(text, "mesh_h,{}", res.mesh_size);
        let _ = writeln!(text, "mesh_vertices,{}", res.mesh.vertex_count());
        if let [single] = b.as_slice() {
            let bounds = spectral::eigenvalue_bounds(&f.tree, &f.measure, single)?;
            let _ = writeln!(text, "lower_bound,{}", bounds.lower);
            let _ = writeln!(text, "upper_bound,{}", bounds.upper);
        }
        eigenfunction = Some(vertex_table(&res.mesh, &res.eigenfunction));
    }
    if a.gap {
        let gap = spectral::spectral_gap(&f.tree, &f.measure, h)?;
        let _ = writeln!(text, "gap,{}", gap.eigenvalue);
        eigenfunction.get_or_insert_with(|| vertex_table(&gap.mesh, &gap.eigenfunction));
    }
    if let (Some(path), Some(table)) = (&a.eigenfunction, eigenfunction) {
        write(path, &table)?;
    }
    run.emit(&text, a.out.emit.as_deref())
}

fn mixing(a: MixingArgs, run: &mut Run) -> Outcome {
    let f = loaded(run, &a.input.file)?;
    let (tree, nu) = (&f.tree, &f.measure);
    let edges = if a.from_edge.is_empty() {
        vec![EdgeId(0)]
    } else {
        a.from_edge.iter().map(|s| points::parse_edge(tree, s)).collect::<Result<Vec<_>, _>>()?
    };
    let law = nu.restricted_to_edges(tree, &edges)?;
    let scale = 2.0 * tree.diameter() * nu.total_mass(tree);
    let t_max = a.t_max.unwrap_or(6.0 * scale);
    if !(t_max >= 0.0 && t_max.is_finite()) || a.steps == 0 {
        return Err(Failure::Input("need a finite --t-max >= 0 and --steps >= 1".into()));
    }
    let times: Vec<f64> = (0..=a.steps).map(|i| t_max * i as f64 / a.steps as f64).collect();
    let h = a.h.unwrap_or(tree.total_length() / 250.0);
    let heat = spectral::HeatSemigroup::new(tree, nu, h, a.max_vertices)?;
    let tv = heat.tv_curve(&law, &times)?;
    let bound = spectral::mixing_bound(tree, nu, &law, &times)?;
    let diag = if a.diagnostic {
        let lambda2 = heat.eigenvalues().get(1).copied().unwrap_or(0.0);
        Some(spectral::gap_mixing_diagnostic(tree, nu, &law, lambda2, &times)?)
    } else {
        None
    };
    let mut text = String::from(if diag.is_some() { "t,tv,bound,gap_diagnostic\n" } else { "t,tv,bound\n" });
    for i in 0..times.len() {
        let _ = write!(text, "{},{},{}", times[i], tv[i], bound[i]);
        if let Some(d) = &diag {
            let _ = write!(text, ",{}", d[i]);
        }
        text.push('\n');
    }
    run.emit(&text, a.out.emit.as_deref())
}

fn classify_cmd(a: ClassifyArgs, run: &mut Run) -> Outcome {
    let result = match (&a.kary, &a.file) {
        (Some(kc), None) => {
            let k = kc[0];
            if !(k >= 1.0 && k.fract() == 0.0) {
                return Err(Failure::Input(format!("branching number must be a positive integer, got {k}")));
            }
            classify::classify_generator(&GeneratorSpec::new(k as usize, kc[1]).with_first_edge(a.first))?
        }
        (None, Some(p)) => {
            let f = loaded(run, p)?;
            match &f.generator {
                Some(g) => classify::classify_generator(g)?,
                None => classify::classify_finite(&f.tree, &f.measure),
            }
        }
        _ => return Err(Failure::Usage("give either --kary K C or --file".into())),
    };
    let mut text = result.to_lines().join("\n");
    text.push('\n');
    run.emit(&text, a.out.emit.as_deref())
}

fn simulate_cmd(a: SimulateArgs, run: &mut Run) -> Outcome {
    let f = loaded(run, &a.input.file)?;
    run.seed = Some(a.seed);
    let start = parse_point(&f.tree, &a.start)?;
    let stop = match a.horizon {
        Some(t) => Stop::Horizon(t),
        None => Stop::Hit(points(&f.tree, &a.stop)?),
    };
    let cfg = WalkConfig {
        clock: if a.jump_clock { Clock::JumpCountOnly } else { Clock::Exponential },
        max_jumps: a.max_jumps,
        threads: a.threads.unwrap_or(0),
        ..WalkConfig::new(a.mesh_h, a.walks, a.seed, stop)
    };
    cfg.validate()?;
    let mut targets = vec![start];
    if let Stop::Hit(set) = &cfg.stop {
        targets.extend(set.iter().copied());
    }
    let chain = simulate::build_chain_at(&f.tree, &f.measure, a.mesh_h, &targets)?;
    let agg = simulate::run_walks(&chain, &cfg, &start)?;
    let est = agg.elapsed_estimate();
    let mut text = String::new();
    let _ = writeln!(text, "walks,{}", agg.n_walks());
    let _ = writeln!(text, "completed,{}", agg.completed);
    let _ = writeln!(text, "killed,{}", agg.killed);
    let _ = writeln!(text, "censored,{}", agg.censored);
    let _ = writeln!(text, "mean_elapsed,{}", est.mean);
    let _ = writeln!(text, "std_error,{}", est.std_error);
    for (v, n) in &agg.exit_counts {
        let _ = writeln!(text, "exit:{},{n}", chain.mesh.name(*v));
    }
    print!("{text}");
    if let Some(path) = &a.emit {
        run.emit(&agg.to_csv(&chain.mesh), Some(path))?;
    }
    if agg.censored > 0 {
        eprintln!("dendrite: {} walks censored after {} jumps", agg.censored, a.max_jumps);
    }
    Ok(())
}

fn selftest(criterion: Option<usize>) -> Outcome {
    let reports = match criterion {
        Some(id) if (1..=verify::CRITERIA).contains(&id) => vec![verify::run_criterion(id)],
        Some(id) => return Err(Failure::Usage(format!("criteria are numbered 1 to {}, got {id}", verify::CRITERIA))),
        None => verify::run_all(),
    };
    for r in &reports {
        println!("{r}");
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    println!("selftest,{}/{} passed", reports.len() - failed, reports.len());
    if failed == 0 {
        Ok(())
    } else {
        Err(Failure::Numerical(format!("{failed} criteria failed")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(e: Error) -> u8 {
        match Failure::from(e) {
            Failure::Usage(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numerical(_) => 3,
        }
    }

    #[test]
    fn error_kinds_map_to_exit_codes() {
        assert_eq!(code(Error::NoConvergence { iterations: 3, residual: 1.0 }), 3);
        assert_eq!(code(Error::Singular("x".into())), 3);
        assert_eq!(code(Error::Simulation("x".into())), 3);
        assert_eq!(code(Error::Parse { line: 1, column: 1, message: "x".into() }), 2);
        assert_eq!(code(Error::NotCompact("x")), 2);
    }
}

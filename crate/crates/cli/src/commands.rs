use std::collections::BTreeMap;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use oqw_core::classical::{embed_classical, CoinChoice};
use oqw_core::dilation::{
    check_uqw_condition, hadamard_pair, run_coherent, run_realisation_with, Completion,
    GlobalUnitary,
};
use oqw_core::dqc::{
    build_phase_estimation, run_to_steady_observed, success_probability, sweep_omega, BoundaryRule,
    DqcChain, GateCircuit, PhaseEstimationSpec, DEFAULT_STEADY_TOL,
};
use oqw_core::io;
use oqw_core::lattice::{analyze_components, moments, HomogeneousWalkZ};
use oqw_core::random::random_unitary;
use oqw_core::table::{Table, TableFormat};
use oqw_core::trajectories::{run_ensemble, sample_paths, trajectory_rng, PureWalkerState};
use oqw_core::walk::DEFAULT_KRAUS_TOL;
use oqw_core::{
    evolve, node_distribution, step, total_variation, validate_walk, BlockDiagonalState,
    ComplexMatrix, ComplexVector, NodeId, OpenQuantumWalk, OqwError, Transitions,
};
use sha2::{Digest, Sha256};

use crate::{
    BoundaryArg, Cli, CliError, CoinArg, Command, CompletionArg, DqcArgs, DqcBench, Format,
};

type CliResult<T> = std::result::Result<T, CliError>;

/// Collects inputs for the config digest and routes output.
struct Run<'a> {
    cli: &'a Cli,
    hasher: Sha256,
    inputs: Vec<PathBuf>,
}

impl<'a> Run<'a> {
    fn new(cli: &'a Cli) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(
            format!(
                "{:?}|{}|{:?}|{:?}",
                cli.command, cli.seed, cli.tol, cli.format
            )
            .as_bytes(),
        );
        Self {
            cli,
            hasher,
            inputs: Vec::new(),
        }
    }

    fn read(&mut self, path: &Path) -> CliResult<String> {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        self.hasher.update(text.as_bytes());
        self.inputs.push(path.to_path_buf());
        Ok(text)
    }

    /// Called once every input is parsed: refuses to overwrite an input and
    /// prints the reproducibility header.
    fn start(&self) -> CliResult<()> {
        if let Some(out) = &self.cli.output {
            if let Ok(out) = std::fs::canonicalize(out) {
                for input in &self.inputs {
                    if std::fs::canonicalize(input).is_ok_and(|p| p == out) {
                        return Err(CliError::Usage(format!(
                            "output path {} is also an input",
                            out.display()
                        )));
                    }
                }
            }
        }
        let digest: String = self
            .hasher
            .clone()
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        eprintln!(
            "# oqw {} seed={} config_sha256={}",
            env!("CARGO_PKG_VERSION"),
            self.cli.seed,
            digest
        );
        Ok(())
    }

    fn tol(&self, default: f64) -> CliResult<f64> {
        match self.cli.tol {
            None => Ok(default),
            Some(t) if t.is_finite() && t > 0.0 => Ok(t),
            Some(t) => Err(CliError::Usage(format!(
                "--tol must be positive and finite, got {t}"
            ))),
        }
    }

    fn format(&self) -> TableFormat {
        match self.cli.format {
            Format::Csv => TableFormat::Csv,
            Format::Text => TableFormat::Text,
        }
    }

    fn emit(&self, text: &str) -> CliResult<()> {
        match &self.cli.output {
            Some(path) => write_file(path, text),
            None => {
                let mut out = std::io::stdout().lock();
                out.write_all(text.as_bytes())
                    .and_then(|_| out.flush())
                    .map_err(|source| CliError::Write {
                        path: PathBuf::from("<stdout>"),
                        source,
                    })
            }
        }
    }
}

fn write_file(path: &Path, text: &str) -> CliResult<()> {
    std::fs::write(path, text).map_err(|source| CliError::Write {
        path: path.to_path_buf(),
        source,
    })
}

fn trailer(key: &str, value: impl std::fmt::Display) -> String {
    format!("# {key}={value}\n")
}

fn float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn run(cli: &Cli) -> CliResult<()> {
    let mut run = Run::new(cli);
    match &cli.command {
        Command::Validate { walk } => validate(&mut run, walk),
        Command::Evolve {
            walk,
            state,
            steps,
            every,
        } => evolve_cmd(&mut run, walk, state, *steps, *every),
        Command::EvolveZ {
            lattice,
            state,
            steps,
        } => evolve_z(&mut run, lattice, state, *steps),
        Command::AnalyzeZ {
            lattice,
            state,
            steps,
        } => analyze_z(&mut run, lattice, state, *steps),
        Command::Trajectories {
            source,
            coin,
            node,
            steps,
            count,
            compare_exact,
            dump_paths,
            paths_output,
        } => {
            let walk = load_source(&mut run, source.walk.as_deref(), source.lattice.as_deref())?;
            let opts = TrajectoryOpts {
                coin,
                node: *node,
                steps: *steps,
                count: *count,
                compare_exact: *compare_exact,
                dump_paths: *dump_paths,
                paths_output: paths_output.as_deref(),
            };
            trajectories(&run, walk, &opts)
        }
        Command::Dilate {
            walk,
            state,
            steps,
            completion,
            show_unitaries,
        } => dilate(&mut run, walk, state, *steps, *completion, *show_unitaries),
        Command::Uqw {
            lattice,
            alpha,
            beta,
            sign,
            coin,
            node,
            steps,
        } => uqw(
            &mut run,
            lattice.as_deref(),
            alpha,
            beta,
            *sign,
            coin,
            *node,
            *steps,
        ),
        Command::EmbedCrw { matrix, coins, dim } => embed_crw(&mut run, matrix, *coins, *dim),
        Command::Dqc(args) => dqc(&mut run, args),
    }
}

fn load_walk(run: &mut Run, path: &Path) -> CliResult<OpenQuantumWalk> {
    let text = run.read(path)?;
    let walk = io::parse_walk(&text)?;
    let tol = run.tol(DEFAULT_KRAUS_TOL)?;
    validate_walk(&walk, tol).into_result()?;
    Ok(walk)
}

fn load_lattice(run: &mut Run, path: &Path) -> CliResult<HomogeneousWalkZ> {
    let text = run.read(path)?;
    let tol = run.tol(DEFAULT_KRAUS_TOL)?;
    Ok(io::parse_lattice(&text, tol)?)
}

fn load_state(run: &mut Run, path: &Path, coin_dim: usize) -> CliResult<BlockDiagonalState> {
    let text = run.read(path)?;
    let state = io::parse_state(&text)?;
    if state.coin_dim() != coin_dim {
        return Err(OqwError::DimensionMismatch {
            context: format!("state in {}", path.display()),
            expected: coin_dim,
            found: state.coin_dim(),
        }
        .into());
    }
    Ok(state)
}

fn distribution_table(dist: &BTreeMap<NodeId, f64>) -> CliResult<Table> {
    let mut t = Table::new(&["node", "probability"]);
    for (&node, &p) in dist {
        t.push(vec![node.into(), p.into()])?;
    }
    Ok(t)
}

fn validate(run: &mut Run, path: &Path) -> CliResult<()> {
    let text = run.read(path)?;
    let walk = io::parse_walk(&text)?;
    let tol = run.tol(DEFAULT_KRAUS_TOL)?;
    run.start()?;
    let report = validate_walk(&walk, tol);
    let mut t = Table::new(&["node", "deviation", "status"]);
    for (&node, &dev) in &report.deviations {
        let status = if dev <= tol { "ok" } else { "fail" };
        t.push(vec![node.into(), dev.into(), status.into()])?;
    }
    run.emit(&t.render(run.format()))?;
    report.into_result()?;
    Ok(())
}

fn evolve_cmd(
    run: &mut Run,
    walk_path: &Path,
    state_path: &Path,
    steps: usize,
    every: bool,
) -> CliResult<()> {
    let walk = load_walk(run, walk_path)?;
    let state = load_state(run, state_path, walk.coin_dim())?;
    run.start()?;
    if !every {
        let out = evolve(&walk, &state, steps)?;
        return run.emit(&distribution_table(&node_distribution(&out))?.render(run.format()));
    }
    let mut t = Table::new(&["step", "node", "probability"]);
    let mut current = state;
    for n in 0..=steps {
        if n > 0 {
            current = step(&walk, &current)?;
        }
        for (node, p) in node_distribution(&current) {
            t.push(vec![n.into(), node.into(), p.into()])?;
        }
    }
    run.emit(&t.render(run.format()))
}

fn evolve_z(run: &mut Run, lattice: &Path, state_path: &Path, steps: usize) -> CliResult<()> {
    let walk = load_lattice(run, lattice)?;
    let state = load_state(run, state_path, walk.coin_dim())?;
    run.start()?;
    let out = evolve(&walk, &state, steps)?;
    let dist = node_distribution(&out);
    let (mean, variance) = moments(&dist)?;
    let mut text = distribution_table(&dist)?.render(run.format());
    text.push_str(&trailer("mean", float(mean)));
    text.push_str(&trailer("variance", float(variance)));
    text.push_str(&trailer("pruned_mass", float(out.pruned_mass())));
    run.emit(&text)
}

fn analyze_z(
    run: &mut Run,
    lattice: &Path,
    state_path: &Path,
    steps: Option<usize>,
) -> CliResult<()> {
    let walk = load_lattice(run, lattice)?;
    let state = load_state(run, state_path, walk.coin_dim())?;
    let (origin, block) = match state.blocks().iter().collect::<Vec<_>>().as_slice() {
        [(node, block)] => (**node, (*block).clone()),
        _ => {
            return Err(OqwError::InvalidState(
                "component analysis needs a state on a single site".into(),
            )
            .into());
        }
    };
    run.start()?;
    let analysis = analyze_components(&walk, &block)?;
    let text = match steps {
        None => {
            let mut t = Table::new(&[
                "component",
                "weight",
                "right_amplitude",
                "left_amplitude",
                "kind",
                "drift",
                "diffusion",
            ]);
            for (k, c) in analysis.components.iter().enumerate() {
                let kind = serde_json::to_value(c.kind)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default();
                t.push(vec![
                    k.into(),
                    c.weight.into(),
                    c.right_amplitude.into(),
                    c.left_amplitude.into(),
                    kind.into(),
                    c.drift.into(),
                    c.diffusion.into(),
                ])?;
            }
            t.render(run.format())
        }
        Some(n) => {
            let exact = node_distribution(&evolve(&walk, &state, n)?);
            let predicted: BTreeMap<NodeId, f64> = analysis
                .predicted_distribution(n)
                .into_iter()
                .map(|(x, p)| (x + origin, p))
                .collect();
            let nodes: std::collections::BTreeSet<NodeId> =
                exact.keys().chain(predicted.keys()).copied().collect();
            let mut t = Table::new(&["node", "exact", "predicted"]);
            for x in nodes {
                let e = exact.get(&x).copied().unwrap_or(0.0);
                let p = predicted.get(&x).copied().unwrap_or(0.0);
                t.push(vec![x.into(), e.into(), p.into()])?;
            }
            let mut text = t.render(run.format());
            text.push_str(&trailer(
                "total_variation",
                float(total_variation(&exact, &predicted)),
            ));
            text
        }
    };
    run.emit(&text)
}

enum Source {
    Graph(OpenQuantumWalk),
    Line(HomogeneousWalkZ),
}

impl Source {
    fn walk(&self) -> &dyn Transitions {
        match self {
            Source::Graph(w) => w,
            Source::Line(w) => w,
        }
    }
}

fn load_source(run: &mut Run, walk: Option<&Path>, lattice: Option<&Path>) -> CliResult<Source> {
    match (walk, lattice) {
        (Some(p), None) => Ok(Source::Graph(load_walk(run, p)?)),
        (None, Some(p)) => Ok(Source::Line(load_lattice(run, p)?)),
        _ => Err(CliError::Usage(
            "give exactly one of --walk or --lattice".into(),
        )),
    }
}

fn parse_coin(text: &str) -> CliResult<ComplexVector> {
    Ok(io::parse_vector(text)?)
}

struct TrajectoryOpts<'a> {
    coin: &'a str,
    node: NodeId,
    steps: usize,
    count: u64,
    compare_exact: bool,
    dump_paths: Option<usize>,
    paths_output: Option<&'a Path>,
}

fn trajectories(run: &Run, source: Source, opts: &TrajectoryOpts) -> CliResult<()> {
    let walk = source.walk();
    let coin = parse_coin(opts.coin)?;
    if coin.len() != walk.coin_dim() {
        return Err(OqwError::DimensionMismatch {
            context: "coin vector".into(),
            expected: walk.coin_dim(),
            found: coin.len(),
        }
        .into());
    }
    if !walk.contains(opts.node) {
        return Err(OqwError::UnknownNode(opts.node).into());
    }
    let initial = PureWalkerState::normalized(coin, opts.node)?;
    run.start()?;
    let estimate = run_ensemble(walk, &initial, opts.steps, opts.count, run.cli.seed)?;
    let empirical = estimate.distribution();
    let exact = if opts.compare_exact {
        Some(node_distribution(&evolve(
            walk,
            &initial.to_block_state(),
            opts.steps,
        )?))
    } else {
        None
    };
    let mut text = match &exact {
        None => {
            let mut t = Table::new(&["node", "count", "empirical_probability"]);
            for (node, &c) in &estimate.counts {
                t.push(vec![(*node).into(), c.into(), empirical[node].into()])?;
            }
            t.render(run.format())
        }
        Some(exact) => {
            let nodes: std::collections::BTreeSet<NodeId> = exact
                .iter()
                .filter(|(_, &p)| p > 0.0)
                .map(|(&n, _)| n)
                .chain(estimate.counts.keys().copied())
                .collect();
            let mut t = Table::new(&[
                "node",
                "count",
                "empirical_probability",
                "exact_probability",
            ]);
            for node in nodes {
                t.push(vec![
                    node.into(),
                    estimate.counts.get(&node).copied().unwrap_or(0).into(),
                    empirical.get(&node).copied().unwrap_or(0.0).into(),
                    exact.get(&node).copied().unwrap_or(0.0).into(),
                ])?;
            }
            let mut text = t.render(run.format());
            text.push_str(&trailer(
                "total_variation",
                float(total_variation(&empirical, exact)),
            ));
            text
        }
    };
    if let Some(k) = opts.dump_paths {
        let paths = sample_paths(walk, &initial, opts.steps, k, run.cli.seed)?;
        let mut t = Table::new(&["trajectory", "step", "node"]);
        for rec in &paths {
            for (n, &x) in rec.positions.iter().enumerate() {
                t.push(vec![rec.stream.into(), n.into(), x.into()])?;
            }
        }
        let rendered = t.render(run.format());
        match opts.paths_output {
            Some(path) => write_file(path, &rendered)?,
            None => {
                text.push('\n');
                text.push_str(&rendered);
            }
        }
    }
    run.emit(&text)
}

fn dilate(
    run: &mut Run,
    walk_path: &Path,
    state_path: &Path,
    steps: usize,
    completion: CompletionArg,
    show_unitaries: bool,
) -> CliResult<()> {
    let walk = load_walk(run, walk_path)?;
    let state = load_state(run, state_path, walk.coin_dim())?;
    run.start()?;
    let completion = match completion {
        CompletionArg::Canonical => Completion::Canonical,
        CompletionArg::Reversed => Completion::Reversed,
    };
    let mut realised = state.clone();
    let mut mapped = state;
    for _ in 0..steps {
        realised = run_realisation_with(&walk, &realised, completion)?;
        mapped = step(&walk, &mapped)?;
    }
    let (dr, dm) = (node_distribution(&realised), node_distribution(&mapped));
    let mut t = Table::new(&["node", "probability_dilation", "probability_map"]);
    for &node in walk.nodes() {
        t.push(vec![
            node.into(),
            dr.get(&node).copied().unwrap_or(0.0).into(),
            dm.get(&node).copied().unwrap_or(0.0).into(),
        ])?;
    }
    let mut text = t.render(run.format());
    text.push_str(&trailer(
        "max_block_deviation",
        float(realised.max_abs_diff(&mapped)),
    ));
    if show_unitaries {
        let unitary = GlobalUnitary::build(&walk, completion)?;
        let mut u = Table::new(&["node", "row", "col", "re", "im"]);
        for (&node, local) in &unitary.blocks {
            let m = local.unitary.inner();
            for r in 0..m.nrows() {
                for c in 0..m.ncols() {
                    u.push(vec![
                        node.into(),
                        r.into(),
                        c.into(),
                        m[(r, c)].re.into(),
                        m[(r, c)].im.into(),
                    ])?;
                }
            }
        }
        text.push('\n');
        text.push_str(&u.render(run.format()));
    }
    run.emit(&text)
}

#[allow(clippy::too_many_arguments)]
fn uqw(
    run: &mut Run,
    lattice: Option<&Path>,
    alpha: &str,
    beta: &str,
    sign: f64,
    coin: &str,
    node: NodeId,
    steps: usize,
) -> CliResult<()> {
    let tol = run.tol(1e-12)?;
    let walk = match lattice {
        Some(p) => load_lattice(run, p)?,
        None => {
            let a = io::parse_scalar(alpha)?;
            let b = io::parse_scalar(beta)?;
            if sign != 1.0 && sign != -1.0 {
                return Err(CliError::Usage(format!(
                    "--sign must be 1 or -1, got {sign}"
                )));
            }
            let (right, left) = hadamard_pair(oqw_core::c64(a, 0.0), oqw_core::c64(b, 0.0), sign)?;
            HomogeneousWalkZ::new(right, left, tol)?
        }
    };
    let coin = parse_coin(coin)?;
    run.start()?;
    let diag = check_uqw_condition(walk.right(), walk.left(), tol);
    let state = run_coherent(&walk, coin, node, steps, tol)?;
    let mut text = distribution_table(&state.distribution())?.render(run.format());
    text.push_str(&trailer("cross_norm", float(diag.cross_norm)));
    text.push_str(&trailer(
        "sum_unitarity_defect",
        float(diag.sum_unitarity_defect),
    ));
    run.emit(&text)
}

fn embed_crw(run: &mut Run, path: &Path, coins: CoinArg, dim: usize) -> CliResult<()> {
    let text = run.read(path)?;
    let p = io::parse_stochastic(&text)?;
    run.start()?;
    let choice = match coins {
        CoinArg::Scalar => CoinChoice::Scalar,
        CoinArg::Identity => CoinChoice::Identity(dim),
        CoinArg::Random => {
            if dim == 0 {
                return Err(CliError::Usage("--dim must be positive".into()));
            }
            let mut rng = trajectory_rng(run.cli.seed, 0);
            let n = p.size();
            let mut family = BTreeMap::new();
            for from in 0..n {
                for to in 0..n {
                    if p.prob(from, to) > 0.0 {
                        family.insert(
                            (from as NodeId, to as NodeId),
                            random_unitary(&mut rng, dim),
                        );
                    }
                }
            }
            CoinChoice::Unitaries { dim, family }
        }
    };
    let walk = embed_classical(&p, &choice)?;
    run.emit(&io::write_walk(&walk))
}

fn dqc(run: &mut Run, args: &DqcArgs) -> CliResult<()> {
    let tol = run.tol(DEFAULT_STEADY_TOL)?;
    let boundary = match args.boundary {
        BoundaryArg::Consistent => BoundaryRule::Consistent,
        BoundaryArg::Literal => BoundaryRule::Literal,
    };
    // (circuit, initial vector, success projector, readout labels)
    let (circuit, psi0, projector, readout): (
        GateCircuit,
        ComplexVector,
        ComplexMatrix,
        Option<Readout>,
    ) = match (&args.bench, &args.circuit) {
        (Some(DqcBench::PhaseEstimation { ancillas, phase }), _) => {
            let phi = io::parse_scalar(phase)?;
            let pe = build_phase_estimation(&PhaseEstimationSpec::diagonal_phase(*ancillas, phi))?;
            let expected = (phi * (1u64 << ancillas) as f64).round() as usize % (1 << ancillas);
            let projector = pe.readout_projector(expected);
            let readout = Readout {
                ancillas: *ancillas,
                target_qubits: pe.target_qubits,
            };
            (pe.circuit, pe.initial, projector, Some(readout))
        }
        (None, Some(path)) => {
            let text = run.read(path)?;
            let parsed = io::parse_circuit(&text)?;
            (parsed.circuit, parsed.initial, parsed.projector, None)
        }
        (None, None) => {
            return Err(CliError::Usage(
                "dqc needs --circuit or the phase-estimation benchmark".into(),
            ));
        }
    };
    if let Some(omegas) = &args.sweep {
        if omegas.is_empty() {
            return Err(CliError::Usage("--sweep needs at least one omega".into()));
        }
        run.start()?;
        let rows = sweep_omega(&circuit, &psi0, &projector, omegas, tol, args.max_steps)?;
        let mut t = Table::new(&["omega", "steps", "p_last", "success_probability"]);
        for r in rows {
            t.push(vec![
                r.omega.into(),
                r.steps_to_steady.into(),
                r.p_last.into(),
                r.success_probability.into(),
            ])?;
        }
        return run.emit(&t.render(run.format()));
    }
    let chain = DqcChain::new(circuit, args.omega)?.with_boundary(boundary);
    let initial = chain.initial_state(&psi0)?;
    run.start()?;
    let last = chain.last_node() as NodeId;
    let mut series = Table::new(&["step", "p_last"]);
    let mut push_err = None;
    let steady = run_to_steady_observed(&chain, &initial, tol, args.max_steps, |n, s| {
        let p = s.block(last).map(|b| b.real_trace()).unwrap_or(0.0);
        if let Err(e) = series.push(vec![n.into(), p.into()]) {
            push_err = Some(e);
        }
    })?;
    if let Some(e) = push_err {
        return Err(e.into());
    }
    let mut text = series.render(run.format());
    text.push_str(&trailer("steps", steady.steps));
    text.push_str(&trailer("residual", float(steady.residual)));
    let success = success_probability(&steady.state, &projector, last)?;
    text.push_str(&trailer("success_probability", float(success)));
    if let (Some(r), Some(block)) = (readout, steady.state.block(last)) {
        let (bits, p) = r.most_likely(block);
        text.push_str(&trailer("readout", bits));
        text.push_str(&trailer("readout_conditional_probability", float(p)));
    }
    run.emit(&text)
}

struct Readout {
    ancillas: usize,
    target_qubits: usize,
}

impl Readout {
    /// Most likely ancilla string in the block, with its probability
    /// conditioned on the walker being there.
    fn most_likely(&self, block: &ComplexMatrix) -> (String, f64) {
        let tdim = 1usize << self.target_qubits;
        let total = block.real_trace();
        let mut best = (0usize, f64::NEG_INFINITY);
        for a in 0..1usize << self.ancillas {
            let p: f64 = (0..tdim)
                .map(|t| block[(a * tdim + t, a * tdim + t)].re)
                .sum();
            if p > best.1 {
                best = (a, p);
            }
        }
        (
            format!("{:0width$b}", best.0, width = self.ancillas),
            best.1 / total,
        )
    }
}

//! Command-line front end: loads equation specs and character files, drives
//! enumeration, coproducts, verification sweeps, and renormalisation.

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;

use regcalc_core::algebra::{format_q, Degree, LinComb, MultiIndex};
use regcalc_core::characters::{
    character_from_json, gamma_f, group_product, inverse, m_g, plus_generators,
    random_character, recentring_defect, twist, Algebra,
};
use regcalc_core::context::Context;
use regcalc_core::coproducts::{
    antipode_minus, antipode_plus, cointeraction_defect, completeness_check, delta_minus,
    delta_minus_forest, delta_plus, MinusDomain, PlusDomain, Structure,
};
use regcalc_core::error::Error;
use regcalc_core::grafting::{bgraft_star, generators_check, hgraft, hgraft_star};
use regcalc_core::nonlin::{
    coherence_check, counterterms, counterterms_via_adjoint, expr::parse_nonlin, jet::solve_jet,
    jet::Jet, upsilon, ExtNonlin, NonlinExpr,
};
use regcalc_core::rules::{load_spec, subcritical_check, Flavor};
use regcalc_core::trees::{parse_tree, DegreeMode, Forest, Tree};

#[derive(Parser)]
#[command(
    name = "regcalc",
    about = "Exact Hopf- and pre-Lie-algebra calculus on the decorated trees of singular SPDEs",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,
    /// Seed for randomized verification sweeps.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel sweeps (1 = sequential).
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Override the kernel-edge cutoff of the spec.
    #[arg(long, global = true)]
    max_edges: Option<usize>,
    /// Override the degree cutoff of the spec (degree literal, e.g. "3/2").
    #[arg(long, global = true)]
    max_degree: Option<String>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Clone, Copy, ValueEnum)]
enum CoproductKind {
    Plus,
    Minus,
    PlusEx,
    MinusEx,
}

#[derive(Clone, Copy, ValueEnum)]
enum AntipodeKind {
    Plus,
    Minus,
}

#[derive(Clone, Copy, ValueEnum)]
enum FlavorArg {
    Circ,
    CircEx,
    Plus,
    PlusEx,
    Minus,
    MinusEx,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum StructureArg {
    Reduced,
    Extended,
}

#[derive(Clone, Copy, ValueEnum, PartialEq, Eq)]
enum Suite {
    Hopf,
    Cointeraction,
    Characters,
    Prelie,
    GraftAdjoint,
    Morphisms,
}

#[derive(Subcommand)]
enum Command {
    /// Check subcriticality and completeness of a rule.
    CheckRule(SpecArg),
    /// Enumerate a tree basis.
    Trees {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, value_enum, default_value_t = FlavorArg::Circ)]
        flavor: FlavorArg,
    },
    /// Apply a coproduct to a tree literal.
    Coproduct {
        #[arg(value_enum)]
        kind: CoproductKind,
        #[command(flatten)]
        spec: SpecArg,
        tree: String,
        /// Domain of the coproduct (model, plus, or minus).
        #[arg(long, default_value = "model")]
        domain: String,
    },
    /// Apply an antipode to a tree (positive) or forest (negative) literal.
    Antipode {
        #[arg(value_enum)]
        kind: AntipodeKind,
        #[command(flatten)]
        spec: SpecArg,
        tree: String,
        #[arg(long, value_enum, default_value_t = StructureArg::Reduced)]
        structure: StructureArg,
    },
    /// Run a verification suite and report pass/fail per identity.
    Verify {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, value_enum, default_value_t = StructureArg::Extended)]
        structure: StructureArg,
    },
    /// Evaluate the coherence map on a tree.
    Upsilon {
        #[command(flatten)]
        spec: SpecArg,
        tree: String,
    },
    /// Compute the renormalised non-linearity for a character file.
    Renormalize {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long = "char")]
        character: String,
    },
    /// Solve the algebraic fixed point and print the jet coefficients.
    SolveJet {
        #[command(flatten)]
        spec: SpecArg,
        #[arg(long = "char")]
        character: Option<String>,
        #[arg(long)]
        check_coherence: bool,
    },
}

#[derive(Args)]
struct SpecArg {
    /// Preset name (phi4_3, phi4_2, gkpz) or path to a spec JSON file.
    spec: String,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .ok();
    }
    match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_context(cli: &Cli, arg: &SpecArg) -> Result<Context, Error> {
    let mut spec = load_spec(&arg.spec)?;
    if let Some(n) = cli.max_edges {
        spec.cutoffs.max_kernel_edges = n;
    }
    if let Some(d) = &cli.max_degree {
        spec.cutoffs.max_degree = d.parse()?;
    }
    Ok(Context::new(spec))
}

fn structure(arg: StructureArg) -> Structure {
    match arg {
        StructureArg::Reduced => Structure::Reduced,
        StructureArg::Extended => Structure::Extended,
    }
}

fn run(cli: &Cli) -> Result<ExitCode, Error> {
    match &cli.command {
        Command::CheckRule(spec) => check_rule(cli, spec),
        Command::Trees { spec, flavor } => trees(cli, spec, *flavor),
        Command::Coproduct {
            kind,
            spec,
            tree,
            domain,
        } => coproduct(cli, *kind, spec, tree, domain),
        Command::Antipode {
            kind,
            spec,
            tree,
            structure: st,
        } => antipode(cli, *kind, spec, tree, structure(*st)),
        Command::Verify {
            spec,
            suite,
            structure: st,
        } => verify(cli, spec, *suite, structure(*st)),
        Command::Upsilon { spec, tree } => upsilon_cmd(cli, spec, tree),
        Command::Renormalize { spec, character } => renormalize(cli, spec, character),
        Command::SolveJet {
            spec,
            character,
            check_coherence,
        } => solve_jet_cmd(cli, spec, character.as_deref(), *check_coherence),
    }
}

fn check_rule(cli: &Cli, arg: &SpecArg) -> Result<ExitCode, Error> {
    let ctx = load_context(cli, arg)?;
    let report = subcritical_check(ctx.spec());
    let mut complete = None;
    let mut offenders: Vec<(Tree, Tree)> = Vec::new();
    if report.subcritical {
        let mut all = true;
        for st in [Structure::Reduced, Structure::Extended] {
            let r = completeness_check(&ctx, st)?;
            all &= r.complete_up_to_cutoff;
            offenders.extend(r.offenders);
        }
        complete = Some(all);
    }
    match cli.format {
        Format::Text => {
            let witness = report
                .witness
                .as_ref()
                .map(|(_, r)| format!("; witness reg(I) = {r}"))
                .unwrap_or_default();
            let completeness = match complete {
                Some(true) => "; complete up to cutoff: yes".to_string(),
                Some(false) => {
                    let (src, off) = &offenders[0];
                    format!("; complete up to cutoff: no (offender {off} from {src})")
                }
                None => String::new(),
            };
            println!(
                "subcritical: {}{witness}{completeness}",
                if report.subcritical { "yes" } else { "no" }
            );
        }
        Format::Json => {
            let j = serde_json::json!({
                "subcritical": report.subcritical,
                "witness": report.witness.as_ref().map(|(xi, i)| serde_json::json!({
                    "reg_Xi": xi.to_string(),
                    "reg_I": i.to_string(),
                })),
                "complete_up_to_cutoff": complete,
                "offenders": offenders.iter().map(|(a, b)| serde_json::json!({
                    "tree": a.to_string(),
                    "right_factor": b.to_string(),
                })).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&j)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn trees(cli: &Cli, arg: &SpecArg, flavor: FlavorArg) -> Result<ExitCode, Error> {
    let ctx = load_context(cli, arg)?;
    let flavor = match flavor {
        FlavorArg::Circ => Flavor::Circ,
        FlavorArg::CircEx => Flavor::CircEx,
        FlavorArg::Plus => Flavor::Plus,
        FlavorArg::PlusEx => Flavor::PlusEx,
        FlavorArg::Minus => Flavor::Minus,
        FlavorArg::MinusEx => Flavor::MinusEx,
    };
    let basis = ctx.basis(flavor)?;
    match cli.format {
        Format::Text => {
            for t in basis.iter() {
                println!(
                    "{t}   |.|_s = {}, |.|_+ = {}",
                    ctx.degree(t, DegreeMode::S),
                    ctx.degree(t, DegreeMode::Plus)
                );
            }
            println!("total: {} trees ({flavor})", basis.len());
        }
        Format::Json => {
            let j = serde_json::json!({
                "flavor": flavor.to_string(),
                "trees": basis.iter().map(|t| serde_json::json!({
                    "tree": t.to_string(),
                    "degree_s": ctx.degree(t, DegreeMode::S).to_string(),
                    "degree_plus": ctx.degree(t, DegreeMode::Plus).to_string(),
                })).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&j)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn print_pair_terms(cli: &Cli, terms: Vec<(String, String, String)>) -> Result<(), Error> {
    match cli.format {
        Format::Text => {
            for (c, l, r) in terms {
                println!("{c} * [{l}] (x) [{r}]");
            }
        }
        Format::Json => {
            let j = serde_json::json!({
                "terms": terms.iter().map(|(c, l, r)| serde_json::json!({
                    "coeff": c, "left": l, "right": r,
                })).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&j)?);
        }
    }
    Ok(())
}

fn coproduct(
    cli: &Cli,
    kind: CoproductKind,
    arg: &SpecArg,
    tree: &str,
    domain: &str,
) -> Result<ExitCode, Error> {
    let ctx = load_context(cli, arg)?;
    let t = parse_tree(tree, ctx.dim())?;
    let st = match kind {
        CoproductKind::Plus | CoproductKind::Minus => Structure::Reduced,
        CoproductKind::PlusEx | CoproductKind::MinusEx => Structure::Extended,
    };
    let terms = match kind {
        CoproductKind::Plus | CoproductKind::PlusEx => {
            let dom = match domain {
                "model" => PlusDomain::Model,
                "plus" => PlusDomain::Plus,
                other => return Err(Error::Invalid(format!("unknown domain `{other}`"))),
            };
            delta_plus(&ctx, &t, dom, st)?
                .iter()
                .map(|((l, r), c)| (format_q(c), l.to_string(), r.to_string()))
                .collect::<Vec<_>>()
        }
        CoproductKind::Minus | CoproductKind::MinusEx => match domain {
            "minus" => delta_minus_forest(&ctx, &Forest::single(t), st)?
                .iter()
                .map(|((l, r), c)| (format_q(c), l.to_string(), r.to_string()))
                .collect::<Vec<_>>(),
            dom => {
                let dom = match dom {
                    "model" => MinusDomain::Model,
                    "plus" => MinusDomain::Plus,
                    other => return Err(Error::Invalid(format!("unknown domain `{other}`"))),
                };
                delta_minus(&ctx, &t, dom, st)?
                    .iter()
                    .map(|((l, r), c)| (format_q(c), l.to_string(), r.to_string()))
                    .collect::<Vec<_>>()
            }
        },
    };
    print_pair_terms(cli, terms)?;
    Ok(ExitCode::SUCCESS)
}

fn antipode(
    cli: &Cli,
    kind: AntipodeKind,
    arg: &SpecArg,
    tree: &str,
    st: Structure,
) -> Result<ExitCode, Error> {
    let ctx = load_context(cli, arg)?;
    let lines: Vec<(String, String)> = match kind {
        AntipodeKind::Plus => {
            let t = parse_tree(tree, ctx.dim())?;
            antipode_plus(&ctx, &t, st)?
                .iter()
                .map(|(b, c)| (format_q(c), b.to_string()))
                .collect()
        }
        AntipodeKind::Minus => {
            let t = parse_tree(tree, ctx.dim())?;
            antipode_minus(&ctx, &Forest::single(t), st)?
                .iter()
                .map(|(b, c)| (format_q(c), b.to_string()))
                .collect()
        }
    };
    match cli.format {
        Format::Text => {
            for (c, b) in lines {
                println!("{c} * [{b}]");
            }
        }
        Format::Json => {
            let j = serde_json::json!({
                "terms": lines.iter().map(|(c, b)| serde_json::json!({
                    "coeff": c, "element": b,
                })).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&j)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

struct SuiteOutcome {
    name: &'static str,
    cases: usize,
    failures: Vec<String>,
}

fn report_outcomes(cli: &Cli, outcomes: Vec<SuiteOutcome>) -> Result<ExitCode, Error> {
    let failed = outcomes.iter().any(|o| !o.failures.is_empty());
    match cli.format {
        Format::Text => {
            for o in &outcomes {
                if o.failures.is_empty() {
                    println!("{:<40} pass ({} cases)", o.name, o.cases);
                } else {
                    println!(
                        "{:<40} FAIL ({} cases, {} failures)",
                        o.name,
                        o.cases,
                        o.failures.len()
                    );
                    println!("    counterexample: {}", o.failures[0]);
                }
            }
        }
        Format::Json => {
            let j = serde_json::json!({
                "suites": outcomes.iter().map(|o| serde_json::json!({
                    "name": o.name,
                    "cases": o.cases,
                    "failures": o.failures,
                })).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&j)?);
        }
    }
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

/// Runs a per-tree check over a basis, in parallel, collecting sorted
/// counterexamples (smallest trees first by kernel edges, degree, then
/// rendering).
fn sweep<F>(ctx: &Context, trees: &[Tree], check: F) -> (usize, Vec<String>)
where
    F: Fn(&Tree) -> Result<bool, Error> + Sync,
{
    let mut failures: Vec<(usize, Degree, String)> = trees
        .par_iter()
        .filter_map(|t| match check(t) {
            Ok(true) => None,
            Ok(false) => Some((
                t.kernel_edge_count(),
                ctx.degree(t, DegreeMode::S),
                t.to_string(),
            )),
            Err(e) => Some((usize::MAX, Degree::zero(), format!("{t}: error {e}"))),
        })
        .collect();
    failures.sort();
    (trees.len(), failures.into_iter().map(|(_, _, s)| s).collect())
}

fn verify(cli: &Cli, arg: &SpecArg, suite: Suite, st: Structure) -> Result<ExitCode, Error> {
    let ctx = load_context(cli, arg)?;
    let basis = match st {
        Structure::Reduced => ctx.circ()?,
        Structure::Extended => ctx.circ_ex()?,
    };
    let trees: Vec<Tree> = basis.trees.clone();
    let mut outcomes = Vec::new();
    match suite {
        Suite::Hopf => {
            let (cases, failures) = sweep(&ctx, &trees, |t| {
                let cp = delta_plus(&ctx, t, PlusDomain::Model, st)?;
                let mut lhs = LinComb::new();
                let mut rhs = LinComb::new();
                for ((a, b), x) in cp.iter() {
                    for ((b1, b2), y) in delta_plus(&ctx, b, PlusDomain::Plus, st)?.iter() {
                        lhs.add_term((a.clone(), b1.clone(), b2.clone()), x * y);
                    }
                    for ((a1, a2), y) in delta_plus(&ctx, a, PlusDomain::Model, st)?.iter() {
                        rhs.add_term((a1.clone(), a2.clone(), b.clone()), x * y);
                    }
                }
                Ok(lhs == rhs)
            });
            outcomes.push(SuiteOutcome {
                name: "positive coassociativity",
                cases,
                failures,
            });
            let (cases, failures) = sweep(&ctx, &trees, |t| {
                let cp = delta_minus(&ctx, t, MinusDomain::Model, st)?;
                let mut lhs = LinComb::new();
                let mut rhs = LinComb::new();
                for ((f, r), x) in cp.iter() {
                    for ((f2, r2), y) in delta_minus(&ctx, r, MinusDomain::Model, st)?.iter() {
                        lhs.add_term((f.clone(), f2.clone(), r2.clone()), x * y);
                    }
                    for ((f1, f2), y) in delta_minus_forest(&ctx, f, st)?.iter() {
                        rhs.add_term((f1.clone(), f2.clone(), r.clone()), x * y);
                    }
                }
                Ok(lhs == rhs)
            });
            outcomes.push(SuiteOutcome {
                name: "negative coassociativity",
                cases,
                failures,
            });
            let minus = match st {
                Structure::Reduced => ctx.minus()?,
                Structure::Extended => ctx.minus_ex()?,
            };
            let (cases, failures) = sweep(&ctx, &minus.trees.clone(), |t| {
                let f = Forest::single(t.clone());
                let cp = delta_minus_forest(&ctx, &f, st)?;
                let mut conv = LinComb::new();
                for ((a, b), x) in cp.iter() {
                    for (s, y) in antipode_minus(&ctx, a, st)?.iter() {
                        conv.add_term(s.join(b), x * y);
                    }
                }
                Ok(conv.is_zero())
            });
            outcomes.push(SuiteOutcome {
                name: "negative antipode convolution",
                cases,
                failures,
            });
        }
        Suite::Cointeraction => {
            let (cases, failures) = sweep(&ctx, &trees, |t| {
                Ok(cointeraction_defect(&ctx, t, st)?.is_zero())
            });
            outcomes.push(SuiteOutcome {
                name: "cointeraction",
                cases,
                failures,
            });
        }
        Suite::Characters => {
            let seed = cli.seed;
            let alg_st = st;
            let f = random_character(&ctx, Algebra::Plus, alg_st, seed)?;
            let fb = random_character(&ctx, Algebra::Plus, alg_st, seed + 1)?;
            let g = random_character(&ctx, Algebra::Minus, alg_st, seed + 2)?;
            let gb = random_character(&ctx, Algebra::Minus, alg_st, seed + 3)?;
            let (cases, failures) = sweep(&ctx, &trees, |t| {
                let lhs = gamma_f(&ctx, &group_product(&f, &fb)?, t)?;
                let mut rhs = LinComb::new();
                for (r, y) in gamma_f(&ctx, &fb, t)?.iter() {
                    for (s, z) in gamma_f(&ctx, &f, r)?.iter() {
                        rhs.add_term(s.clone(), y * z);
                    }
                }
                Ok(lhs == rhs)
            });
            outcomes.push(SuiteOutcome {
                name: "recentring representation",
                cases,
                failures,
            });
            let (cases, failures) = sweep(&ctx, &trees, |t| {
                let lhs = m_g(&ctx, &group_product(&g, &gb)?, t, MinusDomain::Model)?;
                let mut rhs = LinComb::new();
                for (r, y) in m_g(&ctx, &gb, t, MinusDomain::Model)?.iter() {
                    for (s, z) in m_g(&ctx, &g, r, MinusDomain::Model)?.iter() {
                        rhs.add_term(s.clone(), y * z);
                    }
                }
                Ok(lhs == rhs)
            });
            outcomes.push(SuiteOutcome {
                name: "renormalisation representation",
                cases,
                failures,
            });
            if st == Structure::Extended {
                let (cases, failures) = sweep(&ctx, &trees, |t| {
                    Ok(recentring_defect(&ctx, &g, &f, t)?.is_zero())
                });
                outcomes.push(SuiteOutcome {
                    name: "recentring covariance",
                    cases,
                    failures,
                });
            }
            let gens = plus_generators(&ctx, st)?;
            let finv = inverse(&f);
            let prod = group_product(&f, &finv)?;
            let (cases, failures) = sweep(&ctx, &gens, |t| {
                let expected = if t.is_unit() { qi_one() } else { qi_zero() };
                Ok(prod.on_generator(&ctx, t)? == expected)
            });
            outcomes.push(SuiteOutcome {
                name: "inverse via antipode",
                cases,
                failures,
            });
            if st == Structure::Extended {
                let lhs_char = twist(&group_product(&f, &fb)?, &g)?;
                let rhs_char = group_product(&twist(&f, &g)?, &twist(&fb, &g)?)?;
                let (cases, failures) = sweep(&ctx, &gens, |t| {
                    Ok(lhs_char.on_generator(&ctx, t)? == rhs_char.on_generator(&ctx, t)?)
                });
                outcomes.push(SuiteOutcome {
                    name: "renormalised group action",
                    cases,
                    failures,
                });
            }
        }
        Suite::Prelie => {
            let small: Vec<Tree> = trees
                .iter()
                .filter(|t| t.edge_count() <= 3 && t.poly().total() <= 1)
                .cloned()
                .collect();
            let derivs = [
                MultiIndex::zero(ctx.dim()),
                MultiIndex::unit(ctx.dim(), 0),
            ];
            let mut failures = Vec::new();
            let mut cases = 0usize;
            for x in &small {
                for y in &small {
                    for z in &small {
                        for p in &derivs {
                            for qd in &derivs {
                                cases += 1;
                                let assoc = |a: &Tree, pa: &MultiIndex, b: &Tree, pb: &MultiIndex| {
                                    let mut acc = LinComb::new();
                                    for (w, cw) in hgraft(b, z, pb).iter() {
                                        for (v, cv) in hgraft(a, &w, pa).iter() {
                                            acc.add_term(v.clone(), cw * cv);
                                        }
                                    }
                                    for (w, cw) in hgraft(a, b, pa).iter() {
                                        for (v, cv) in hgraft(&w, z, pb).iter() {
                                            acc.add_term(v.clone(), -(cw * cv));
                                        }
                                    }
                                    acc
                                };
                                if assoc(x, p, y, qd) != assoc(y, qd, x, p) {
                                    failures.push(format!("x={x} y={y} z={z}"));
                                }
                            }
                        }
                    }
                }
            }
            outcomes.push(SuiteOutcome {
                name: "pre-Lie identity (decorated grafting)",
                cases,
                failures,
            });
        }
        Suite::GraftAdjoint => {
            let small: Vec<Tree> = trees
                .iter()
                .filter(|t| t.edge_count() <= 3 && t.poly().total() <= 1)
                .cloned()
                .collect();
            let sigmas: Vec<Tree> = trees
                .iter()
                .filter(|t| t.edge_count() <= 4 && t.poly().total() <= 2)
                .cloned()
                .collect();
            let p = MultiIndex::zero(ctx.dim());
            let mut failures = Vec::new();
            let mut cases = 0usize;
            for sub in &small {
                for host in &small {
                    for sigma in &sigmas {
                        cases += 1;
                        let lhs = regcalc_core::trees::inner_product(
                            &hgraft(sub, host, &p),
                            &LinComb::basis(sigma.clone()),
                        );
                        let mut rhs = regcalc_core::algebra::q_zero();
                        for ((l, r), x) in hgraft_star(sigma, &p).iter() {
                            if l == sub && r == host {
                                rhs += x * sub.factorial() * host.factorial();
                            }
                        }
                        if lhs != rhs {
                            failures.push(format!("sub={sub} host={host} sigma={sigma}"));
                        }
                    }
                }
            }
            outcomes.push(SuiteOutcome {
                name: "grafting adjointness",
                cases,
                failures,
            });
        }
        Suite::Morphisms => {
            let p = MultiIndex::zero(ctx.dim());
            let (cases, failures) = sweep(&ctx, &trees, |t| {
                let via_cp: LinComb<(Tree, Tree)> = {
                    let mut out = LinComb::new();
                    for ((l, r), x) in
                        regcalc_core::coproducts::delta2_kernel_slot(&ctx, t, &p).iter()
                    {
                        if ctx.extended_conforms(l)? && ctx.extended_conforms(r)? {
                            out.add_term((l.clone(), r.clone()), x.clone());
                        }
                    }
                    out
                };
                Ok(via_cp == bgraft_star(&ctx, t, &p)?)
            });
            outcomes.push(SuiteOutcome {
                name: "composite vs direct grafting adjoint",
                cases,
                failures,
            });
            let report = generators_check(&ctx)?;
            outcomes.push(SuiteOutcome {
                name: "generator reachability",
                cases: report.total,
                failures: report.failures.iter().map(|t| t.to_string()).collect(),
            });
        }
    }
    report_outcomes(cli, outcomes)
}

fn qi_one() -> regcalc_core::Q {
    regcalc_core::algebra::qi(1)
}

fn qi_zero() -> regcalc_core::Q {
    regcalc_core::algebra::qi(0)
}

fn nonlin_json(e: &NonlinExpr) -> serde_json::Value {
    serde_json::json!({
        "rendered": e.to_string(),
        "terms": e.terms().map(|(t, c)| serde_json::json!({
            "coeff": format_q(c),
            "factors": t.factors().iter().map(|(f, pow)| {
                let mut j = match f {
                    regcalc_core::nonlin::Factor::Coord(et) => serde_json::json!({
                        "type": "coordinate",
                        "kind": if et.is_kernel() { "I" } else { "Xi" },
                        "deriv": et.deriv.entries(),
                    }),
                    regcalc_core::nonlin::Factor::Fn { name, args, order } => serde_json::json!({
                        "type": "function",
                        "name": name,
                        "order": order,
                        "args": args.iter().map(|a| serde_json::json!({
                            "kind": if a.is_kernel() { "I" } else { "Xi" },
                            "deriv": a.deriv.entries(),
                        })).collect::<Vec<_>>(),
                    }),
                };
                j["power"] = serde_json::json!(pow);
                j
            }).collect::<Vec<_>>(),
        })).collect::<Vec<_>>(),
    })
}

fn spec_nonlinearity(ctx: &Context) -> Result<NonlinExpr, Error> {
    let src = ctx
        .spec()
        .nonlinearity
        .clone()
        .ok_or_else(|| Error::Invalid("spec has no non-linearity".into()))?;
    Ok(parse_nonlin(&src, ctx.dim())?)
}

fn upsilon_cmd(cli: &Cli, arg: &SpecArg, tree: &str) -> Result<ExitCode, Error> {
    let ctx = load_context(cli, arg)?;
    let t = parse_tree(tree, ctx.dim())?;
    let f = ExtNonlin::reduced(spec_nonlinearity(&ctx)?);
    let result = upsilon(&f, &t);
    match cli.format {
        Format::Text => println!("{result}"),
        Format::Json => println!("{}", serde_json::to_string_pretty(&nonlin_json(&result))?),
    }
    Ok(ExitCode::SUCCESS)
}

fn renormalize(cli: &Cli, arg: &SpecArg, character: &str) -> Result<ExitCode, Error> {
    let ctx = load_context(cli, arg)?;
    let src = std::fs::read_to_string(character)?;
    let g = character_from_json(&src, ctx.dim())?;
    let f = spec_nonlinearity(&ctx)?;
    let fg = counterterms(&ctx, &f, &g)?;
    // Cross-check against the adjoint route before reporting.
    let fg2 = counterterms_via_adjoint(&ctx, &f, &g)?;
    if fg != fg2 {
        return Err(Error::Invalid(
            "internal inconsistency: counterterm routes disagree".into(),
        ));
    }
    match cli.format {
        Format::Text => {
            for (a, expr) in fg.iter() {
                println!("F^g[{a}] = {expr}");
            }
        }
        Format::Json => {
            let j = serde_json::json!({
                "components": fg.iter().map(|(a, expr)| serde_json::json!({
                    "degree": a.to_string(),
                    "expression": nonlin_json(expr),
                })).collect::<Vec<_>>(),
            });
            println!("{}", serde_json::to_string_pretty(&j)?);
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn solve_jet_cmd(
    cli: &Cli,
    arg: &SpecArg,
    character: Option<&str>,
    check: bool,
) -> Result<ExitCode, Error> {
    let ctx = load_context(cli, arg)?;
    let f = spec_nonlinearity(&ctx)?;
    let bf = match character {
        Some(path) => {
            let src = std::fs::read_to_string(path)?;
            let g = character_from_json(&src, ctx.dim())?;
            counterterms(&ctx, &f, &g)?
        }
        None => ExtNonlin::reduced(f),
    };
    let keys = Jet::standard_poly_keys(&ctx, &bf);
    let poly: BTreeMap<MultiIndex, regcalc_core::PolyQ> = keys
        .iter()
        .map(|k| {
            (
                k.clone(),
                regcalc_core::PolyQ::atom(regcalc_core::algebra::Atom::Coeff(k.clone())),
            )
        })
        .collect();
    let max_edges = ctx.spec().cutoffs.max_kernel_edges;
    let u = solve_jet(&ctx, &bf, poly, max_edges)?;
    let coherent = if check {
        Some(coherence_check(&ctx, &bf, &u)?)
    } else {
        None
    };
    match cli.format {
        Format::Text => {
            for (t, c) in &u.nonpoly {
                if !c.is_zero() {
                    println!("u[I[{t}]] = {c}");
                }
            }
            if let Some(ok) = coherent {
                println!("coherent: {}", if ok { "yes" } else { "no" });
            }
        }
        Format::Json => {
            let j = serde_json::json!({
                "coefficients": u.nonpoly.iter().filter(|(_, c)| !c.is_zero()).map(|(t, c)| serde_json::json!({
                    "tree": format!("I[{t}]"),
                    "value": c.to_string(),
                })).collect::<Vec<_>>(),
                "coherent": coherent,
            });
            println!("{}", serde_json::to_string_pretty(&j)?);
        }
    }
    match coherent {
        Some(false) => Ok(ExitCode::from(1)),
        _ => Ok(ExitCode::SUCCESS),
    }
}

//! Command-line front end: config loading, overrides, dispatch and output.
//! Every subcommand maps keys onto a library config, runs it and writes the
//! report; no numerics live here.

use std::collections::BTreeMap;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

use crate::credit::{standard_tranches, PaymentSchedule};
use crate::error::{Error, Result};
use crate::fdcore::ModelParams;
use crate::harness::output::{self, Summary, Table};
use crate::harness::{
    converge_bounded, converge_unbounded, fourier_mode_accuracy, mlmc_complexity, particle_compare,
    price_tranches, regularity_diagnostic, ComplexityConfig, ConvergenceConfig, ConvergenceReport,
    FourierConfig, ParticleCompareConfig, PricingConfig, PricingSetup, RegularityConfig,
};
use crate::mlmc::MlmcConfig;
use crate::stability::{
    check_stability, stability_scan, sup_amplification, verify_matrix_eigenstructure,
};

pub const EXPERIMENTS: [&str; 10] = [
    "stability-scan",
    "eigencheck",
    "converge-unbounded",
    "converge-bounded",
    "fourier-accuracy",
    "regularity",
    "price-tranches",
    "price-discrete",
    "particle-compare",
    "mlmc-complexity",
];

const USAGE: &str = "usage: spde-mlmc <experiment> [--config PATH] [--seed N] [--out DIR] [--threads N] [--KEY VALUE ...]
experiments: stability-scan eigencheck converge-unbounded converge-bounded fourier-accuracy
             regularity price-tranches price-discrete particle-compare mlmc-complexity";

/// One experiment invocation after merging the config file and the flags.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub experiment: String,
    pub seed: u64,
    pub out: PathBuf,
    pub threads: Option<usize>,
    /// Experiment keys, checked by the experiment that consumes them.
    pub overrides: BTreeMap<String, String>,
}

impl RunConfig {
    /// Parses `argv` without the program name.
    pub fn from_args(args: &[String]) -> Result<Self> {
        let mut it = args.iter();
        let experiment = it
            .next()
            .ok_or_else(|| Error::Config("missing experiment name".into()))?
            .clone();
        if !EXPERIMENTS.contains(&experiment.as_str()) {
            return Err(Error::Config(format!("unknown experiment `{experiment}`")));
        }
        let mut flags = Vec::new();
        while let Some(arg) = it.next() {
            let key = arg
                .strip_prefix("--")
                .ok_or_else(|| Error::Config(format!("unexpected argument `{arg}`")))?;
            let (key, value) = match key.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => {
                    let v = it
                        .next()
                        .ok_or_else(|| Error::Config(format!("flag --{key} needs a value")))?;
                    (key.to_string(), v.clone())
                }
            };
            flags.push((key, value));
        }
        let mut merged = BTreeMap::new();
        if let Some((_, path)) = flags.iter().find(|(k, _)| k == "config") {
            let text = fs::read_to_string(path)?;
            merged.extend(parse_config_file(&text)?);
        }
        for (k, v) in flags {
            if k != "config" {
                merged.insert(k, v);
            }
        }
        let seed = match merged.remove("seed") {
            Some(v) => parse_value("seed", &v)?,
            None => 0,
        };
        let out = PathBuf::from(merged.remove("out").unwrap_or_else(|| "out".into()));
        let threads = match merged.remove("threads") {
            Some(v) => Some(parse_value::<usize>("threads", &v)?).filter(|&n| n > 0),
            None => None,
        };
        Ok(Self {
            experiment,
            seed,
            out,
            threads,
            overrides: merged,
        })
    }
}

/// Flat `key = value` lines; `#` starts a comment.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value `{value}` for {key}")))
}

/// Remaining keys; each experiment takes what it understands and rejects the rest.
#[derive(Default)]
struct Keys(BTreeMap<String, String>);

impl Keys {
    fn set<T: FromStr>(&mut self, key: &str, target: &mut T) -> Result<()> {
        if let Some(v) = self.0.remove(key) {
            *target = parse_value(key, &v)?;
        }
        Ok(())
    }

    fn list<T: FromStr>(&mut self, key: &str, target: &mut Vec<T>) -> Result<()> {
        if let Some(v) = self.0.remove(key) {
            *target = v
                .split(',')
                .map(|s| parse_value(key, s.trim()))
                .collect::<Result<_>>()?;
        }
        Ok(())
    }

    fn params(&mut self, base: ModelParams) -> Result<ModelParams> {
        let (mut sigma, mut rho, mut r) = (base.sigma, base.rho, base.r);
        self.set("sigma", &mut sigma)?;
        self.set("rho", &mut rho)?;
        self.set("r", &mut r)?;
        let mut p = ModelParams::credit(sigma, rho, r)?;
        if let Some(v) = self.0.remove("mu") {
            p = p.with_mu(parse_value("mu", &v)?)?;
        }
        Ok(p)
    }

    fn mlmc(&mut self, mut cfg: MlmcConfig, seed: u64) -> Result<MlmcConfig> {
        self.set("warmup", &mut cfg.warmup)?;
        self.set("l_min", &mut cfg.l_min)?;
        self.set("l_max", &mut cfg.l_max)?;
        cfg.experiment_seed = seed;
        Ok(cfg)
    }

    fn pricing_setup(&mut self, mut s: PricingSetup) -> Result<PricingSetup> {
        s.params = self.params(s.params)?;
        self.set("x0", &mut s.x0)?;
        self.set("x_min", &mut s.x_min)?;
        self.set("x_max", &mut s.x_max)?;
        self.set("h0", &mut s.h0)?;
        self.set("k0", &mut s.k0)?;
        self.set("scheme", &mut s.scheme)?;
        let (mut maturity, mut delta, mut rate) =
            (s.schedule.maturity(), s.schedule.delta(), s.schedule.rate());
        self.set("maturity", &mut maturity)?;
        self.set("delta", &mut delta)?;
        self.set("rate", &mut rate)?;
        s.schedule = PaymentSchedule::regular(maturity, delta, rate)?;
        if let Some(v) = self.0.remove("recovery") {
            s.tranches = standard_tranches(parse_value("recovery", &v)?)?;
        }
        if let Some(v) = self.0.remove("tranches") {
            match v.as_str() {
                "all" => {}
                "first" => s = s.first_tranche_only(),
                _ => {
                    return Err(Error::Config(format!(
                        "tranches must be all or first, got `{v}`"
                    )))
                }
            }
        }
        Ok(s)
    }

    fn finish(self) -> Result<()> {
        match self.0.keys().next() {
            None => Ok(()),
            Some(k) => Err(Error::Config(format!(
                "unknown key `{k}` for this experiment"
            ))),
        }
    }
}

/// Tables to write and the summary to print.
struct Outcome {
    tables: Vec<(&'static str, Table)>,
    summary: Summary,
}

/// Runs one experiment and writes `<out>/<experiment>_<table>.csv` plus
/// `<out>/<experiment>_summary.txt`. Returns the summary text.
pub fn run(cfg: &RunConfig) -> Result<String> {
    let outcome = match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| execute(cfg))?,
        None => execute(cfg)?,
    };
    fs::create_dir_all(&cfg.out)?;
    for (name, table) in &outcome.tables {
        table.write_csv(&cfg.out.join(format!("{}_{name}.csv", cfg.experiment)))?;
    }
    let text = outcome.summary.render();
    fs::write(
        cfg.out.join(format!("{}_summary.txt", cfg.experiment)),
        &text,
    )?;
    Ok(text)
}

/// Entry point for the binary; returns the process exit status.
pub fn dispatch(args: &[String]) -> i32 {
    if args.is_empty() || args[0] == "--help" || args[0] == "-h" {
        println!("{USAGE}");
        return if args.is_empty() { 2 } else { 0 };
    }
    let cfg = match RunConfig::from_args(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}\n{USAGE}");
            return 2;
        }
    };
    match run(&cfg) {
        Ok(text) => {
            print!("{text}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let mut keys = Keys(cfg.overrides.clone());
    let mut summary = Summary::new();
    summary
        .text("experiment", &cfg.experiment)
        .text("seed", cfg.seed);
    let tables = match cfg.experiment.as_str() {
        "stability-scan" => stability(&mut keys, &mut summary)?,
        "eigencheck" => eigencheck(&mut keys, &mut summary)?,
        "converge-unbounded" | "converge-bounded" => {
            let bounded = cfg.experiment == "converge-bounded";
            convergence(&mut keys, &mut summary, cfg.seed, bounded)?
        }
        "fourier-accuracy" => fourier(&mut keys, &mut summary, cfg.seed)?,
        "regularity" => regularity(&mut keys, &mut summary, cfg.seed)?,
        "price-tranches" => pricing(
            &mut keys,
            &mut summary,
            cfg.seed,
            PricingSetup::continuous(),
        )?,
        "price-discrete" => pricing(&mut keys, &mut summary, cfg.seed, PricingSetup::discrete())?,
        "particle-compare" => particles(&mut keys, &mut summary, cfg.seed)?,
        "mlmc-complexity" => complexity(&mut keys, &mut summary, cfg.seed)?,
        other => return Err(Error::Config(format!("unknown experiment `{other}`"))),
    };
    Ok(Outcome { tables, summary })
}

type Tables = Vec<(&'static str, Table)>;

fn stability(keys: &mut Keys, s: &mut Summary) -> Result<Tables> {
    let params = keys.params(ModelParams::reference())?;
    let (mut h, mut k, mut points) = (1.6, 0.25, 10_000usize);
    keys.set("h", &mut h)?;
    keys.set("k", &mut k)?;
    keys.set("points", &mut points)?;
    std::mem::take(keys).finish()?;
    let scan = stability_scan(&params, h, k, points);
    let scan_max = scan.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    let (theta_star, sup) = sup_amplification(&params, h, k, points);
    let check = check_stability(&params, h, k);
    s.float("h", h)
        .float("k", k)
        .float("mesh_ratio", k / (h * h))
        .float("scan_max", scan_max)
        .float("sup_theta", theta_star)
        .float("sup_amplification", sup)
        .float("margin_drift", check.margin_drift)
        .float("margin_mesh", check.margin_mesh)
        .flag("stable", check.stable)
        .flag("scan_max_le_one", scan_max <= 1.0);
    Ok(vec![("scan", output::stability_table(&scan))])
}

fn eigencheck(keys: &mut Keys, s: &mut Summary) -> Result<Tables> {
    let params = keys.params(ModelParams::reference())?;
    let (mut j, mut h, mut k) = (6usize, 1.6, 0.25);
    keys.set("J", &mut j)?;
    keys.set("h", &mut h)?;
    keys.set("k", &mut k)?;
    std::mem::take(keys).finish()?;
    let dev = verify_matrix_eigenstructure(j, &params, h, k)?;
    s.text("J", j)
        .float("max_deviation", dev)
        .flag("within_1e-12", dev <= 1e-12);
    let mut t = Table::new(&["J", "max_deviation"]);
    t.push(vec![j.to_string(), output::fmt_f64(dev)]);
    Ok(vec![("deviation", t)])
}

fn report_convergence(s: &mut Summary, r: &ConvergenceReport, target: f64, band: f64) -> Tables {
    s.fit("log2_fit", &r.fit)
        .flag("slope_in_band", (r.fit.slope - target).abs() <= band);
    vec![("levels", output::convergence_table(r))]
}

fn convergence(keys: &mut Keys, s: &mut Summary, seed: u64, bounded: bool) -> Result<Tables> {
    let mut c = if bounded {
        ConvergenceConfig::bounded()
    } else {
        ConvergenceConfig::unbounded()
    };
    c.params = keys.params(c.params)?;
    c.seed = seed;
    keys.set("x0", &mut c.x0)?;
    keys.set("maturity", &mut c.maturity)?;
    if !bounded {
        keys.set("x_min", &mut c.x_min)?;
    }
    keys.set("x_max", &mut c.x_max)?;
    keys.set("h0", &mut c.h0)?;
    keys.set("k0", &mut c.k0)?;
    keys.set("levels", &mut c.max_level)?;
    keys.set("paths", &mut c.paths)?;
    keys.set("scheme", &mut c.scheme)?;
    std::mem::take(keys).finish()?;
    let r = if bounded {
        converge_bounded(&c)?
    } else {
        converge_unbounded(&c)?
    };
    Ok(report_convergence(s, &r, -4.0, 0.6))
}

fn fourier(keys: &mut Keys, s: &mut Summary, seed: u64) -> Result<Tables> {
    let mut c = FourierConfig {
        seed,
        ..Default::default()
    };
    c.params = keys.params(c.params)?;
    keys.set("kappa", &mut c.kappa)?;
    keys.set("maturity", &mut c.maturity)?;
    keys.set("h0", &mut c.h0)?;
    keys.set("k0", &mut c.k0)?;
    keys.set("levels", &mut c.max_level)?;
    keys.set("paths", &mut c.paths)?;
    std::mem::take(keys).finish()?;
    Ok(report_convergence(
        s,
        &fourier_mode_accuracy(&c)?,
        -2.0,
        0.3,
    ))
}

fn regularity(keys: &mut Keys, s: &mut Summary, seed: u64) -> Result<Tables> {
    let mut c = RegularityConfig {
        seed,
        ..Default::default()
    };
    c.params = keys.params(c.params)?;
    keys.set("x0", &mut c.x0)?;
    keys.set("maturity", &mut c.maturity)?;
    keys.set("x_max", &mut c.x_max)?;
    keys.set("h0", &mut c.h0)?;
    keys.set("k0", &mut c.k0)?;
    keys.set("levels", &mut c.max_level)?;
    keys.set("paths", &mut c.paths)?;
    std::mem::take(keys).finish()?;
    let rows = regularity_diagnostic(&c)?;
    let upper: Vec<_> = rows.iter().filter(|r| r.level >= 1).collect();
    let increasing = upper.windows(2).all(|w| w[1].variance > w[0].variance);
    let means: Vec<f64> = upper.iter().map(|r| r.mean.abs()).collect();
    let ratio = means.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        / means.iter().cloned().fold(f64::INFINITY, f64::min);
    s.flag("variance_increasing", increasing)
        .float("mean_ratio", ratio)
        .flag("mean_ratio_le_two", ratio <= 2.0);
    Ok(vec![("levels", output::regularity_table(&rows))])
}

fn pricing(keys: &mut Keys, s: &mut Summary, seed: u64, base: PricingSetup) -> Result<Tables> {
    let mut c = PricingConfig::new(keys.pricing_setup(base)?);
    c.mlmc = keys.mlmc(c.mlmc, seed)?;
    keys.list("epsilons", &mut c.epsilons)?;
    keys.list("diag_samples", &mut c.diagnostic_samples)?;
    std::mem::take(keys).finish()?;
    let r = price_tranches(&c)?;
    if let Some(rates) = &r.rates {
        s.fit("alpha", &rates.alpha)
            .fit("beta", &rates.beta)
            .fit("gamma", &rates.gamma);
    }
    for (i, q) in r.quotes.iter().enumerate() {
        s.float(&format!("tranche{i}_protection"), q.protection)
            .float(&format!("tranche{i}_spread_bp"), q.spread * 1e4);
    }
    Ok(vec![
        ("levels", output::level_table(&r.diagnostics)),
        ("epsilon", output::epsilon_table(&r.runs)),
        ("quotes", output::quote_table(&r.quotes)),
    ])
}

fn particles(keys: &mut Keys, s: &mut Summary, seed: u64) -> Result<Tables> {
    let mut c = ParticleCompareConfig {
        seed,
        ..Default::default()
    };
    c.setup = keys.pricing_setup(c.setup)?;
    c.mlmc = keys.mlmc(c.mlmc, seed)?;
    keys.set("epsilon", &mut c.spde_epsilon)?;
    keys.set("firms", &mut c.n_firms)?;
    keys.set("baskets", &mut c.baskets)?;
    std::mem::take(keys).finish()?;
    let r = particle_compare(&c)?;
    s.float("z_score", r.z_score)
        .flag("agree_within_3_sigma", r.agree);
    Ok(vec![("values", output::comparison_table(&r))])
}

fn complexity(keys: &mut Keys, s: &mut Summary, seed: u64) -> Result<Tables> {
    let mut c = ComplexityConfig {
        seed,
        ..Default::default()
    };
    c.setup = keys.pricing_setup(c.setup)?;
    c.mlmc = keys.mlmc(c.mlmc, seed)?;
    keys.list("spde_epsilons", &mut c.spde_epsilons)?;
    keys.list("sde_epsilons", &mut c.sde_epsilons)?;
    keys.set("fixed_firms", &mut c.fixed_firms)?;
    keys.set("firms_per_inverse_eps", &mut c.firms_per_inverse_eps)?;
    std::mem::take(keys).finish()?;
    let r = mlmc_complexity(&c)?;
    s.fit("spde_cost", &r.spde.fit)
        .fit("sde_fixed_cost", &r.sde_fixed.fit)
        .fit("sde_scaled_cost", &r.sde_scaled.fit);
    if let Some(reg) = &r.spde_regime {
        s.text("spde_regime", format!("{:?}", reg.regime))
            .float("spde_eps_exponent", reg.eps_exponent);
    }
    Ok(vec![
        ("spde", output::cost_table(&r.spde)),
        ("sde_fixed", output::cost_table(&r.sde_fixed)),
        ("sde_scaled", output::cost_table(&r.sde_scaled)),
    ])
}

//! Turns a config into report records.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use poisson_ou::dsl;
use poisson_ou::examples::{fk_demonstration, near_optimality_point, one_dim_cumulative, Increments, MaximaModel};
use poisson_ou::ground::DEFAULT_TAIL_MASS;
use poisson_ou::inequalities::{
    check_concentration, check_entropy_power, check_min_form_lsi, check_modified_lsi, check_pathwise_lemma,
    check_poincare, check_restricted_hypercontractivity, check_talagrand, check_weak_hypercontractivity,
    l1_variance_bound, LsiFailureScan, CATALOG,
};
use poisson_ou::report::Precision;
use poisson_ou::{
    Functional, Gate, GroundSpace, InequalityReport, McSettings, Relation, SemigroupEngine, TalagrandForm,
    TruncatedStateSpace, Verdict,
};
use rayon::prelude::*;

use crate::config::{CheckSpec, ExperimentConfig, ModeSpec};
use crate::error::CliError;

/// Example ids accepted in a check list. They follow the catalog in reports.
pub const EXAMPLE_IDS: &[&str] = &["cumulative", "counterexample", "maxima", "near_optimality"];

/// Command-line values that take precedence over the config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub tail_mass: Option<f64>,
    pub budget: Option<u64>,
    pub mode: Option<ModeSpec>,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.seed = seed;
        }
        if let Some(tail) = o.tail_mass {
            self.truncation.tail_mass = Some(tail);
            self.truncation.caps = None;
        }
        if let Some(budget) = o.budget {
            self.truncation.budget = budget;
        }
        if let Some(mode) = o.mode {
            self.mode = mode;
        }
        if let Some(out) = &o.out {
            self.output.dir = out.to_string_lossy().into_owned();
        }
    }

    pub fn report_path(&self) -> PathBuf {
        Path::new(&self.output.dir).join(&self.output.report)
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub records: Vec<InequalityReport>,
}

impl RunOutcome {
    /// Violations count unless tagged as demonstrations.
    pub fn failures(&self) -> usize {
        self.records
            .iter()
            .filter(|r| r.verdict == Verdict::Violated && !r.is_demonstration())
            .count()
    }

    pub fn exit_code(&self) -> i32 {
        i32::from(self.failures() > 0)
    }

    pub fn render(&self) -> String {
        self.records.iter().map(|r| r.to_record_line() + "\n").collect()
    }

    pub fn summary(&self) -> String {
        let count = |v: Verdict| self.records.iter().filter(|r| r.verdict == v).count();
        let demos = self.records.iter().filter(|r| r.is_demonstration()).count();
        format!(
            "{} records: {} holds, {} holds-within-stat-error, {} hypothesis-not-met, {} violated ({} demonstrations)",
            self.records.len(),
            count(Verdict::Holds),
            count(Verdict::HoldsWithinStatError),
            count(Verdict::HypothesisNotMet),
            count(Verdict::Violated),
            demos
        )
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let io = |source| CliError::Io {
            path: path.display().to_string(),
            source,
        };
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).map_err(io)?;
        }
        fs::write(path, self.render()).map_err(io)
    }
}

fn rank(id: &str) -> Option<usize> {
    CATALOG
        .iter()
        .map(|c| c.id)
        .chain(EXAMPLE_IDS.iter().copied())
        .position(|known| known == id)
}

fn uses_engine(id: &str) -> bool {
    !matches!(id, "pathwise_lemma" | "lsi_failure") && !EXAMPLE_IDS.contains(&id)
}

struct Task<'a> {
    index: usize,
    spec: &'a CheckSpec,
    functional: Option<(&'a str, &'a Functional)>,
}

struct Context<'a> {
    config: &'a ExperimentConfig,
    engine: Option<SemigroupEngine>,
}

/// Parses every named functional, checking atoms against the space.
pub fn compile_functionals(config: &ExperimentConfig) -> Result<BTreeMap<String, Functional>, CliError> {
    let atoms = config.space.weights.len();
    config
        .functionals
        .iter()
        .map(|(name, src)| {
            let expr = dsl::parse(src).map_err(|source| CliError::Functional {
                name: name.clone(),
                source,
            })?;
            if let Some(max) = expr.max_atom().filter(|&m| m >= atoms) {
                return Err(CliError::Usage(format!(
                    "functional `{name}` refers to atom {max}, but the space has {atoms} atoms"
                )));
            }
            Ok((name.clone(), expr.to_functional().with_label(name.clone())))
        })
        .collect()
}

fn build_engine(config: &ExperimentConfig) -> Result<SemigroupEngine, CliError> {
    let space = GroundSpace::new(config.space.weights.clone())?;
    let engine = match config.mode {
        ModeSpec::Exact => SemigroupEngine::exact(truncation(config, space)?)?,
        ModeSpec::Mc => SemigroupEngine::monte_carlo(
            space,
            McSettings {
                replications: config.replications,
                inner_replications: config.inner_replications,
                seed: config.seed,
            },
        )?,
    };
    Ok(engine)
}

fn truncation(config: &ExperimentConfig, space: GroundSpace) -> Result<TruncatedStateSpace, CliError> {
    let t = &config.truncation;
    Ok(match &t.caps {
        Some(caps) => TruncatedStateSpace::with_caps(space, caps.clone(), t.budget)?,
        None => TruncatedStateSpace::from_tail_mass(space, t.tail_mass.unwrap_or(DEFAULT_TAIL_MASS), t.budget)?,
    })
}

/// Exact one-atom engine used by the examples, which carry their own `λ`.
fn one_atom_engine(config: &ExperimentConfig, lambda: f64) -> Result<SemigroupEngine, CliError> {
    Ok(SemigroupEngine::exact(truncation(
        config,
        GroundSpace::single(lambda)?,
    )?)?)
}

impl Task<'_> {
    fn fail(&self, message: impl Into<String>) -> CliError {
        CliError::Check {
            index: self.index,
            id: self.spec.id.clone(),
            message: message.into(),
        }
    }

    fn grid<'g, T>(&self, name: &str, values: &'g [T]) -> Result<&'g [T], CliError> {
        if values.is_empty() {
            Err(self.fail(format!("parameter `{name}` is required")))
        } else {
            Ok(values)
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        let s = self.spec;
        if uses_engine(&s.id) && self.functional.is_none() {
            return Err(self.fail("a `functional` is required"));
        }
        match s.id.as_str() {
            "pathwise_lemma" => {
                self.grid("a", &s.a)?;
                self.grid("b", &s.b)?;
                self.grid("q", &s.q)?;
            }
            "entropy_power" => {
                self.grid("q", &s.q)?;
            }
            "restricted_hypercontractivity" => {
                self.grid("t", &s.t)?;
                self.grid("p", &s.p)?;
            }
            "weak_hypercontractivity" | "concentration" => {
                self.grid("t", &s.t)?;
            }
            "lsi_failure" => {
                self.grid("k", &s.k)?;
                s.c.ok_or_else(|| self.fail("parameter `c` is required"))?;
            }
            "cumulative" => {
                self.grid("level", &s.level)?;
                self.grid("lambda", &s.lambda)?;
            }
            "counterexample" => {
                self.grid("k", &s.k)?;
            }
            "maxima" => {
                self.grid("m", &s.m)?;
            }
            "near_optimality" => {
                self.grid("a", &s.a)?;
                self.grid("q", &s.q)?;
            }
            _ => {}
        }
        Ok(())
    }

    fn execute(&self, ctx: &Context<'_>) -> Result<Vec<InequalityReport>, CliError> {
        let s = self.spec;
        let gate = s.gate.map_or(Gate::Enforce, Gate::from);
        let floor = s.floor.unwrap_or(0.0);
        let mut out = Vec::new();
        if let (Some((name, f)), Some(e)) = (self.functional, ctx.engine.as_ref()) {
            match s.id.as_str() {
                "poincare" => out.push(check_poincare(e, f)?),
                "modified_lsi" => out.push(check_modified_lsi(e, f, floor)?.with_param("floor", floor)),
                "min_form_lsi" => out.push(check_min_form_lsi(e, f, floor)?.with_param("floor", floor)),
                "entropy_power" => {
                    for &q in &s.q {
                        out.push(check_entropy_power(e, f, q, gate)?.with_param("q", q));
                    }
                }
                "restricted_hypercontractivity" => {
                    for &t in &s.t {
                        for &p in &s.p {
                            out.push(
                                check_restricted_hypercontractivity(e, f, t, p, gate)?
                                    .with_param("t", t)
                                    .with_param("p", p),
                            );
                        }
                    }
                }
                "weak_hypercontractivity" => {
                    for &t in &s.t {
                        out.push(check_weak_hypercontractivity(e, f, t)?.with_param("t", t));
                    }
                }
                "talagrand" => {
                    let form = s.form.map_or(TalagrandForm::Printed, TalagrandForm::from);
                    out.push(check_talagrand(e, f, form, gate)?);
                }
                "l1_variance" => out.push(l1_variance_bound(e, f, gate)?),
                "concentration" => out.push(check_concentration(e, f, &s.t, gate)?),
                other => return Err(self.fail(format!("`{other}` does not take a functional"))),
            }
            for r in &mut out {
                r.params.insert("functional".into(), name.to_string());
                r.params.insert("mode".into(), e.mode().as_str().into());
            }
            return Ok(out);
        }
        match s.id.as_str() {
            "pathwise_lemma" => {
                for &a in &s.a {
                    for &b in &s.b {
                        for &q in &s.q {
                            out.push(check_pathwise_lemma(a, b, q)?);
                        }
                    }
                }
            }
            "lsi_failure" => {
                let c = s.c.unwrap_or_default();
                for &k in &s.k {
                    out.push(LsiFailureScan::new(k)?.report(c).with_param("c", c));
                }
            }
            "cumulative" => {
                let form = s.form.map_or(TalagrandForm::OneAtom, TalagrandForm::from);
                for &level in &s.level {
                    for &lambda in &s.lambda {
                        let cum = one_dim_cumulative(Increments::indicator(level), lambda)?;
                        let e = one_atom_engine(ctx.config, lambda)?;
                        let mut r = check_talagrand(&e, &cum.functional, form, gate)?
                            .with_param("level", level)
                            .with_param("lambda", lambda);
                        r.name = "cumulative_talagrand".into();
                        out.push(r);
                    }
                }
            }
            "counterexample" => {
                for &k in &s.k {
                    let mut r = fk_demonstration(k)?;
                    r.name = "counterexample_fk".into();
                    out.push(r);
                }
            }
            "maxima" => {
                let f = MaximaModel::functional();
                for &m in &s.m {
                    let e = one_atom_engine(ctx.config, m)?;
                    let mut p = check_poincare(&e, &f)?.with_param("m", m);
                    p.name = "maxima_poincare".into();
                    let mut t = check_talagrand(&e, &f, TalagrandForm::OneAtom, gate)?.with_param("m", m);
                    t.name = "maxima_talagrand".into();
                    out.extend([p, t]);
                }
            }
            "near_optimality" => {
                for &a in &s.a {
                    for &q in &s.q {
                        let row = near_optimality_point(a, q)?;
                        out.push(
                            InequalityReport::new(
                                "near_optimality",
                                Relation::LessEqual,
                                row.lhs,
                                row.rhs,
                                Precision::Exact { tolerance: 0.0 },
                            )
                            .with_param("a", a)
                            .with_param("q", q)
                            .with_param("ratio", row.ratio),
                        );
                    }
                }
            }
            other => return Err(self.fail(format!("`{other}` needs an engine functional"))),
        }
        Ok(out)
    }
}

/// Validates the whole config, then runs the checks in parallel. Records come
/// back in catalog order, then config order, then grid order.
pub fn execute(config: &ExperimentConfig) -> Result<RunOutcome, CliError> {
    let functionals = compile_functionals(config)?;
    let mut tasks = Vec::with_capacity(config.checks.len());
    for (index, spec) in config.checks.iter().enumerate() {
        let fail = |message: String| CliError::Check {
            index,
            id: spec.id.clone(),
            message,
        };
        let rank = rank(&spec.id).ok_or_else(|| fail(format!("unknown check `{}`", spec.id)))?;
        let functional = match &spec.functional {
            Some(name) => {
                let f = functionals
                    .get(name)
                    .ok_or_else(|| fail(format!("unknown functional `{name}`")))?;
                Some((name.as_str(), f))
            }
            None => None,
        };
        let task = Task {
            index,
            spec,
            functional,
        };
        task.validate()?;
        tasks.push((rank, task));
    }
    tasks.sort_by_key(|(rank, task)| (*rank, task.index));

    let needs_engine = tasks.iter().any(|(_, t)| uses_engine(&t.spec.id));
    let ctx = Context {
        config,
        engine: if needs_engine {
            Some(build_engine(config)?)
        } else {
            None
        },
    };
    let blocks: Vec<Vec<InequalityReport>> = tasks
        .par_iter()
        .map(|(_, t)| t.execute(&ctx))
        .collect::<Result<_, _>>()?;
    Ok(RunOutcome {
        records: blocks.into_iter().flatten().collect(),
    })
}

/// Loads, overrides, runs and writes the report.
pub fn run_file(path: &Path, overrides: &Overrides) -> Result<(RunOutcome, PathBuf), CliError> {
    let src = fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut config = ExperimentConfig::from_toml(&src)?;
    config.apply(overrides);
    let outcome = execute(&config)?;
    let report = config.report_path();
    outcome.write(&report)?;
    Ok((outcome, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(src: &str) -> ExperimentConfig {
        ExperimentConfig::from_toml(src).unwrap()
    }

    #[test]
    fn catalog_then_examples_order() {
        let c = config(
            r#"
            [space]
            weights = [1.0]
            [functionals]
            g = "exp_neg(1, 0)"
            [[checks]]
            id = "near_optimality"
            a = [0.5]
            q = [2.0]
            [[checks]]
            id = "weak_hypercontractivity"
            functional = "g"
            t = [0.5, 1.0]
            [[checks]]
            id = "poincare"
            functional = "g"
            "#,
        );
        let names: Vec<String> = execute(&c).unwrap().records.into_iter().map(|r| r.name).collect();
        assert_eq!(
            names,
            [
                "poincare",
                "weak_hypercontractivity",
                "weak_hypercontractivity",
                "near_optimality"
            ]
        );
    }

    #[test]
    fn missing_parameter_is_a_usage_error() {
        let c = config("[space]\nweights = [1.0]\n[functionals]\ng = \"count(0)\"\n[[checks]]\nid = \"weak_hypercontractivity\"\nfunctional = \"g\"\n");
        assert_eq!(execute(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn atom_out_of_range_is_rejected() {
        let c = config("[space]\nweights = [1.0]\n[functionals]\ng = \"count(3)\"\n");
        assert_eq!(execute(&c).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn demonstrations_do_not_fail_the_run() {
        let c = config("[space]\nweights = [1.0]\n[[checks]]\nid = \"counterexample\"\nk = [20]\n");
        let out = execute(&c).unwrap();
        assert_eq!(out.records[0].verdict, Verdict::Violated);
        assert_eq!(out.exit_code(), 0);
    }

    #[test]
    fn budget_exhaustion_maps_to_three() {
        let c = config(
            "[space]\nweights = [1.0, 1.0, 1.0, 1.0]\n[truncation]\nbudget = 100\n[functionals]\ng = \"count(0)\"\n[[checks]]\nid = \"poincare\"\nfunctional = \"g\"\n",
        );
        assert_eq!(execute(&c).unwrap_err().exit_code(), 3);
    }
}

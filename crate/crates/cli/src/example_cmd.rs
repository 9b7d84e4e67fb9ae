//! `example <name> [key=value ...]`: plot-ready CSV tables.

use std::collections::BTreeMap;
use std::str::FromStr;

use poisson_ou::examples::{
    bound_comparison_table, counterexample_scan, counterexample_table, maxima_monte_carlo, maxima_table,
    near_optimality_scan, near_optimality_table, one_dim_lambda_sweep, CsvTable, Increments, MaximaModel, RadialTail,
};
use poisson_ou::inequalities::LsiFailureScan;
use poisson_ou::report::fmt_float;

use crate::error::CliError;

pub const EXAMPLE_NAMES: &[&str] = &[
    "maxima",
    "maxima-mc",
    "cumulative",
    "counterexample",
    "near-optimality",
    "lsi-failure",
];

/// `key=v1,v2,...` pairs.
#[derive(Debug, Clone, Default)]
pub struct ExampleParams(BTreeMap<String, String>);

impl ExampleParams {
    pub fn parse<S: AsRef<str>>(args: &[S]) -> Result<Self, CliError> {
        let mut map = BTreeMap::new();
        for arg in args {
            let arg = arg.as_ref();
            let (k, v) = arg
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("expected key=value, got `{arg}`")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        Ok(Self(map))
    }

    fn list<T>(&mut self, key: &str, default: &[T]) -> Result<Vec<T>, CliError>
    where
        T: FromStr + Clone,
    {
        match self.0.remove(key) {
            None => Ok(default.to_vec()),
            Some(raw) => raw
                .split(',')
                .map(|s| {
                    s.trim()
                        .parse::<T>()
                        .map_err(|_| CliError::Usage(format!("bad value `{s}` for `{key}`")))
                })
                .collect(),
        }
    }

    fn one<T: FromStr + Clone>(&mut self, key: &str, default: T) -> Result<T, CliError> {
        let v = self.list(key, std::slice::from_ref(&default))?;
        match v.as_slice() {
            [x] => Ok(x.clone()),
            _ => Err(CliError::Usage(format!("`{key}` takes a single value"))),
        }
    }

    fn finish(self) -> Result<(), CliError> {
        match self.0.keys().next() {
            Some(k) => Err(CliError::Usage(format!("unknown parameter `{k}`"))),
            None => Ok(()),
        }
    }
}

pub fn example_table(name: &str, mut params: ExampleParams, seed: u64) -> Result<CsvTable, CliError> {
    let table = match name {
        "maxima" => maxima_table(&params.list("m", &[0.5, 1.0, 5.0, 10.0, 20.0, 50.0])?)?,
        "maxima-mc" => {
            let n = params.one("n", 100.0)?;
            let t = params.one("t", 20.0_f64.ln())?;
            let reps = params.one("replications", 100_000usize)?;
            let model = MaximaModel::monte_carlo(RadialTail::exponential(), n, t)?;
            let rec = maxima_monte_carlo(&model, n, t, reps, seed)?;
            let mut table = CsvTable::new(&[
                "route",
                "m",
                "variance",
                "variance_stderr",
                "poincare_rhs",
                "poincare_stderr",
            ]);
            table.push(vec![
                "closed".into(),
                fmt_float(rec.m),
                fmt_float(rec.closed.variance),
                "0".into(),
                fmt_float(rec.closed.poincare_rhs),
                "0".into(),
            ]);
            for (label, route) in [("radial", rec.radial), ("full", rec.full)] {
                table.push(vec![
                    label.into(),
                    fmt_float(rec.m),
                    fmt_float(route.variance.value),
                    fmt_float(route.variance.stderr),
                    fmt_float(route.poincare_rhs.value),
                    fmt_float(route.poincare_rhs.stderr),
                ]);
            }
            table
        }
        "cumulative" => {
            let level = params.one("level", 1u32)?;
            let lambdas = params.list("lambda", &[1.0, 5.0, 10.0, 20.0])?;
            bound_comparison_table(&one_dim_lambda_sweep(&Increments::indicator(level), &lambdas)?)
        }
        "counterexample" => {
            let lo = params.one("k_min", 2u32)?;
            let hi = params.one("k_max", 50u32)?;
            counterexample_table(&counterexample_scan(lo..=hi)?)
        }
        "near-optimality" => {
            let a = params.list("a", &[0.05, 0.1, 0.5, 1.0, 2.0, 3.0])?;
            let q = params.list("q", &[1.05, 1.5, 2.0, 3.0, 4.0])?;
            let gamma = params.one("gamma", 1.0)?;
            near_optimality_table(&near_optimality_scan(&a, &q, gamma)?)
        }
        "lsi-failure" => {
            let scan = LsiFailureScan::new(params.one("k_max", 50u32)?)?;
            let mut table = CsvTable::new(&["k", "ratio"]);
            for k in 1..=scan.k_max() {
                table.push(vec![k.to_string(), fmt_float(scan.ratio(k))]);
            }
            table
        }
        other => {
            return Err(CliError::Usage(format!(
                "unknown example `{other}`; known: {}",
                EXAMPLE_NAMES.join(", ")
            )))
        }
    };
    params.finish()?;
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_parse_lists() {
        let mut p = ExampleParams::parse(&["m=1,2.5", "k_max = 7"]).unwrap();
        assert_eq!(p.list::<f64>("m", &[]).unwrap(), [1.0, 2.5]);
        assert_eq!(p.one("k_max", 0u32).unwrap(), 7);
        assert!(p.finish().is_ok());
        assert!(ExampleParams::parse(&["oops"]).is_err());
    }

    #[test]
    fn every_example_renders() {
        for name in EXAMPLE_NAMES {
            let params = if *name == "maxima-mc" {
                vec!["replications=2000"]
            } else {
                vec![]
            };
            let table = example_table(name, ExampleParams::parse(&params).unwrap(), 1).unwrap();
            assert!(!table.rows.is_empty(), "{name}");
        }
        assert!(example_table("nope", ExampleParams::default(), 0).is_err());
        assert!(example_table("maxima", ExampleParams::parse(&["zzz=1"]).unwrap(), 0).is_err());
    }
}

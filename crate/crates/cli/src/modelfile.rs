//! Model descriptions as `key = value` entries.
//!
//! A description either names a builtin scenario (`scenario = ns_gamma_1`,
//! optionally with `theta`) or spells out a model:
//!
//! ```text
//! model = lbhpg            # mu, branching, rates, shapes (matrices row-major)
//! model = lbnspg           # lambda, sigma, shapes, rates
//! model = displaced        # law = triangular | uniform | point, half_width
//! ```
//!
//! When both are present the explicit model wins and the scenario name is
//! kept as a label.

use leadlag::models::{scenario, DisplacedPoissonSpec, DisplacementLaw, LbhpgSpec, LbnspgSpec, ModelSpec};

use crate::failure::{CliResult, Failure};
use crate::keyvalue::{at, parse_f64, parse_list, Entry};

pub const MODEL_KEYS: [&str; 11] = [
    "scenario",
    "model",
    "theta",
    "mu",
    "branching",
    "rates",
    "shapes",
    "lambda",
    "sigma",
    "law",
    "half_width",
];

fn join(values: &[f64]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

fn flat(m: &[[f64; 2]; 2]) -> String {
    join(&[m[0][0], m[0][1], m[1][0], m[1][1]])
}

/// Entries describing `spec`; parsing them back gives the same model.
pub fn model_entries(spec: &ModelSpec) -> Vec<(String, String)> {
    let mut out: Vec<(&str, String)> = vec![("model", spec.family().to_string())];
    match spec {
        ModelSpec::Lbhpg(s) => {
            out.push(("mu", join(&s.mu)));
            out.push(("branching", flat(&s.branching)));
            out.push(("rates", flat(&s.rates)));
            out.push(("shapes", flat(&s.shapes)));
        }
        ModelSpec::Lbnspg(s) => {
            out.push(("lambda", s.lambda.to_string()));
            out.push(("sigma", join(&s.sigma)));
            out.push(("shapes", join(&s.shapes)));
            out.push(("rates", join(&s.rates)));
        }
        ModelSpec::Displaced(s) => {
            let law = match s.law {
                DisplacementLaw::Triangular { .. } => "triangular",
                DisplacementLaw::Uniform { .. } => "uniform",
                DisplacementLaw::Point => "point",
            };
            out.push(("law", law.to_string()));
            if !matches!(s.law, DisplacementLaw::Point) {
                out.push(("half_width", s.law.half_width().to_string()));
            }
        }
    }
    out.push(("theta", spec.theta().to_string()));
    out.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

struct Lookup<'a> {
    origin: &'a str,
    entries: Vec<&'a Entry>,
}

impl<'a> Lookup<'a> {
    fn get(&self, key: &str) -> Option<&'a Entry> {
        self.entries.iter().rev().find(|e| e.key == key).copied()
    }

    fn require(&self, key: &str, model: &str) -> CliResult<&'a Entry> {
        self.get(key)
            .ok_or_else(|| Failure::data(format!("{}: model '{model}' needs '{key} = ...'", self.origin)))
    }

    fn pair(&self, key: &str, model: &str) -> CliResult<[f64; 2]> {
        let e = self.require(key, model)?;
        match parse_list(self.origin, e)?.as_slice() {
            &[a, b] => Ok([a, b]),
            _ => Err(at(self.origin, e, "expected 2 comma-separated values")),
        }
    }

    fn matrix(&self, key: &str, model: &str) -> CliResult<[[f64; 2]; 2]> {
        let e = self.require(key, model)?;
        match parse_list(self.origin, e)?.as_slice() {
            &[a, b, c, d] => Ok([[a, b], [c, d]]),
            _ => Err(at(self.origin, e, "expected 4 comma-separated values (row-major)")),
        }
    }

    fn number(&self, key: &str, model: &str) -> CliResult<f64> {
        parse_f64(self.origin, self.require(key, model)?)
    }
}

/// Model and label from the model keys in `entries`; `None` when neither
/// `scenario` nor `model` is given. Other keys are ignored here.
pub fn model_from_entries(entries: &[Entry], origin: &str) -> CliResult<Option<(String, ModelSpec)>> {
    let look = Lookup {
        origin,
        entries: entries.iter().filter(|e| MODEL_KEYS.contains(&e.key.as_str())).collect(),
    };
    let label = look.get("scenario").map(|e| e.value.clone());
    let theta = look.get("theta").map(|e| parse_f64(origin, e)).transpose()?;
    let spec = match look.get("model") {
        Some(e) => {
            let name = e.value.to_ascii_lowercase();
            let spec = match name.as_str() {
                "lbhpg" | "hawkes" => ModelSpec::Lbhpg(LbhpgSpec {
                    mu: look.pair("mu", &name)?,
                    branching: look.matrix("branching", &name)?,
                    rates: look.matrix("rates", &name)?,
                    shapes: look.matrix("shapes", &name)?,
                    theta: 0.0,
                }),
                "lbnspg" | "neyman_scott" => ModelSpec::Lbnspg(LbnspgSpec {
                    lambda: look.number("lambda", &name)?,
                    sigma: look.pair("sigma", &name)?,
                    shapes: look.pair("shapes", &name)?,
                    rates: look.pair("rates", &name)?,
                    theta: 0.0,
                }),
                "displaced" => {
                    let law_entry = look.require("law", &name)?;
                    let law = match law_entry.value.to_ascii_lowercase().as_str() {
                        "triangular" => DisplacementLaw::Triangular {
                            half_width: look.number("half_width", &name)?,
                        },
                        "uniform" => DisplacementLaw::Uniform {
                            half_width: look.number("half_width", &name)?,
                        },
                        "point" => DisplacementLaw::Point,
                        other => {
                            return Err(at(
                                origin,
                                law_entry,
                                format!("unknown law '{other}' (triangular, uniform, point)"),
                            ))
                        }
                    };
                    ModelSpec::Displaced(DisplacedPoissonSpec { law, theta: 0.0 })
                }
                other => {
                    return Err(at(origin, e, format!("unknown model '{other}' (lbhpg, lbnspg, displaced)")));
                }
            };
            spec
        }
        None => match &label {
            Some(name) => scenario(name)?.spec,
            None => return Ok(None),
        },
    };
    let spec = match theta {
        Some(t) => spec.with_theta(t),
        None => spec,
    };
    spec.validate().map_err(|e| Failure::from(e).context(origin))?;
    let label = label.unwrap_or_else(|| spec.family().to_string());
    Ok(Some((label, spec)))
}

/// Rejects keys outside `MODEL_KEYS` and `extra`.
pub fn check_keys(entries: &[Entry], origin: &str, extra: &[&str]) -> CliResult<()> {
    for e in entries {
        if !MODEL_KEYS.contains(&e.key.as_str()) && !extra.contains(&e.key.as_str()) {
            return Err(at(origin, e, "unknown key"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::keyvalue::parse;
    use leadlag::models::builtin_scenarios;

    fn round_trip(spec: &ModelSpec) -> ModelSpec {
        let text: String = model_entries(spec)
            .into_iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let entries = parse(&text, "t").unwrap();
        model_from_entries(&entries, "t").unwrap().unwrap().1
    }

    #[test]
    fn builtins_round_trip() {
        for sc in builtin_scenarios() {
            let spec = sc.spec.with_theta(0.0123456789012345);
            assert_eq!(round_trip(&spec), spec, "{}", sc.name);
        }
        let displaced = ModelSpec::Displaced(DisplacedPoissonSpec {
            law: DisplacementLaw::Triangular { half_width: 0.05 },
            theta: 0.05,
        });
        assert_eq!(round_trip(&displaced), displaced);
        let point = ModelSpec::Displaced(DisplacedPoissonSpec {
            law: DisplacementLaw::Point,
            theta: -0.3,
        });
        assert_eq!(round_trip(&point), point);
    }

    #[test]
    fn scenario_with_theta_override() {
        let entries = parse("scenario = ns_gamma_3\ntheta = 0.05\n", "t").unwrap();
        let (label, spec) = model_from_entries(&entries, "t").unwrap().unwrap();
        assert_eq!(label, "ns_gamma_3");
        assert_eq!(spec.theta(), 0.05);
    }

    #[test]
    fn missing_parameter_names_key() {
        let entries = parse("model = lbnspg\nlambda = 0.1\n", "t").unwrap();
        let err = model_from_entries(&entries, "t").unwrap_err();
        assert!(err.message.contains("sigma"), "{}", err.message);
    }

    #[test]
    fn unknown_scenario_lists_names() {
        let entries = parse("scenario = bogus\n", "t").unwrap();
        let err = model_from_entries(&entries, "t").unwrap_err();
        assert!(err.message.contains("ns_gamma_1"), "{}", err.message);
    }
}

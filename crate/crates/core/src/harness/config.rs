//! Line-oriented experiment configuration.
//!
//! ```text
//! # comment
//! [experiment]
//! kind = correctors
//! samples = 16
//! seed = 7
//!
//! [ensemble]
//! kind = checkerboard
//! lambda = 0.25
//!
//! [grid]
//! d = 2
//! n = 32
//! h = 1
//!
//! [params]
//! eps = 1/16, 1/32
//! ```
//!
//! Keys are `name = value` inside `[section]` headers; `#` starts a comment.
//! Numbers may be written as fractions (`1/32`); lists are comma separated.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::ensemble::{EnsembleSpec, GapFunctional};
use crate::error::{Error, Result};
use crate::pde::{Preconditioner, SolveOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ExperimentKind {
    Correctors,
    BoundaryLayer,
    Excess,
    MeanValue,
    Hardy,
    Meyers,
    Cone,
    TwoScale,
    SpectralGap,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 9] = [
        ExperimentKind::Correctors,
        ExperimentKind::BoundaryLayer,
        ExperimentKind::Excess,
        ExperimentKind::MeanValue,
        ExperimentKind::Hardy,
        ExperimentKind::Meyers,
        ExperimentKind::Cone,
        ExperimentKind::TwoScale,
        ExperimentKind::SpectralGap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentKind::Correctors => "correctors",
            ExperimentKind::BoundaryLayer => "boundary-layer",
            ExperimentKind::Excess => "excess",
            ExperimentKind::MeanValue => "mean-value",
            ExperimentKind::Hardy => "hardy",
            ExperimentKind::Meyers => "meyers",
            ExperimentKind::Cone => "cone",
            ExperimentKind::TwoScale => "two-scale",
            ExperimentKind::SpectralGap => "spectral-gap",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment kind '{s}'")))
    }
}

/// Raw `section -> key -> value` entries.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigDocument {
    pub sections: BTreeMap<String, BTreeMap<String, String>>,
}

impl ConfigDocument {
    pub fn parse(text: &str) -> Result<Self> {
        let mut doc = Self::default();
        let mut section: Option<String> = None;
        for (ln, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let at = |msg: &str| Error::Config(format!("line {}: {msg}", ln + 1));
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| at("unterminated section header"))?
                    .trim();
                if name.is_empty() {
                    return Err(at("empty section name"));
                }
                doc.sections.entry(name.to_string()).or_default();
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| at("expected key = value"))?;
            let sec = section
                .as_ref()
                .ok_or_else(|| at("key outside of a section"))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(at("empty key"));
            }
            let entries = doc.sections.get_mut(sec).expect("section exists");
            if entries.insert(k.to_string(), v.to_string()).is_some() {
                return Err(at(&format!("duplicate key '{k}'")));
            }
        }
        Ok(doc)
    }

    pub fn set(&mut self, section: &str, key: &str, value: impl Into<String>) {
        self.sections
            .entry(section.to_string())
            .or_default()
            .insert(key.to_string(), value.into());
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.sections.get(section)?.get(key).map(String::as_str)
    }

    /// Sorted rendering; the config hash is taken over this text.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (name, entries) in &self.sections {
            s.push_str(&format!("[{name}]\n"));
            for (k, v) in entries {
                s.push_str(&format!("{k} = {v}\n"));
            }
        }
        s
    }

    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse_number(s: &str) -> Result<f64> {
    let s = s.trim();
    let v = if let Some((a, b)) = s.split_once('/') {
        let a: f64 = a.trim().parse().map_err(|_| bad_number(s))?;
        let b: f64 = b.trim().parse().map_err(|_| bad_number(s))?;
        a / b
    } else {
        s.parse().map_err(|_| bad_number(s))?
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad_number(s))
    }
}

fn bad_number(s: &str) -> Error {
    Error::Config(format!("'{s}' is not a finite number"))
}

pub fn parse_list(s: &str) -> Result<Vec<f64>> {
    let v = s
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(parse_number)
        .collect::<Result<Vec<_>>>()?;
    if v.is_empty() {
        return Err(Error::Config("empty list".into()));
    }
    Ok(v)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub ensemble: EnsembleSpec,
    pub d: usize,
    pub n: usize,
    pub h: f64,
    /// Parameter sweeps; scalars are one-element lists.
    pub params: BTreeMap<String, Vec<f64>>,
    pub n_samples: usize,
    pub master_seed: u64,
    pub solver: SolveOptions,
    pub document: ConfigDocument,
}

impl ExperimentConfig {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_document(ConfigDocument::parse(&text)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        Self::from_document(ConfigDocument::parse(text)?)
    }

    pub fn from_document(doc: ConfigDocument) -> Result<Self> {
        let known = ["experiment", "ensemble", "grid", "params", "solver"];
        if let Some(s) = doc.sections.keys().find(|s| !known.contains(&s.as_str())) {
            return Err(Error::Config(format!("unknown section [{s}]")));
        }
        let req = |sec: &str, key: &str| {
            doc.get(sec, key)
                .ok_or_else(|| Error::Config(format!("missing {sec}.{key}")))
        };
        let num = |sec: &str, key: &str, default: Option<f64>| -> Result<f64> {
            match (doc.get(sec, key), default) {
                (Some(v), _) => parse_number(v),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(Error::Config(format!("missing {sec}.{key}"))),
            }
        };
        let int = |sec: &str, key: &str, default: Option<u64>| -> Result<u64> {
            match (doc.get(sec, key), default) {
                (Some(v), _) => v
                    .trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("{sec}.{key} = '{v}' is not an integer"))),
                (None, Some(d)) => Ok(d),
                (None, None) => Err(Error::Config(format!("missing {sec}.{key}"))),
            }
        };
        let kind: ExperimentKind = req("experiment", "kind")?.parse()?;
        let n_samples = int("experiment", "samples", Some(1))? as usize;
        let master_seed = int("experiment", "seed", Some(0))?;
        let lambda = num("ensemble", "lambda", Some(0.25))?;
        let ens_kind = doc.get("ensemble", "kind").unwrap_or("constant");
        let mut ensemble = match ens_kind {
            "constant" => EnsembleSpec::constant(num("ensemble", "value", Some(1.0))?),
            "checkerboard" => EnsembleSpec::checkerboard(lambda, master_seed),
            "periodic-checkerboard" => EnsembleSpec::periodic_checkerboard(lambda),
            "laminate" => EnsembleSpec::laminate(
                num("ensemble", "low", Some(0.5))?,
                num("ensemble", "high", Some(1.0))?,
                num("ensemble", "period", Some(1.0))?,
            ),
            "periodic-smooth" => {
                let shift = match doc.get("ensemble", "random_shift").unwrap_or("false") {
                    "true" => true,
                    "false" => false,
                    v => {
                        return Err(Error::Config(format!(
                            "random_shift = '{v}' is not a boolean"
                        )))
                    }
                };
                EnsembleSpec::periodic_smooth(lambda, shift, master_seed)
            }
            "gaussian-clipped" => EnsembleSpec::gaussian_clipped(lambda, master_seed),
            other => return Err(Error::Config(format!("unknown ensemble kind '{other}'"))),
        };
        if let Some(l) = doc.get("ensemble", "correlation_length") {
            ensemble = ensemble.with_correlation_length(parse_number(l)?);
        }
        if let Some(a) = doc.get("ensemble", "holder_alpha") {
            ensemble.holder_alpha = parse_number(a)?;
        }
        ensemble
            .validate()
            .map_err(|e| Error::Config(format!("ensemble: {e}")))?;
        let d = int("grid", "d", Some(2))? as usize;
        if d != 2 && d != 3 {
            return Err(Error::Config(format!("grid.d must be 2 or 3, got {d}")));
        }
        let n = int("grid", "n", Some(32))? as usize;
        let h = num("grid", "h", Some(1.0))?;
        if n < 4 || !(h > 0.0) {
            return Err(Error::Config(format!(
                "grid needs n >= 4 and h > 0, got {n}, {h}"
            )));
        }
        let mut params = BTreeMap::new();
        if let Some(entries) = doc.sections.get("params") {
            for (k, v) in entries {
                params.insert(
                    k.clone(),
                    parse_list(v).map_err(|e| Error::Config(format!("params.{k}: {e}")))?,
                );
            }
        }
        let mut solver = SolveOptions::default();
        if let Some(t) = doc.get("solver", "tol") {
            solver.rel_tol = parse_number(t)?;
        }
        if let Some(m) = doc.get("solver", "max_iter") {
            solver.max_iter = m
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("solver.max_iter = '{m}' is not an integer")))?;
        }
        if let Some(p) = doc.get("solver", "preconditioner") {
            solver.preconditioner = match p.trim() {
                "spectral" => Preconditioner::Spectral,
                "jacobi" => Preconditioner::Jacobi,
                other => return Err(Error::Config(format!("unknown preconditioner '{other}'"))),
            };
        }
        let cfg = Self {
            kind,
            ensemble,
            d,
            n,
            h,
            params,
            n_samples,
            master_seed,
            solver,
            document: doc,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Applies command-line overrides and re-validates.
    pub fn with_overrides(self, seed: Option<u64>, samples: Option<usize>) -> Result<Self> {
        let mut doc = self.document;
        if let Some(s) = seed {
            doc.set("experiment", "seed", s.to_string());
        }
        if let Some(n) = samples {
            doc.set("experiment", "samples", n.to_string());
        }
        Self::from_document(doc)
    }

    pub fn hash(&self) -> String {
        self.document.hash()
    }

    pub fn param(&self, key: &str) -> Option<&[f64]> {
        self.params.get(key).map(Vec::as_slice)
    }

    pub fn scalar(&self, key: &str, default: f64) -> f64 {
        self.param(key).map_or(default, |v| v[0])
    }

    pub fn list(&self, key: &str, default: &[f64]) -> Vec<f64> {
        self.param(key)
            .map_or_else(|| default.to_vec(), <[f64]>::to_vec)
    }

    pub fn gap_functional(&self) -> GapFunctional {
        if self.scalar("functional", 0.0) == 1.0 {
            GapFunctional::SmallTorusEnergy
        } else {
            GapFunctional::BallAverage
        }
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.n_samples == 0 {
            return bad("experiment.samples must be positive".into());
        }
        let positive = |key: &str| -> Result<()> {
            if let Some(v) = self.param(key) {
                if v.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::Config(format!("params.{key} must be positive")));
                }
            }
            Ok(())
        };
        for key in ["eps", "radii", "kappa", "t", "r", "c0", "rho"] {
            positive(key)?;
        }
        if let Some(e) = self.param("eps") {
            if e.iter().any(|x| *x > 1.0) {
                return bad("params.eps must lie in (0, 1]".into());
            }
        }
        if let Some(k) = self.param("kappa") {
            if k.iter().any(|x| *x > 1.0) {
                return bad("params.kappa must lie in (0, 1]".into());
            }
        }
        if let Some(p) = self.param("p") {
            if p.iter().any(|x| !(1.0..=1.1).contains(x)) {
                return bad("params.p must lie in [1, 1.1]".into());
            }
        }
        if let Some(r) = self.param("radii") {
            if r.windows(2).any(|w| w[1] <= w[0]) {
                return bad("params.radii must be strictly increasing".into());
            }
        }
        match self.kind {
            ExperimentKind::SpectralGap if self.n_samples < 100 => {
                bad("spectral-gap needs at least 100 samples".into())
            }
            ExperimentKind::TwoScale if self.ensemble.kind.is_random() => {
                bad("two-scale runs need a periodic ensemble".into())
            }
            ExperimentKind::Hardy => {
                let m = 1.0 / self.h;
                if (m - m.round()).abs() > 1e-9 {
                    return bad("hardy needs 1/h to be an integer".into());
                }
                Ok(())
            }
            ExperimentKind::Meyers => {
                let (a0, a1) = (self.scalar("alpha0", 0.5), self.scalar("alpha1", 1.0));
                for p in self.list("p", &[1.05]) {
                    crate::meyers::meyers_parameters_valid(p, a0, a1, self.d, false)
                        .map_err(|e| Error::Config(format!("meyers weights: {e}")))?;
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = "\
# a comment
[experiment]
kind = correctors   # trailing
samples = 4
seed = 9

[ensemble]
kind = checkerboard
lambda = 1/4

[grid]
d = 2
n = 16

[params]
eps = 1/16, 1/32
";

    #[test]
    fn parses_sections_fractions_and_lists() {
        let c = ExperimentConfig::parse(SAMPLE).unwrap();
        assert_eq!(c.kind, ExperimentKind::Correctors);
        assert_eq!((c.n_samples, c.master_seed, c.n), (4, 9, 16));
        assert_eq!(c.ensemble.lambda, 0.25);
        assert_eq!(c.ensemble.master_seed, 9);
        assert_eq!(c.param("eps").unwrap(), &[1.0 / 16.0, 1.0 / 32.0]);
    }

    #[test]
    fn hash_ignores_formatting_and_tracks_overrides() {
        let a = ExperimentConfig::parse(SAMPLE).unwrap();
        let b = ExperimentConfig::parse(
            &SAMPLE.replace("kind = correctors   # trailing", "kind=correctors"),
        )
        .unwrap();
        assert_eq!(a.hash(), b.hash());
        let c = a.clone().with_overrides(Some(10), None).unwrap();
        assert_ne!(a.hash(), c.hash());
        assert_eq!(c.ensemble.master_seed, 10);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "kind = x\n",
            "[experiment]\nkind = nope\n",
            "[experiment]\nkind = correctors\nkind = hardy\n",
            "[experiment]\nkind = correctors\n[params]\neps = 2\n",
            "[experiment]\nkind = correctors\n[params]\np = 1.5\n",
            "[experiment]\nkind = correctors\nsamples = 0\n",
            "[experiment]\nkind = correctors\n[grid]\nd = 4\n",
            "[experiment]\nkind = correctors\n[bogus]\n",
            "[experiment]\nkind = two-scale\n[ensemble]\nkind = checkerboard\n",
            "[experiment]\nkind = meyers\n[params]\nalpha0 = 2\nalpha1 = 1\n",
        ] {
            assert!(
                matches!(ExperimentConfig::parse(bad), Err(Error::Config(_))),
                "{bad}"
            );
        }
    }

    #[test]
    fn solver_section() {
        let c = ExperimentConfig::parse("[experiment]\nkind = correctors\n[solver]\ntol = 1e-8\nmax_iter = 50\npreconditioner = jacobi\n").unwrap();
        assert_eq!(c.solver.rel_tol, 1e-8);
        assert_eq!(c.solver.max_iter, 50);
        assert_eq!(c.solver.preconditioner, Preconditioner::Jacobi);
        assert!(ExperimentConfig::parse(
            "[experiment]\nkind = correctors\n[solver]\npreconditioner = multigrid\n"
        )
        .is_err());
    }
}

//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, keys are dotted names such as
//! `kernel.family` or `op.epsilon`, and lists are comma separated.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::collapse::CollapseParams;
use crate::error::{CzError, Result};
use crate::kernels::KernelSpec;
use crate::measures::MeasureDescriptor;
use crate::reflectionless::ThresholdProfile;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Config {
    entries: BTreeMap<String, (String, usize)>,
}

fn valid_key(k: &str) -> bool {
    !k.is_empty()
        && !k.starts_with('.')
        && !k.ends_with('.')
        && !k.contains("..")
        && k.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-'))
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CzError::parse(line_no, "expected `key = value`"))?;
            let key = k.trim();
            if !valid_key(key) {
                return Err(CzError::parse(line_no, format!("invalid key `{key}`")));
            }
            let value = v.trim();
            if value.is_empty() {
                return Err(CzError::parse(line_no, format!("empty value for `{key}`")));
            }
            if entries.insert(key.to_string(), (value.to_string(), line_no)).is_some() {
                return Err(CzError::parse(line_no, format!("duplicate key `{key}`")));
            }
        }
        Ok(Config { entries })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Insert or replace an entry, e.g. from a command-line override.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let (key, value) = (key.trim(), value.trim());
        if !valid_key(key) || value.is_empty() {
            return Err(CzError::argument(format!("invalid override `{key} = {value}`")));
        }
        self.entries.insert(key.to_string(), (value.to_string(), 0));
        Ok(())
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn contains(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|(v, _)| v.as_str())
    }

    fn line(&self, key: &str) -> usize {
        self.entries.get(key).map_or(0, |e| e.1)
    }

    fn typed<T: std::str::FromStr>(&self, key: &str, what: &str) -> Result<Option<T>> {
        match self.str(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| CzError::parse(self.line(key), format!("`{key}` must be {what}, got `{v}`"))),
        }
    }

    pub fn f64(&self, key: &str) -> Result<Option<f64>> {
        let v: Option<f64> = self.typed(key, "a number")?;
        match v {
            Some(x) if !x.is_finite() => Err(CzError::parse(self.line(key), format!("`{key}` must be finite"))),
            _ => Ok(v),
        }
    }

    pub fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.typed(key, "a nonnegative integer")
    }

    pub fn u64(&self, key: &str) -> Result<Option<u64>> {
        self.typed(key, "a nonnegative integer")
    }

    pub fn f64_list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        let Some(v) = self.str(key) else {
            return Ok(None);
        };
        v.split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|x| x.is_finite())
                    .ok_or_else(|| CzError::parse(self.line(key), format!("`{key}`: bad list entry `{}`", t.trim())))
            })
            .collect::<Result<Vec<_>>>()
            .map(Some)
    }

    pub fn require_f64(&self, key: &str) -> Result<f64> {
        self.f64(key)?.ok_or_else(|| missing(key))
    }

    pub fn require_str(&self, key: &str) -> Result<&str> {
        self.str(key).ok_or_else(|| missing(key))
    }
}

fn missing(key: &str) -> CzError {
    CzError::argument(format!("missing config key `{key}`"))
}

/// Kernel from `kernel.family` (`riesz`, `cauchy`, `conj_cauchy_squared`)
/// and, for Riesz, `kernel.d`, `kernel.s`, `kernel.alpha`.
pub fn kernel_from(cfg: &Config) -> Result<KernelSpec> {
    let family = cfg.str("kernel.family").unwrap_or("cauchy");
    let k = match family {
        "cauchy" => KernelSpec::cauchy(),
        "conj_cauchy_squared" => KernelSpec::conj_cauchy_squared(),
        "riesz" => {
            let d = cfg.usize("kernel.d")?.unwrap_or(2);
            let s = cfg.f64("kernel.s")?.unwrap_or(d as f64 - 1.0);
            let alpha = cfg.f64("kernel.alpha")?.unwrap_or(1.0);
            KernelSpec::riesz(d, s, alpha)?
        }
        other => {
            return Err(CzError::parse(cfg.line("kernel.family"), format!("unknown kernel family `{other}`")));
        }
    };
    for (key, want) in [("kernel.d", k.d as f64), ("kernel.s", k.s), ("kernel.alpha", k.alpha)] {
        if let Some(v) = cfg.f64(key)? {
            if v != want {
                return Err(CzError::argument(format!("`{key}` = {v} conflicts with kernel `{family}`")));
            }
        }
    }
    Ok(k)
}

fn point2(cfg: &Config, key: &str) -> Result<[f64; 2]> {
    match cfg.f64_list(key)? {
        None => Ok([0.0, 0.0]),
        Some(v) if v.len() == 2 => Ok([v[0], v[1]]),
        Some(_) => Err(CzError::parse(cfg.line(key), format!("`{key}` needs two coordinates"))),
    }
}

/// Measure descriptor from `measure.kind` and its parameters.
pub fn measure_from(cfg: &Config, base: &Path) -> Result<MeasureDescriptor> {
    let kind = cfg.require_str("measure.kind")?;
    Ok(match kind {
        "disk" => MeasureDescriptor::Disk {
            center: point2(cfg, "measure.center")?,
            radius: cfg.f64("measure.radius")?.unwrap_or(1.0),
            h: cfg.require_f64("measure.h")?,
        },
        "box" => {
            let half_widths = cfg.f64_list("measure.half_widths")?.ok_or_else(|| missing("measure.half_widths"))?;
            let center = cfg.f64_list("measure.center")?.unwrap_or_else(|| vec![0.0; half_widths.len()]);
            MeasureDescriptor::Box {
                center,
                half_widths,
                h: cfg.require_f64("measure.h")?,
            }
        }
        "segment" => MeasureDescriptor::Segment {
            a: cfg.f64("measure.a")?.unwrap_or(-1.0),
            b: cfg.f64("measure.b")?.unwrap_or(1.0),
            h: cfg.require_f64("measure.h")?,
        },
        "cantor4" => MeasureDescriptor::Cantor4 {
            level: cfg.typed("measure.level", "a nonnegative integer")?.unwrap_or(4),
        },
        "file" => {
            let p = PathBuf::from(cfg.require_str("measure.file")?);
            let p = if p.is_relative() { base.join(p) } else { p };
            MeasureDescriptor::File {
                path: p.to_string_lossy().into_owned(),
            }
        }
        other => {
            return Err(CzError::parse(cfg.line("measure.kind"), format!("unknown measure kind `{other}`")));
        }
    })
}

/// A fully specified run: kernel, measure, operation and outputs.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub kernel: KernelSpec,
    pub measure: Option<MeasureDescriptor>,
    pub op: String,
    pub delta_ladder: Option<Vec<f64>>,
    pub pv_epsilon: Option<f64>,
    pub family_size: usize,
    pub family_seed: u64,
    pub threshold_profile: Option<ThresholdProfile>,
    pub output_csv: Option<PathBuf>,
    pub output_json: Option<PathBuf>,
    pub seed: u64,
    /// The whole file, for `op.*` parameters.
    pub config: Config,
}

impl Scenario {
    /// Interpret a parsed config; relative paths resolve against `base`.
    pub fn from_config(cfg: Config, base: &Path) -> Result<Self> {
        let op = cfg.require_str("op")?.to_string();
        let kernel = kernel_from(&cfg)?;
        let measure = if cfg.contains("measure.kind") {
            Some(measure_from(&cfg, base)?)
        } else {
            None
        };
        let threshold_profile = match cfg.f64_list("reflectionless.threshold_profile")? {
            None => None,
            Some(v) if v.len() == 3 => Some(ThresholdProfile {
                coefficient: v[0],
                exponent: v[1],
                safety: v[2],
            }),
            Some(_) => {
                return Err(CzError::parse(
                    cfg.line("reflectionless.threshold_profile"),
                    "threshold_profile is `coefficient, exponent, safety`",
                ))
            }
        };
        let path = |key: &str| {
            cfg.str(key).map(|p| {
                let p = PathBuf::from(p);
                if p.is_relative() {
                    base.join(p)
                } else {
                    p
                }
            })
        };
        let seed = cfg.u64("seed")?.unwrap_or(0);
        Ok(Scenario {
            kernel,
            measure,
            delta_ladder: cfg.f64_list("potential.delta_ladder")?,
            pv_epsilon: cfg.f64("potential.pv_epsilon")?,
            family_size: cfg.usize("reflectionless.family_size")?.unwrap_or(50),
            family_seed: cfg.u64("reflectionless.seed")?.unwrap_or(seed),
            threshold_profile,
            output_csv: path("output.csv"),
            output_json: path("output.json"),
            seed,
            op,
            config: cfg,
        })
    }

    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        Self::from_config(Config::parse(text)?, base)
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let base = path.parent().unwrap_or(Path::new("."));
        Self::from_config(Config::read(path)?, base)
    }
}

/// Entries of a collapse constants file; absent keys stay `None`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstantsFile {
    pub d: Option<usize>,
    pub s: Option<f64>,
    pub alpha: Option<f64>,
    pub lambda_nice: Option<f64>,
    pub c1: Option<f64>,
    pub c4: Option<f64>,
    pub c6: Option<f64>,
    pub c8: Option<f64>,
    pub c9: Option<f64>,
    pub beta: Option<f64>,
    pub t0: Option<f64>,
    pub kappa0: Option<f64>,
}

const CONSTANT_KEYS: [&str; 12] = [
    "d", "s", "alpha", "Lambda", "C1", "c4", "C6", "C8", "c9", "beta", "t0", "kappa0",
];

impl ConstantsFile {
    /// Keys: `d s alpha Lambda C1 c4 C6 C8 c9 beta t0 kappa0`.
    pub fn parse(text: &str) -> Result<Self> {
        let cfg = Config::parse(text)?;
        for k in cfg.keys() {
            if !CONSTANT_KEYS.contains(&k) {
                return Err(CzError::parse(cfg.line(k), format!("unknown constant `{k}`")));
            }
        }
        let positive = |key: &str| -> Result<Option<f64>> {
            match cfg.f64(key)? {
                Some(v) if v <= 0.0 && key != "kappa0" => {
                    Err(CzError::parse(cfg.line(key), format!("`{key}` must be positive")))
                }
                Some(v) if v < 0.0 => Err(CzError::parse(cfg.line(key), format!("`{key}` must be nonnegative"))),
                v => Ok(v),
            }
        };
        Ok(ConstantsFile {
            d: cfg.usize("d")?,
            s: positive("s")?,
            alpha: positive("alpha")?,
            lambda_nice: positive("Lambda")?,
            c1: positive("C1")?,
            c4: positive("c4")?,
            c6: positive("C6")?,
            c8: positive("C8")?,
            c9: positive("c9")?,
            beta: positive("beta")?,
            t0: positive("t0")?,
            kappa0: positive("kappa0")?,
        })
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// Whether every constant needed by the recursion is present.
    pub fn is_complete(&self) -> bool {
        [self.lambda_nice, self.c1, self.c4, self.c6, self.c8, self.c9, self.beta]
            .iter()
            .all(Option::is_some)
    }

    /// Overlay the present entries on `base`.
    pub fn apply(&self, base: &CollapseParams) -> CollapseParams {
        CollapseParams {
            epsilon: base.epsilon,
            d: self.d.unwrap_or(base.d),
            s: self.s.unwrap_or(base.s),
            alpha: self.alpha.unwrap_or(base.alpha),
            lambda_nice: self.lambda_nice.unwrap_or(base.lambda_nice),
            c1: self.c1.unwrap_or(base.c1),
            c4: self.c4.unwrap_or(base.c4),
            c6: self.c6.unwrap_or(base.c6),
            c8: self.c8.unwrap_or(base.c8),
            c9: self.c9.unwrap_or(base.c9),
            beta: self.beta.unwrap_or(base.beta),
            t0: self.t0.unwrap_or(base.t0),
            kappa0: self.kappa0.or(base.kappa0),
        }
    }

    pub fn to_text(p: &CollapseParams) -> String {
        let mut out = format!(
            "d = {}\ns = {}\nalpha = {}\nLambda = {}\nC1 = {}\nc4 = {}\nC6 = {}\nC8 = {}\nc9 = {}\nbeta = {}\nt0 = {}\n",
            p.d, p.s, p.alpha, p.lambda_nice, p.c1, p.c4, p.c6, p.c8, p.c9, p.beta, p.t0
        );
        if let Some(k) = p.kappa0 {
            out.push_str(&format!("kappa0 = {k}\n"));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_comments_lists_and_dotted_keys() {
        let cfg = Config::parse(
            "# scenario\nkernel.family = conj_cauchy_squared\n\nmeasure.kind = disk  # inline\nmeasure.h = 0.02\npotential.delta_ladder = 0.01, 0.1,1\nop = wolff\n",
        )
        .unwrap();
        assert_eq!(cfg.str("measure.kind"), Some("disk"));
        assert_eq!(cfg.f64_list("potential.delta_ladder").unwrap(), Some(vec![0.01, 0.1, 1.0]));
        let sc = Scenario::from_config(cfg, Path::new(".")).unwrap();
        assert_eq!(sc.op, "wolff");
        assert_eq!(
            sc.measure,
            Some(MeasureDescriptor::Disk {
                center: [0.0, 0.0],
                radius: 1.0,
                h: 0.02
            })
        );
    }

    #[test]
    fn errors_carry_line_numbers() {
        let e = Config::parse("a = 1\n\nno equals here\n").unwrap_err();
        assert_eq!(e, CzError::parse(3, "expected `key = value`"));
        let e = Config::parse("a = 1\na = 2\n").unwrap_err();
        assert!(matches!(e, CzError::Parse { line: 2, .. }));
        let cfg = Config::parse("x = 1\ny = nope\n").unwrap();
        assert!(matches!(cfg.f64("y"), Err(CzError::Parse { line: 2, .. })));
        assert!(matches!(Config::parse("bad key = 1"), Err(CzError::Parse { line: 1, .. })));
        assert!(matches!(Config::parse("k ="), Err(CzError::Parse { line: 1, .. })));
    }

    #[test]
    fn kernel_keys_must_agree() {
        let cfg = Config::parse("kernel.family = cauchy\nkernel.s = 2\n").unwrap();
        assert!(kernel_from(&cfg).is_err());
        let cfg = Config::parse("kernel.family = riesz\nkernel.d = 3\nkernel.s = 2\n").unwrap();
        let k = kernel_from(&cfg).unwrap();
        assert_eq!((k.d, k.s), (3, 2.0));
        let cfg = Config::parse("kernel.family = hilbert\n").unwrap();
        assert!(matches!(kernel_from(&cfg), Err(CzError::Parse { line: 1, .. })));
    }

    #[test]
    fn constants_round_trip() {
        let p = CollapseParams {
            epsilon: 0.1,
            d: 2,
            s: 1.0,
            alpha: 1.0,
            lambda_nice: 2.05,
            c1: 3.98,
            c4: 0.73,
            c6: 0.86,
            c8: 85.5,
            c9: 4.7e-5,
            beta: 2.87,
            t0: 1.5,
            kappa0: Some(1e-8),
        };
        let f = ConstantsFile::parse(&ConstantsFile::to_text(&p)).unwrap();
        assert!(f.is_complete());
        assert_eq!(f.apply(&p.with_epsilon(0.2)), p.with_epsilon(0.2));
        assert!(ConstantsFile::parse("C7 = 1\n").is_err());
        assert!(ConstantsFile::parse("C1 = -1\n").is_err());
        assert!(!ConstantsFile::parse("C1 = 1\n").unwrap().is_complete());
    }

    proptest! {
        #[test]
        fn parser_never_panics(s in "\\PC*") {
            let _ = Config::parse(&s);
            let _ = ConstantsFile::parse(&s);
            let _ = Scenario::parse(&s, Path::new("."));
        }

        #[test]
        fn written_entries_read_back(vals in proptest::collection::btree_map("[a-z][a-z0-9_]{0,6}(\\.[a-z0-9_]{1,6}){0,2}", -1e6f64..1e6, 0..12)) {
            let text: String = vals.iter().map(|(k, v)| format!("{k} = {v:e}\n")).collect();
            let cfg = Config::parse(&text).unwrap();
            for (k, v) in &vals {
                prop_assert_eq!(cfg.f64(k).unwrap(), Some(*v));
            }
        }
    }
}

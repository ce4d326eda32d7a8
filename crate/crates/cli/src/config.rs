//! Flat `key=value` run configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use dareplane::rep::FieldKind;
use dareplane::train::{FitConfig, LossWeights, ModelSpec, Schedule, Upsample};
use dareplane::wavelet::{DwtWavelet, FilterBankName, PlaneTransform};

use crate::CliError;

/// Every accepted key with its default; `None` marks a key that has no
/// default (required by `fit` and `compare`, or optional input paths).
const KEYS: &[(&str, Option<&str>)] = &[
    ("scene", None),
    ("steps", None),
    ("seed", Some("0")),
    ("out", Some("out")),
    ("n", Some("32")),
    ("t", Some("8")),
    ("frames", Some("8")),
    ("image_size", Some("32")),
    ("views", Some("8")),
    ("test_views", Some("2")),
    ("fov", Some("40")),
    ("color", Some("0.2,0.5,0.7")),
    ("transform", Some("dtcwt")),
    ("bank", Some("near_sym_a")),
    ("wavelet", Some("bior4.4")),
    ("level", Some("1")),
    ("density_ranks", Some("4")),
    ("appearance_ranks", Some("8")),
    ("feature_dim", Some("8")),
    ("appearance_dim", Some("8")),
    ("hidden", Some("64")),
    ("masks", Some("true")),
    ("lambda_photo", Some("1")),
    ("lambda_tv_spatial", Some("1e-5")),
    ("lambda_tv_temporal", Some("2e-5")),
    ("lambda_mask", Some("1e-11")),
    ("lr_planes", Some("0.02")),
    ("lr_network", Some("0.001")),
    ("lr_final_ratio", Some("0.1")),
    ("clip_norm", Some("10")),
    ("batch", Some("1024")),
    ("samples", Some("32")),
    ("eval_samples", Some("32")),
    ("min_transmittance", Some("1e-4")),
    ("upsample", Some("")),
    ("emptiness", Some("")),
    ("quantize", Some("false")),
    ("baseline_wavelet", Some("bior4.4")),
    ("baseline_level", Some("1")),
    ("image", None),
    ("size", Some("64")),
    ("archive", None),
];

/// Keys that `fit` and `compare` cannot run without.
pub const RUN_REQUIRED: &[&str] = &["scene", "steps"];

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    values: BTreeMap<&'static str, String>,
}

fn err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

impl Config {
    /// Parses `key=value` lines; `#` starts a comment line. Unknown and
    /// repeated keys are errors reported with their line number.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        let mut seen_at = BTreeMap::new();
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(err(format!("line {line_no}: expected key=value, got '{line}'")));
            };
            let k = k.trim();
            let Some(&(key, _)) = KEYS.iter().find(|(name, _)| *name == k) else {
                return Err(err(format!("line {line_no}: unknown key '{k}'")));
            };
            if let Some(prev) = seen_at.insert(key, line_no) {
                return Err(err(format!("line {line_no}: key '{key}' already set on line {prev}")));
            }
            values.insert(key, v.trim().to_string());
        }
        for (key, default) in KEYS {
            if let Some(d) = default {
                values.entry(*key).or_insert_with(|| d.to_string());
            }
        }
        Ok(Self { values })
    }

    pub fn require(&self, keys: &[&str]) -> Result<(), CliError> {
        match keys.iter().find(|k| !self.values.contains_key(*k)) {
            Some(k) => Err(err(format!("missing required key '{k}'"))),
            None => Ok(()),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<String>) -> Result<(), CliError> {
        let Some(&(key, _)) = KEYS.iter().find(|(name, _)| *name == key) else {
            return Err(err(format!("unknown key '{key}'")));
        };
        self.values.insert(key, value.into());
        Ok(())
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn str(&self, key: &str) -> Result<&str, CliError> {
        self.raw(key)
            .ok_or_else(|| err(format!("missing required key '{key}'")))
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let v = self.str(key)?;
        v.parse().map_err(|_| {
            err(format!(
                "key '{key}': cannot parse '{v}' as {}",
                std::any::type_name::<T>()
            ))
        })
    }

    fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError> {
        let v = self.str(key)?;
        if v.is_empty() {
            return Ok(Vec::new());
        }
        v.split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| err(format!("key '{key}': cannot parse list item '{}'", s.trim())))
            })
            .collect()
    }

    fn positive(&self, key: &str) -> Result<usize, CliError> {
        match self.get::<usize>(key)? {
            0 => Err(err(format!("key '{key}' must be positive"))),
            v => Ok(v),
        }
    }

    fn ranks(&self, key: &str) -> Result<[usize; 3], CliError> {
        let r: Vec<usize> = self.list(key)?;
        let r = match r.as_slice() {
            [a] => [*a; 3],
            [a, b, c] => [*a, *b, *c],
            _ => return Err(err(format!("key '{key}' takes one or three ranks"))),
        };
        if r.contains(&0) {
            return Err(err(format!("key '{key}': ranks must be positive")));
        }
        Ok(r)
    }

    /// Three components in `[0, 1]`.
    pub fn color(&self) -> Result<[f64; 3], CliError> {
        let c: Vec<f64> = self.list("color")?;
        match c.as_slice() {
            [r, g, b] if c.iter().all(|v| (0.0..=1.0).contains(v)) => Ok([*r, *g, *b]),
            _ => Err(err("key 'color' takes three values in [0, 1]")),
        }
    }

    pub fn transform(&self) -> Result<PlaneTransform, CliError> {
        let levels = self.positive("level")?;
        match self.str("transform")? {
            "dtcwt" => Ok(PlaneTransform::Dtcwt {
                bank: FilterBankName::from_str(self.str("bank")?).map_err(|e| err(format!("key 'bank': {e}")))?,
                levels,
            }),
            "dwt" => Ok(PlaneTransform::Dwt {
                wavelet: self.wavelet("wavelet")?,
                levels,
            }),
            other => Err(err(format!("key 'transform': expected dtcwt or dwt, got '{other}'"))),
        }
    }

    pub fn wavelet(&self, key: &str) -> Result<DwtWavelet, CliError> {
        DwtWavelet::from_str(self.str(key)?).map_err(|e| err(format!("key '{key}': {e}")))
    }

    fn schedule(&self, steps: usize) -> Result<Schedule, CliError> {
        let upsample = self
            .list::<String>("upsample")?
            .iter()
            .map(|item| {
                let parts: Vec<usize> = item
                    .split(':')
                    .map(|p| p.parse())
                    .collect::<Result<_, _>>()
                    .map_err(|_| err(format!("key 'upsample': bad entry '{item}', expected step:n:t")))?;
                match parts.as_slice() {
                    [step, n, t] => Ok(Upsample {
                        step: *step,
                        n: *n,
                        t: *t,
                    }),
                    _ => Err(err(format!("key 'upsample': bad entry '{item}', expected step:n:t"))),
                }
            })
            .collect::<Result<Vec<_>, _>>()?;
        let s = Schedule {
            steps,
            upsample,
            emptiness: self.list("emptiness")?,
        };
        s.validate().map_err(|e| err(e.to_string()))?;
        Ok(s)
    }

    pub fn field_kind(&self) -> Result<FieldKind, CliError> {
        Ok(if crate::scene::SceneId::from_name(self.str("scene")?)?.is_dynamic() {
            FieldKind::Dynamic
        } else {
            FieldKind::Static
        })
    }

    /// Training settings for the configured scene.
    pub fn fit_config(&self) -> Result<FitConfig, CliError> {
        self.require(RUN_REQUIRED)?;
        let steps = self.get("steps")?;
        let kind = self.field_kind()?;
        let cfg = FitConfig {
            model: ModelSpec {
                kind,
                n: self.positive("n")?,
                t: self.positive("t")?,
                transform: self.transform()?,
                density_ranks: self.ranks("density_ranks")?,
                appearance_ranks: self.ranks("appearance_ranks")?,
                feature_dim: self.positive("feature_dim")?,
                appearance_dim: self.positive("appearance_dim")?,
                hidden: self.positive("hidden")?,
                masks: self.get("masks")?,
            },
            schedule: self.schedule(steps)?,
            batch: self.positive("batch")?,
            samples: self.positive("samples")?,
            weights: LossWeights {
                photo: self.get("lambda_photo")?,
                tv_spatial: self.get("lambda_tv_spatial")?,
                tv_temporal: self.get("lambda_tv_temporal")?,
                mask: self.get("lambda_mask")?,
            },
            lr_planes: self.get("lr_planes")?,
            lr_network: self.get("lr_network")?,
            lr_final_ratio: self.get("lr_final_ratio")?,
            clip_norm: self.get("clip_norm")?,
            seed: self.get("seed")?,
            eval_samples: self.positive("eval_samples")?,
            min_transmittance: self.get("min_transmittance")?,
            quantize: self.get("quantize")?,
        };
        cfg.validate().map_err(|e| err(e.to_string()))?;
        let mut shapes = vec![(cfg.model.n, cfg.model.t)];
        shapes.extend(cfg.schedule.upsample.iter().map(|u| (u.n, u.t)));
        for (n, t) in shapes {
            let t_axis = if kind == FieldKind::Dynamic { t } else { n };
            cfg.model
                .transform
                .check_shape(n, t_axis)
                .map_err(|e| err(format!("grid {n}x{t_axis}: {e}")))?;
        }
        Ok(cfg)
    }

    /// Effective configuration (defaults filled in), one key per line in
    /// sorted order.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.values {
            writeln!(s, "{k}={v}").expect("write to string");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_overrides() {
        let c = Config::parse("scene=constant\nsteps=10\n# comment\n\n n = 16 \n").unwrap();
        assert_eq!(c.get::<usize>("n").unwrap(), 16);
        assert_eq!(c.get::<usize>("t").unwrap(), 8);
        assert_eq!(c.str("scene").unwrap(), "constant");
        assert!(c.raw("image").is_none());
    }

    #[test]
    fn unknown_key_reports_line() {
        let e = Config::parse("scene=constant\n\nbogus=1\n").unwrap_err();
        assert_eq!(e.to_string(), "config error: line 3: unknown key 'bogus'");
        let e = Config::parse("scene=constant\nno equals here\n").unwrap_err();
        assert!(e.to_string().contains("line 2"));
        let e = Config::parse("n=1\nn=2\n").unwrap_err();
        assert!(e.to_string().contains("line 2") && e.to_string().contains("line 1"));
    }

    #[test]
    fn missing_required_key_is_named() {
        let c = Config::parse("scene=constant\n").unwrap();
        let e = c.fit_config().unwrap_err();
        assert!(e.to_string().contains("'steps'"), "{e}");
    }

    #[test]
    fn echo_round_trips() {
        let c = Config::parse("scene=textured-box\nsteps=5\nupsample=2:16:16\nseed=9\n").unwrap();
        let again = Config::parse(&c.echo()).unwrap();
        assert_eq!(again, c);
        assert_eq!(again.fit_config().unwrap(), c.fit_config().unwrap());
    }

    #[test]
    fn typed_values_are_validated() {
        let base = "scene=rotating-texture-4d\nsteps=5\n";
        for bad in [
            "n=abc",
            "density_ranks=1,2",
            "transform=fft",
            "upsample=3:16",
            "emptiness=4,2",
            "color=2,0,0",
            "batch=0",
            "bank=nope",
            "n=31",
        ] {
            let c = Config::parse(&format!("{base}{bad}\n")).unwrap();
            assert!(
                c.fit_config().is_err() && c.color().is_ok() || bad.starts_with("color"),
                "{bad}"
            );
        }
        let c = Config::parse(&format!("{base}density_ranks=1,2,3\ntransform=dwt\nwavelet=haar\n")).unwrap();
        let f = c.fit_config().unwrap();
        assert_eq!(f.model.density_ranks, [1, 2, 3]);
        assert_eq!(f.model.kind, FieldKind::Dynamic);
        assert!(matches!(
            f.model.transform,
            PlaneTransform::Dwt {
                wavelet: DwtWavelet::Haar,
                levels: 1
            }
        ));
    }

    #[test]
    fn shipped_configs_are_valid() {
        let dir = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
        let mut seen = 0;
        for entry in std::fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.extension().is_some_and(|e| e == "conf") {
                let c = Config::parse(&std::fs::read_to_string(&path).unwrap()).unwrap();
                c.fit_config().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
                crate::scene::Scene::from_config(&c).unwrap();
                seen += 1;
            }
        }
        assert!(seen >= 4);
    }
}

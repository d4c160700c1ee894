//! `key = value` config files and resolution of pipeline settings.
//!
//! Precedence: command-line flag, then config file, then profile default.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use clap::ValueEnum;
use seasoncorr::matching::MatchingParams;
use seasoncorr::pointcloud::{FusionConfig, DEFAULT_REL_DEPTH_TOL};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Profile {
    /// Dense MVS clouds, camera pairs closer than 0.5 m.
    Cmu,
    /// LIDAR clouds, camera pairs closer than 2.0 m, visibility recomputed.
    Robotcar,
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cmu" | "cmu-like" => Ok(Profile::Cmu),
            "robotcar" | "robotcar-like" => Ok(Profile::Robotcar),
            other => Err(format!("unknown profile {other:?}")),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ConfigFile {
    entries: BTreeMap<String, (usize, String)>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(CliError::usage(format!(
                    "config line {}: expected `key = value`",
                    i + 1
                )));
            };
            let key = k.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(CliError::usage(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            entries.insert(key, (i + 1, v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(Self::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::usage(format!("{}: {e}", p.display())))?;
                Self::parse(&text)
            }
        }
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some((line, v)) => v
                .parse()
                .map(Some)
                .map_err(|_| CliError::usage(format!("config line {line}: bad value {v:?} for {key}"))),
        }
    }
}

const KNOWN_KEYS: &[&str] = &[
    "profile",
    "kappa",
    "min_common",
    "max_cam_dist",
    "threads",
    "visibility_tol",
    "condition",
    "pixel_stride",
    "merge_radius",
    "min_views",
];

/// Pipeline settings as given on the command line; `None` means unset.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub kappa: Option<f64>,
    pub min_common: Option<usize>,
    pub max_cam_dist: Option<f64>,
    pub threads: Option<usize>,
    pub visibility_tol: Option<f64>,
    pub condition: Option<String>,
    pub pixel_stride: Option<u32>,
    pub merge_radius: Option<f64>,
    pub min_views: Option<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub profile: Profile,
    pub matching: MatchingParams<f64>,
    pub fusion: FusionConfig<f64>,
    pub visibility_tol: f64,
    /// 0 means one thread per logical CPU.
    pub threads: usize,
    pub condition: Option<String>,
}

impl PipelineConfig {
    pub fn resolve(flags: &Overrides, file: &ConfigFile) -> Result<Self, CliError> {
        fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>, CliError> {
            match flag {
                Some(v) => Ok(Some(v)),
                None => file.get(key),
            }
        }
        let profile = pick(flags.profile, file, "profile")?.unwrap_or(Profile::Cmu);
        let base = match profile {
            Profile::Cmu => MatchingParams::cmu(),
            Profile::Robotcar => MatchingParams::robotcar(),
        };
        let fusion_base = FusionConfig::default();
        let cfg = PipelineConfig {
            profile,
            matching: MatchingParams {
                min_common: pick(flags.min_common, file, "min_common")?.unwrap_or(base.min_common),
                max_cam_dist: pick(flags.max_cam_dist, file, "max_cam_dist")?.unwrap_or(base.max_cam_dist),
                kappa: pick(flags.kappa, file, "kappa")?.unwrap_or(base.kappa),
            },
            fusion: FusionConfig {
                pixel_stride: pick(flags.pixel_stride, file, "pixel_stride")?.unwrap_or(fusion_base.pixel_stride),
                merge_radius: pick(flags.merge_radius, file, "merge_radius")?.unwrap_or(fusion_base.merge_radius),
                min_views: pick(flags.min_views, file, "min_views")?.unwrap_or(fusion_base.min_views),
            },
            visibility_tol: pick(flags.visibility_tol, file, "visibility_tol")?.unwrap_or(DEFAULT_REL_DEPTH_TOL),
            threads: pick(flags.threads, file, "threads")?.unwrap_or(0),
            condition: pick(flags.condition.clone(), file, "condition")?,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        self.matching.validate().map_err(CliError::from)?;
        if !(self.visibility_tol > 0.0) {
            return Err(CliError::usage("visibility_tol must be positive"));
        }
        if self.fusion.pixel_stride == 0 {
            return Err(CliError::usage("pixel_stride must be at least 1"));
        }
        if !(self.fusion.merge_radius >= 0.0) {
            return Err(CliError::usage("merge_radius must be nonnegative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_defaults() {
        let cfg = PipelineConfig::resolve(&Overrides::default(), &ConfigFile::default()).unwrap();
        assert_eq!(cfg.matching, MatchingParams::cmu());
        let flags = Overrides {
            profile: Some(Profile::Robotcar),
            ..Default::default()
        };
        let cfg = PipelineConfig::resolve(&flags, &ConfigFile::default()).unwrap();
        assert_eq!(cfg.matching.max_cam_dist, 2.0);
        assert_eq!(cfg.matching.min_common, 500);
    }

    #[test]
    fn flags_beat_file_beats_profile() {
        let file = ConfigFile::parse("# sweep\nprofile = robotcar\nkappa = 0.02\nmin-common = 10\n\n").unwrap();
        let flags = Overrides {
            kappa: Some(0.05),
            ..Default::default()
        };
        let cfg = PipelineConfig::resolve(&flags, &file).unwrap();
        assert_eq!(cfg.profile, Profile::Robotcar);
        assert_eq!(cfg.matching.kappa, 0.05);
        assert_eq!(cfg.matching.min_common, 10);
        assert_eq!(cfg.matching.max_cam_dist, 2.0);
    }

    #[test]
    fn bad_files_are_usage_errors() {
        for text in ["kappa 0.1", "colour = red", "kappa = x"] {
            let res = ConfigFile::parse(text).and_then(|f| PipelineConfig::resolve(&Overrides::default(), &f));
            assert_eq!(res.unwrap_err().code, 2, "{text}");
        }
        let file = ConfigFile::parse("kappa = -1").unwrap();
        assert!(PipelineConfig::resolve(&Overrides::default(), &file).is_err());
    }
}

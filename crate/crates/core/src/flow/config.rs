//! Run configuration: flat `key = value` text (with `#` comments) or a JSON
//! object with the same keys.

use std::collections::BTreeMap;
use std::path::PathBuf;

use serde::Serialize;

use crate::curve::AnalyticCurve;
use crate::error::{Error, Result};
use crate::psi::{Modulator, Regime};
use crate::speed::SpeedFunction;
use crate::surface::AnalyticSurface;

use super::curve_flow::Integrator;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Geometry {
    Curve(AnalyticCurve),
    Surface { seed: String },
    CurveFile { path: PathBuf },
    SurfaceFile { path: PathBuf },
}

impl Geometry {
    /// Seed names (`ellipse:a=2,b=1`, `sphere:r=1`, ...) or `curve_csv:PATH`,
    /// `surface_csv:PATH`.
    pub fn parse(text: &str) -> Result<Self> {
        if let Some(p) = text.strip_prefix("curve_csv:") {
            return Ok(Geometry::CurveFile { path: p.into() });
        }
        if let Some(p) = text.strip_prefix("surface_csv:") {
            return Ok(Geometry::SurfaceFile { path: p.into() });
        }
        match AnalyticSurface::parse(text) {
            Ok(s) => Ok(Geometry::Surface { seed: s.name() }),
            Err(_) => AnalyticCurve::parse(text).map(Geometry::Curve),
        }
    }

    pub fn is_curve(&self) -> bool {
        matches!(self, Geometry::Curve(_) | Geometry::CurveFile { .. })
    }

    /// Dimension of the moving hypersurface.
    pub fn dim(&self) -> usize {
        if self.is_curve() {
            1
        } else {
            2
        }
    }

    pub fn surface(&self) -> Option<AnalyticSurface> {
        match self {
            Geometry::Surface { seed } => AnalyticSurface::parse(seed).ok(),
            _ => None,
        }
    }

    /// Radius of a round seed centered at the origin.
    pub fn round_radius(&self) -> Option<f64> {
        match self {
            Geometry::Curve(AnalyticCurve::Circle { r }) => Some(*r),
            _ => match self.surface() {
                Some(AnalyticSurface::Sphere { r }) => Some(r),
                _ => None,
            },
        }
    }
}

pub fn parse_regime(s: &str) -> Result<Regime> {
    match s {
        "convex" => Ok(Regime::ConvexTheoremApplies),
        "inverse_concave" => Ok(Regime::InverseConcaveTheoremApplies),
        "both" => Ok(Regime::Both),
        "neither" => Ok(Regime::Neither),
        other => Err(Error::Parse(format!("unknown regime {other:?} (convex|inverse_concave|both|neither)"))),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FlowConfig {
    pub geometry: String,
    pub speed: String,
    pub psi: String,
    /// Expected regime; checked against the classification when given.
    pub regime: Option<Regime>,
    pub t_max: f64,
    pub c_cfl: f64,
    pub dt_max: f64,
    /// Fixed step; rejected if above the stability bound.
    pub dt: Option<f64>,
    pub n: usize,
    pub n_lat: usize,
    pub n_lon: usize,
    pub remesh_interval: usize,
    pub record_dt: f64,
    pub seed: u64,
    pub tol_flow: f64,
    pub integrator: Integrator,
    /// Stop (without error) once the largest curvature exceeds this.
    pub kappa_cap: Option<f64>,
    /// Pass only if the pinching ratio stays below this multiple of its
    /// initial value.
    pub pinching_factor: Option<f64>,
    /// Compare with the round-sphere radius ODE.
    pub oracle: bool,
    pub oracle_tol: f64,
    /// Keep the state every this many records (0: never).
    pub snapshot_every: usize,
}

pub const KEYS: [&str; 21] = [
    "geometry",
    "speed",
    "psi",
    "regime",
    "t_max",
    "c_cfl",
    "dt_max",
    "dt",
    "n",
    "n_lat",
    "n_lon",
    "remesh_interval",
    "record_dt",
    "seed",
    "tol_flow",
    "integrator",
    "kappa_cap",
    "pinching_factor",
    "oracle",
    "oracle_tol",
    "snapshot_every",
];

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            geometry: "circle:r=1".into(),
            speed: "power_mean:r=1".into(),
            psi: "identity".into(),
            regime: None,
            t_max: 0.1,
            c_cfl: 0.4,
            dt_max: 1e-2,
            dt: None,
            n: 256,
            n_lat: 32,
            n_lon: 64,
            remesh_interval: 25,
            record_dt: 0.01,
            seed: 0,
            tol_flow: 1e-3,
            integrator: Integrator::Euler,
            kappa_cap: None,
            pinching_factor: None,
            oracle: false,
            oracle_tol: 1e-3,
            snapshot_every: 0,
        }
    }
}

fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Parse(format!("{key}: cannot parse {v:?}")))
}

fn flag(key: &str, v: &str) -> Result<bool> {
    match v {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(Error::Parse(format!("{key}: expected a boolean, got {v:?}"))),
    }
}

impl FlowConfig {
    /// JSON when the text starts with `{`, otherwise `key = value` lines.
    pub fn parse_str(text: &str) -> Result<Self> {
        let map = if text.trim_start().starts_with('{') {
            let obj: BTreeMap<String, serde_json::Value> =
                serde_json::from_str(text).map_err(|e| Error::Parse(format!("json: {e}")))?;
            obj.into_iter()
                .map(|(k, v)| {
                    let s = match v {
                        serde_json::Value::String(s) => s,
                        serde_json::Value::Number(n) => n.to_string(),
                        serde_json::Value::Bool(b) => b.to_string(),
                        serde_json::Value::Null => "none".into(),
                        other => return Err(Error::Parse(format!("{k}: unsupported value {other}"))),
                    };
                    Ok((k, s))
                })
                .collect::<Result<BTreeMap<_, _>>>()?
        } else {
            let mut map = BTreeMap::new();
            for (no, raw) in text.lines().enumerate() {
                let line = raw.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let (k, v) = line
                    .split_once('=')
                    .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", no + 1)))?;
                if map.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                    return Err(Error::Parse(format!("line {}: duplicate key {:?}", no + 1, k.trim())));
                }
            }
            map
        };
        Self::from_map(&map)
    }

    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut c = FlowConfig::default();
        let mut record_dt = None;
        for (k, v) in map {
            let none = v == "none";
            match k.as_str() {
                "geometry" => c.geometry = v.clone(),
                "speed" => c.speed = v.clone(),
                "psi" => c.psi = v.clone(),
                "regime" => c.regime = if none { None } else { Some(parse_regime(v)?) },
                "t_max" => c.t_max = num(k, v)?,
                "c_cfl" => c.c_cfl = num(k, v)?,
                "dt_max" => c.dt_max = num(k, v)?,
                "dt" => c.dt = if none { None } else { Some(num(k, v)?) },
                "n" => c.n = num(k, v)?,
                "n_lat" => c.n_lat = num(k, v)?,
                "n_lon" => c.n_lon = num(k, v)?,
                "remesh_interval" => c.remesh_interval = num(k, v)?,
                "record_dt" => record_dt = Some(num(k, v)?),
                "seed" => c.seed = num(k, v)?,
                "tol_flow" => c.tol_flow = num(k, v)?,
                "integrator" => c.integrator = v.parse()?,
                "kappa_cap" => c.kappa_cap = if none { None } else { Some(num(k, v)?) },
                "pinching_factor" => c.pinching_factor = if none { None } else { Some(num(k, v)?) },
                "oracle" => c.oracle = flag(k, v)?,
                "oracle_tol" => c.oracle_tol = num(k, v)?,
                "snapshot_every" => c.snapshot_every = num(k, v)?,
                other => return Err(Error::Parse(format!("unknown key {other:?}"))),
            }
        }
        c.record_dt = record_dt.unwrap_or(c.t_max / 100.0);
        c.validate()?;
        Ok(c)
    }

    pub fn geometry(&self) -> Result<Geometry> {
        Geometry::parse(&self.geometry)
    }

    pub fn speed_function(&self) -> Result<SpeedFunction> {
        SpeedFunction::parse(&self.speed, self.geometry()?.dim())
    }

    pub fn modulator(&self) -> Result<Modulator> {
        Modulator::parse(&self.psi)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Parse(m));
        let g = self.geometry()?;
        self.speed_function()?;
        self.modulator()?;
        if !(self.c_cfl > 0.0 && self.c_cfl <= 1.0) {
            return bad(format!("c_cfl = {} outside (0, 1]", self.c_cfl));
        }
        if !(self.t_max > 0.0 && self.t_max.is_finite()) {
            return bad(format!("t_max = {} must be positive", self.t_max));
        }
        if !(self.dt_max > 0.0) || self.dt.is_some_and(|d| !(d > 0.0)) {
            return bad("time steps must be positive".into());
        }
        if !(self.record_dt > 0.0) {
            return bad(format!("record_dt = {} must be positive", self.record_dt));
        }
        if self.remesh_interval == 0 {
            return bad("remesh_interval must be at least 1".into());
        }
        if !(self.tol_flow >= 0.0 && self.oracle_tol >= 0.0) {
            return bad("tolerances must be non-negative".into());
        }
        if g.is_curve() && self.n < 64 {
            return bad(format!("n = {} below 64", self.n));
        }
        if !g.is_curve() && (self.n_lat < 32 || self.n_lon < 64) {
            return bad(format!("grid {}x{} below 32x64", self.n_lat, self.n_lon));
        }
        if self.oracle && g.round_radius().is_none() {
            return bad("oracle comparison needs a circle or sphere seed".into());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_json_agree() {
        let text = "geometry = ellipse:a=2,b=1  # seed\npsi = neg_power:alpha=1\nt_max = 1\nn = 512\noracle = false\n";
        let json = r#"{"geometry":"ellipse:a=2,b=1","psi":"neg_power:alpha=1","t_max":1,"n":512,"oracle":false}"#;
        let a = FlowConfig::parse_str(text).unwrap();
        assert_eq!(a, FlowConfig::parse_str(json).unwrap());
        assert_eq!(a.record_dt, 0.01);
        assert_eq!(a.geometry().unwrap().dim(), 1);
    }

    #[test]
    fn rejects_bad_input() {
        for bad in [
            "c_cfl = 1.5",
            "n = 32",
            "unknown = 3",
            "geometry = torus",
            "psi = nope",
            "geometry = ellipse\noracle = true",
            "t_max = 1\nt_max = 2",
            "just text",
            "geometry = sphere\nn_lat = 16",
        ] {
            assert!(matches!(FlowConfig::parse_str(bad), Err(Error::Parse(_))), "{bad}");
        }
    }

    #[test]
    fn surface_geometry_uses_two_dimensional_speed() {
        let c = FlowConfig::parse_str("geometry = ellipsoid:a=1.5,b=1,c=1\nspeed = sigma_root:k=2").unwrap();
        assert_eq!(c.speed_function().unwrap().n, 2);
        assert!(c.geometry().unwrap().round_radius().is_none());
    }
}

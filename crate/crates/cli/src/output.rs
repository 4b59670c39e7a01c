use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use sagnac_core::config::{RunMetadata, ScenarioConfig};
use sagnac_core::SensitivityCurve;

pub const CSV_HEADER: &str =
    "phi,mean_intensity,var_intensity,dintensity_dphi,delta2phi,delta2phi_snl,ratio,ratio_db";

/// Scientific notation with 12 significant digits; non-finite values as
/// `inf`, `-inf` or `nan`.
pub fn num(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.11e}")
    }
}

pub fn curve_csv(curve: &SensitivityCurve) -> String {
    let mut s = String::with_capacity(128 * (curve.points.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for p in &curve.points {
        let row = [
            p.phi,
            p.mean_n,
            p.var_n,
            p.dmean_dphi,
            p.delta2phi,
            p.snl,
            p.ratio,
            p.ratio_db,
        ]
        .map(num)
        .join(",");
        let _ = writeln!(s, "{row}");
    }
    s
}

/// `<out>.meta.json`, keeping the full original file name.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.file_name().unwrap_or_default().to_os_string();
    name.push(".meta.json");
    out.with_file_name(name)
}

pub fn write_run(
    out: &Path,
    config: &ScenarioConfig,
    curve: &SensitivityCurve,
) -> std::io::Result<()> {
    std::fs::write(out, curve_csv(curve))?;
    let meta = RunMetadata::new(config, curve.kappa_applied);
    std::fs::write(sidecar_path(out), meta.to_json() + "\n")
}

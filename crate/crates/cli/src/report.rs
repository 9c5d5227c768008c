//! Number formatting and CSV assembly shared by the subcommands.

use bayesfusion::MetricReport;

/// Formats a value with six significant digits in plain decimal notation,
/// so repeated runs produce byte-identical, diff-able reports.
pub fn sig6(x: f64) -> String {
    if !x.is_finite() {
        return x.to_string();
    }
    if x == 0.0 {
        return "0.000000".to_string();
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (5 - magnitude).clamp(0, 17) as usize;
    format!("{x:.decimals$}")
}

/// Key=value lines printed to stdout for a single report.
pub fn print_report(report: &MetricReport<f64>) {
    println!("en={}", sig6(report.en));
    println!("mi={}", sig6(report.mi));
    println!("qabf={}", sig6(report.qabf));
    println!("sd={}", sig6(report.sd));
    println!("ssim_sum={}", sig6(report.ssim_sum));
    println!("ssim_mean={}", sig6(report.ssim_mean));
}

/// Quotes a CSV field when it contains separators or quotes.
pub fn csv_escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Header of the batch report.
pub const BATCH_CSV_HEADER: &str = "id,en,mi,qabf,sd,ssim_sum,ssim_mean,wall_ms,error";

/// One successful batch row.
pub fn batch_row(id: &str, report: &MetricReport<f64>, wall_ms: u128) -> String {
    format!(
        "{},{},{},{},{},{},{},{},",
        csv_escape(id),
        sig6(report.en),
        sig6(report.mi),
        sig6(report.qabf),
        sig6(report.sd),
        sig6(report.ssim_sum),
        sig6(report.ssim_mean),
        wall_ms
    )
}

/// One failed batch row: metric columns empty, the error in the last column.
pub fn batch_error_row(id: &str, wall_ms: u128, error: &str) -> String {
    format!(
        "{},,,,,,,{},{}",
        csv_escape(id),
        wall_ms,
        csv_escape(&format!("error: {error}"))
    )
}

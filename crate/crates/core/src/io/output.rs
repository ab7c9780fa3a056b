//! CSV and JSON writers. Column sets and orderings are fixed; units are part
//! of the column names.

use std::path::Path;

use serde::Serialize;

use crate::error::Result;
use crate::objectives::{DensityHistogram, ObjectiveVector, SolutionRecord};
use crate::sealevel::{slr_project, SlrCalibration, SlrParams};
use crate::sensitivity::{OatReport, SobolIndices};
use crate::surge::{AnnualMaximum, McmcChain, ReturnLevelCurve};
use crate::uncertainty::{Parameter, StateOfTheWorld};

pub const OBJECTIVE_COLUMNS: [&str; 4] = [
    "total_cost_guilders",
    "investment_guilders",
    "flood_probability_per_yr",
    "damages_guilders",
];

fn writer(path: &Path, header: &[&str]) -> Result<csv::Writer<std::fs::File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    Ok(w)
}

fn objective_fields(o: &ObjectiveVector) -> [String; 4] {
    o.as_array().map(|v| v.to_string())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(value)? + "\n")?;
    Ok(())
}

/// `height_m` plus the four objectives.
pub fn write_curve(path: &Path, heights: &[f64], curve: &[ObjectiveVector]) -> Result<()> {
    let mut header = vec!["height_m"];
    header.extend(OBJECTIVE_COLUMNS);
    let mut w = writer(path, &header)?;
    for (h, o) in heights.iter().zip(curve) {
        let mut row = vec![h.to_string()];
        row.extend(objective_fields(o));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_solutions<'a>(path: &Path, solutions: impl IntoIterator<Item = &'a SolutionRecord>) -> Result<()> {
    let mut header = vec!["sow", "height_index", "height_m"];
    header.extend(OBJECTIVE_COLUMNS);
    let mut w = writer(path, &header)?;
    for s in solutions {
        let mut row = vec![s.sow.to_string(), s.height_index.to_string(), s.height.to_string()];
        row.extend(objective_fields(&s.objectives));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_density(path: &Path, h: &DensityHistogram) -> Result<()> {
    let mut w = writer(path, &["x_lo", "x_hi", "y_lo", "y_hi", "count", "log10_count_plus1"])?;
    let logs = h.log_counts();
    for (i, row) in h.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            w.write_record([
                h.x_edges[i].to_string(),
                h.x_edges[i + 1].to_string(),
                h.y_edges[j].to_string(),
                h.y_edges[j + 1].to_string(),
                c.to_string(),
                logs[i][j].to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sows(path: &Path, sows: &[StateOfTheWorld]) -> Result<()> {
    let present: Vec<Parameter> = Parameter::ALL
        .into_iter()
        .filter(|p| sows.first().is_some_and(|s| p.get(s).is_some()))
        .collect();
    let mut header = vec!["sow"];
    header.extend(present.iter().map(|p| p.name()));
    let mut w = writer(path, &header)?;
    for s in sows {
        let mut row = vec![s.index.to_string()];
        row.extend(present.iter().map(|p| p.get(s).map(|v| v.to_string()).unwrap_or_default()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_return_levels(path: &Path, curve: &ReturnLevelCurve) -> Result<()> {
    let mut w = writer(
        path,
        &[
            "return_period_yr",
            "expected_mm",
            "lo90_mm",
            "hi90_mm",
            "lo95_mm",
            "hi95_mm",
            "interval_kind",
        ],
    )?;
    let kind = serde_json::to_value(curve.kind)?.as_str().unwrap_or_default().to_string();
    for p in &curve.points {
        w.write_record([
            p.period.to_string(),
            p.expected.to_string(),
            p.lo90.to_string(),
            p.hi90.to_string(),
            p.lo95.to_string(),
            p.hi95.to_string(),
            kind.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_block_maxima(path: &Path, maxima: &[AnnualMaximum]) -> Result<()> {
    let mut w = writer(path, &["year", "surge_mm", "observations"])?;
    for m in maxima {
        w.write_record([m.year.to_string(), m.value.to_string(), m.count.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Every `stride`-th chain sample.
pub fn write_chain(path: &Path, chain: &McmcChain, stride: usize) -> Result<()> {
    let mut w = writer(path, &["sample", "location_mm", "scale_mm", "shape"])?;
    for (i, p) in chain.samples.iter().enumerate().step_by(stride.max(1)) {
        w.write_record([
            i.to_string(),
            p.location.to_string(),
            p.scale.to_string(),
            p.shape.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn slr_row(p: &SlrParams) -> [String; 5] {
    [p.a, p.b, p.c, p.c_star, p.t_star].map(|v| v.to_string())
}

/// Calibrated members with their level in the projection year.
pub fn write_slr_posterior(path: &Path, cal: &SlrCalibration) -> Result<()> {
    let mut w = writer(
        path,
        &[
            "member",
            "a_m",
            "b_m_per_yr",
            "c_m_per_yr2",
            "c_star_m_per_yr",
            "t_star_year",
            "projection_level_m",
        ],
    )?;
    for (i, (p, level)) in cal.members.iter().zip(&cal.projections).enumerate() {
        let mut row = vec![i.to_string()];
        row.extend(slr_row(p));
        row.push(level.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// `(member, year, level)` from the first observed year to the projection year.
pub fn write_slr_projections(path: &Path, cal: &SlrCalibration, members: usize) -> Result<()> {
    let mut w = writer(path, &["member", "year", "level_m"])?;
    let first = cal.fit.first_year;
    let last = cal.projection_year.floor() as i32;
    for (i, p) in cal.members.iter().take(members).enumerate() {
        for year in first..=last {
            let t = f64::from(year) - p.reference_year;
            w.write_record([i.to_string(), year.to_string(), slr_project(p, t).to_string()])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sobol(dir: &Path, reports: &[SobolIndices]) -> Result<()> {
    let mut w = writer(
        &dir.join("sensitivity_indices.csv"),
        &["objective", "parameter", "first", "total", "first_raw", "total_raw"],
    )?;
    for r in reports {
        for (i, name) in r.names.iter().enumerate() {
            w.write_record([
                r.output.clone(),
                name.clone(),
                r.first[i].to_string(),
                r.total[i].to_string(),
                r.raw_first[i].to_string(),
                r.raw_total[i].to_string(),
            ])?;
        }
    }
    w.flush()?;
    let mut w2 = writer(
        &dir.join("sensitivity_second_order.csv"),
        &["objective", "parameter_a", "parameter_b", "second", "second_raw"],
    )?;
    let mut edges = writer(
        &dir.join("sensitivity_edges.csv"),
        &["objective", "kind", "source", "target", "first", "total", "second"],
    )?;
    for r in reports {
        for (i, name) in r.names.iter().enumerate() {
            edges.write_record([
                r.output.as_str(),
                "node",
                name,
                "",
                &r.first[i].to_string(),
                &r.total[i].to_string(),
                "",
            ])?;
        }
        if let (Some(s2), Some(raw)) = (&r.second, &r.raw_second) {
            for i in 0..r.names.len() {
                for j in (i + 1)..r.names.len() {
                    w2.write_record([
                        r.output.clone(),
                        r.names[i].clone(),
                        r.names[j].clone(),
                        s2[i][j].to_string(),
                        raw[i][j].to_string(),
                    ])?;
                    edges.write_record([
                        r.output.as_str(),
                        "edge",
                        &r.names[i],
                        &r.names[j],
                        "",
                        "",
                        &s2[i][j].to_string(),
                    ])?;
                }
            }
        }
    }
    w2.flush()?;
    edges.flush()?;
    Ok(())
}

pub fn write_oat(dir: &Path, reports: &[OatReport]) -> Result<()> {
    let mut w = writer(&dir.join("oat.csv"), &["objective", "parameter", "point", "input", "output"])?;
    let mut s = writer(
        &dir.join("oat_summary.csv"),
        &["objective", "parameter", "range", "share", "insensitive"],
    )?;
    for r in reports {
        for p in &r.parameters {
            for (k, (x, y)) in p.inputs.iter().zip(&p.outputs).enumerate() {
                w.write_record([r.output.clone(), p.name.clone(), k.to_string(), x.to_string(), y.to_string()])?;
            }
            s.write_record([
                r.output.clone(),
                p.name.clone(),
                p.range.to_string(),
                p.share.to_string(),
                p.insensitive.to_string(),
            ])?;
        }
    }
    w.flush()?;
    s.flush()?;
    Ok(())
}

//! Human-readable renderings of an [`AllocationPlan`].

use std::fmt::Write as _;

use crate::model::AllocationPlan;

/// Two-decimal rendering with halves rounded up.
///
/// The value is first snapped to 1e-6 of a hundredth so that binary
/// representations such as `2.675 = 2.67499999…` round the way they read.
pub fn fmt2(value: f64) -> String {
    let hundredths = ((value * 100.0 * 1e6).round() / 1e6 + 0.5).floor();
    let rounded = hundredths / 100.0;
    // Avoid printing "-0.00".
    let rounded = if rounded == 0.0 { 0.0 } else { rounded };
    format!("{rounded:.2}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
    /// Fixed-width columns for terminals.
    Text,
}

struct Table {
    title: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

fn tables(plan: &AllocationPlan) -> Vec<Table> {
    let demand_of = |name: &str| {
        plan.regions
            .iter()
            .find(|r| r.name == name)
            .map_or(0.0, |r| r.demand)
    };
    let mut out = Vec::new();

    if !plan.stage_ideal.is_empty() {
        let total: f64 = plan.stage_ideal.iter().map(|r| r.amount).sum();
        let predicted = |name: &str| {
            plan.predicted
                .iter()
                .find(|r| r.region == name)
                .map_or(String::new(), |r| fmt2(r.amount))
        };
        out.push(Table {
            title: "ideal",
            header: vec!["region", "demand", "predicted", "weight_pct", "ideal"],
            rows: plan
                .stage_ideal
                .iter()
                .map(|r| {
                    vec![
                        r.region.clone(),
                        fmt2(demand_of(&r.region)),
                        predicted(&r.region),
                        fmt2(100.0 * r.amount / total),
                        fmt2(r.amount),
                    ]
                })
                .collect(),
        });
    }

    let pre = &plan.stage_prepass;
    let mut rows: Vec<Vec<String>> = pre
        .satisfied
        .iter()
        .map(|r| vec![r.region.clone(), fmt2(r.amount)])
        .collect();
    rows.push(vec!["remaining supply".into(), fmt2(pre.remaining_supply)]);
    rows.push(vec!["balance demand".into(), fmt2(pre.balance_demand)]);
    out.push(Table {
        title: "prepass",
        header: vec!["region", "amount"],
        rows,
    });

    if let Some(opt) = &plan.stage_optimized {
        out.push(Table {
            title: "optimized",
            header: vec!["region", "demand", "ideal", "fraction_pct", "allocation"],
            rows: opt
                .regions
                .iter()
                .enumerate()
                .map(|(k, name)| {
                    vec![
                        name.clone(),
                        fmt2(demand_of(name)),
                        opt.ideals.get(k).map_or(String::new(), |a| fmt2(*a)),
                        fmt2(100.0 * opt.result.fractions[k]),
                        fmt2(opt.result.amounts[k]),
                    ]
                })
                .collect(),
        });
    }

    let mut rows: Vec<Vec<String>> = plan
        .stage_final
        .iter()
        .map(|r| {
            let capped = if plan.capped.contains(&r.region) { "yes" } else { "" };
            vec![
                r.region.clone(),
                fmt2(demand_of(&r.region)),
                fmt2(r.amount),
                capped.to_owned(),
            ]
        })
        .collect();
    rows.push(vec![
        "total".into(),
        fmt2(plan.regions.iter().map(|r| r.demand).sum()),
        fmt2(plan.final_sum()),
        String::new(),
    ]);
    rows.push(vec!["surplus".into(), String::new(), fmt2(plan.surplus), String::new()]);
    out.push(Table {
        title: "final",
        header: vec!["region", "demand", "allocation", "capped"],
        rows,
    });
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_owned()
    }
}

/// Renders one table per plan stage.
pub fn render(plan: &AllocationPlan, format: ReportFormat) -> String {
    let mut out = String::new();
    match format {
        ReportFormat::Markdown => {
            let _ = writeln!(
                out,
                "# Allocation plan ({} level, {} redistribution)\n",
                plan.level, plan.redistribution
            );
            let _ = writeln!(out, "Total supply: {}\n", fmt2(plan.conservation_total));
            if let Some(opt) = &plan.stage_optimized {
                let _ = writeln!(
                    out,
                    "Multiplier: {:.6}, KKT residual: {:.3e}, clamped: {}\n",
                    opt.result.multiplier,
                    opt.kkt_residual,
                    opt.result.active_set.len()
                );
            }
            for table in tables(plan) {
                let _ = writeln!(out, "## Stage: {}\n", table.title);
                let _ = writeln!(out, "| {} |", table.header.join(" | "));
                let _ = writeln!(
                    out,
                    "|{}",
                    table.header.iter().map(|_| "---|").collect::<String>()
                );
                for row in &table.rows {
                    let _ = writeln!(out, "| {} |", row.join(" | "));
                }
                out.push('\n');
            }
            for w in &plan.warnings {
                let _ = writeln!(out, "> warning: {w}");
            }
        }
        ReportFormat::Csv => {
            out.push_str("stage,region,demand,value\n");
            for table in tables(plan) {
                let value_col = table.header.len() - 1;
                for row in &table.rows {
                    let demand = if table.header.get(1) == Some(&"demand") {
                        row[1].as_str()
                    } else {
                        ""
                    };
                    let value = match table.title {
                        "final" => &row[2],
                        _ => &row[value_col],
                    };
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        table.title,
                        csv_field(&row[0]),
                        demand,
                        value
                    );
                }
            }
        }
        ReportFormat::Text => {
            let _ = writeln!(
                out,
                "{} level, {} redistribution, supply {}",
                plan.level,
                plan.redistribution,
                fmt2(plan.conservation_total)
            );
            let pre = &plan.stage_prepass;
            let _ = writeln!(
                out,
                "pre-pass: {} region(s) satisfied, remaining supply {}, balance demand {}",
                pre.satisfied.len(),
                fmt2(pre.remaining_supply),
                fmt2(pre.balance_demand)
            );
            if let Some(opt) = &plan.stage_optimized {
                let _ = writeln!(
                    out,
                    "multiplier {:.6}, KKT residual {:.3e}, clamped {}",
                    opt.result.multiplier,
                    opt.kkt_residual,
                    opt.result.active_set.len()
                );
            }
            for table in tables(plan) {
                let _ = writeln!(out, "\n[{}]", table.title);
                let widths: Vec<usize> = (0..table.header.len())
                    .map(|c| {
                        table
                            .rows
                            .iter()
                            .map(|r| r[c].chars().count())
                            .chain([table.header[c].len()])
                            .max()
                            .unwrap_or(0)
                    })
                    .collect();
                let line = |cells: Vec<&str>| {
                    let parts: Vec<String> = cells
                        .iter()
                        .zip(&widths)
                        .enumerate()
                        .map(|(c, (cell, w))| {
                            if c == 0 {
                                format!("{cell:<w$}")
                            } else {
                                format!("{cell:>w$}")
                            }
                        })
                        .collect();
                    parts.join("  ").trim_end().to_owned()
                };
                let _ = writeln!(out, "{}", line(table.header.clone()));
                for row in &table.rows {
                    let _ = writeln!(out, "{}", line(row.iter().map(String::as_str).collect()));
                }
            }
            for w in &plan.warnings {
                let _ = writeln!(out, "warning: {w}");
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_up_rounding() {
        assert_eq!(fmt2(1.005), "1.01");
        assert_eq!(fmt2(2.675), "2.68");
        assert_eq!(fmt2(1326.0257), "1326.03");
        assert_eq!(fmt2(1207.5), "1207.50");
        assert_eq!(fmt2(0.0), "0.00");
        assert_eq!(fmt2(-0.001), "0.00");
        assert_eq!(fmt2(3153.0), "3153.00");
    }

    #[test]
    fn csv_quoting() {
        assert_eq!(csv_field("a,b"), "\"a,b\"");
        assert_eq!(csv_field("plain"), "plain");
    }
}

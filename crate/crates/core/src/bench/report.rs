//! Report rendering. JSON is the canonical form; CSV is a long
//! `section,group,key,value` table that parses back losslessly; Markdown
//! gives an accuracy table and a rule-usage table for reading.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use super::{group_label, Aggregation, BenchReport, Counts, GroupMetrics, Rates, RuleUsage};
use crate::rules::RuleId;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
    Markdown,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Format::Json),
            "csv" => Ok(Format::Csv),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(format!("unknown format '{s}'")),
        }
    }
}

const NA: &str = "n/a";

pub fn render_report(report: &BenchReport, format: Format) -> String {
    match format {
        Format::Json => {
            let mut text = serde_json::to_string_pretty(report).expect("report serializes to JSON");
            text.push('\n');
            text
        }
        Format::Csv => render_csv(report),
        Format::Markdown => render_markdown(report),
    }
}

fn number(v: Option<f64>) -> String {
    v.map_or_else(|| NA.to_string(), |x| x.to_string())
}

fn counts_fields(c: &Counts) -> [(&'static str, usize); 6] {
    [
        ("scored", c.scored),
        ("accurate_first_time", c.accurate_first_time),
        ("accurate_with_repair", c.accurate_with_repair),
        ("unknown", c.unknown),
        ("inaccurate", c.inaccurate),
        ("unscorable", c.unscorable),
    ]
}

fn render_csv(report: &BenchReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut row = |section: &str, group: &str, key: &str, value: &str| {
        w.write_record([section, group, key, value])
            .expect("writing to memory");
    };
    row("section", "group", "key", "value");
    row("meta", "", "counting_unit", &report.counting_unit);
    row("meta", "", "aggregation", &report.aggregation.to_string());
    row("meta", "", "repeats", &report.repeats.to_string());
    row(
        "meta",
        "",
        "total_violations",
        &report.total_violations.to_string(),
    );
    for g in &report.groups {
        for (key, value) in counts_fields(&g.counts) {
            row("counts", &g.group, key, &value.to_string());
        }
        for (key, value) in Rates::KEYS.iter().zip(g.rates.values()) {
            row("rates", &g.group, key, &number(value));
        }
        if let Some(stdev) = &g.stdev {
            for (key, value) in Rates::KEYS.iter().zip(stdev.values()) {
                row("stdev", &g.group, key, &number(value));
            }
        }
    }
    for u in &report.rule_usage {
        row("rule_usage", u.rule.name(), "count", &u.count.to_string());
        row(
            "rule_usage",
            u.rule.name(),
            "percentage",
            &number(u.percentage),
        );
    }
    String::from_utf8(w.into_inner().expect("flushing to memory")).expect("CSV is UTF-8")
}

#[derive(Error, Debug, Clone, PartialEq, Eq)]
pub enum ReportParseError {
    #[error("CSV error: {0}")]
    Csv(String),
    #[error("line {line}: {message}")]
    Value { line: usize, message: String },
}

#[derive(Default)]
struct GroupBuilder {
    counts: Counts,
    rates: [Option<f64>; 6],
    stdev: Option<[Option<f64>; 6]>,
}

fn builder<'a>(
    groups: &'a mut BTreeMap<String, GroupBuilder>,
    order: &mut Vec<String>,
    group: &str,
) -> &'a mut GroupBuilder {
    if !groups.contains_key(group) {
        order.push(group.to_string());
    }
    groups.entry(group.to_string()).or_default()
}

/// Parse the CSV form back into a report.
pub fn parse_report_csv(text: &str) -> Result<BenchReport, ReportParseError> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let mut report = BenchReport {
        counting_unit: String::new(),
        aggregation: Aggregation::Pooled,
        repeats: 1,
        groups: Vec::new(),
        total_violations: 0,
        rule_usage: Vec::new(),
    };
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, GroupBuilder> = BTreeMap::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| ReportParseError::Csv(e.to_string()))?;
        let err = |message: String| ReportParseError::Value { line, message };
        let [section, group, key, value] = [0, 1, 2, 3].map(|k| record.get(k).unwrap_or(""));
        let int = || value.parse::<usize>().map_err(|e| err(e.to_string()));
        let float = || -> Result<Option<f64>, ReportParseError> {
            if value == NA {
                return Ok(None);
            }
            value
                .parse::<f64>()
                .map(Some)
                .map_err(|e| err(e.to_string()))
        };
        let rate_index = || {
            Rates::KEYS
                .iter()
                .position(|k| *k == key)
                .ok_or_else(|| err(format!("unknown rate '{key}'")))
        };
        match section {
            "meta" => match key {
                "counting_unit" => report.counting_unit = value.to_string(),
                "aggregation" => report.aggregation = value.parse().map_err(err)?,
                "repeats" => report.repeats = int()?,
                "total_violations" => report.total_violations = int()?,
                _ => return Err(err(format!("unknown meta key '{key}'"))),
            },
            "counts" => {
                let n = int()?;
                let c = &mut builder(&mut groups, &mut order, group).counts;
                match key {
                    "scored" => c.scored = n,
                    "accurate_first_time" => c.accurate_first_time = n,
                    "accurate_with_repair" => c.accurate_with_repair = n,
                    "unknown" => c.unknown = n,
                    "inaccurate" => c.inaccurate = n,
                    "unscorable" => c.unscorable = n,
                    _ => return Err(err(format!("unknown count '{key}'"))),
                }
            }
            "rates" => {
                let (k, v) = (rate_index()?, float()?);
                builder(&mut groups, &mut order, group).rates[k] = v;
            }
            "stdev" => {
                let (k, v) = (rate_index()?, float()?);
                builder(&mut groups, &mut order, group)
                    .stdev
                    .get_or_insert([None; 6])[k] = v;
            }
            "rule_usage" => {
                let rule: RuleId = group.parse().map_err(err)?;
                let pos = match report.rule_usage.iter().position(|u| u.rule == rule) {
                    Some(p) => p,
                    None => {
                        report.rule_usage.push(RuleUsage {
                            rule,
                            count: 0,
                            percentage: None,
                        });
                        report.rule_usage.len() - 1
                    }
                };
                match key {
                    "count" => report.rule_usage[pos].count = int()?,
                    "percentage" => report.rule_usage[pos].percentage = float()?,
                    _ => return Err(err(format!("unknown usage key '{key}'"))),
                }
            }
            _ => return Err(err(format!("unknown section '{section}'"))),
        }
    }
    for name in order {
        let b = groups.remove(&name).unwrap_or_default();
        report.groups.push(GroupMetrics {
            group: name,
            counts: b.counts,
            rates: Rates::from_values(b.rates),
            stdev: b.stdev.map(Rates::from_values),
        });
    }
    Ok(report)
}

fn percent(value: Option<f64>, spread: Option<f64>) -> String {
    match (value, spread) {
        (None, _) => NA.to_string(),
        (Some(v), None) => format!("{v:.2}%"),
        (Some(v), Some(s)) => format!("{v:.2}% ± {s:.2}"),
    }
}

fn render_markdown(report: &BenchReport) -> String {
    let mut out = String::new();
    let aggregation = match report.aggregation {
        Aggregation::Pooled => "pooled over all scored runs",
        Aggregation::Macro => "mean of the quadrant rows",
    };
    let _ = writeln!(out, "## Execution accuracy\n");
    let _ = writeln!(
        out,
        "Overall row: {aggregation}. Repeats: {}{}.\n",
        report.repeats,
        if report.repeats > 1 {
            " (mean ± sample stdev)"
        } else {
            ""
        }
    );
    out.push_str(
        "| Group | EA First Time | EA with Repairs | Unknown with Repairs \
         | EA + Unknown with Repairs | Error Rate | Achievable Improvement \
         | Scored | Unscorable |\n",
    );
    out.push_str("|:---|---:|---:|---:|---:|---:|---:|---:|---:|\n");
    for g in &report.groups {
        let spread = g.stdev.map(|s| s.values());
        let cells: Vec<String> = g
            .rates
            .values()
            .iter()
            .enumerate()
            .map(|(k, v)| percent(*v, spread.and_then(|s| s[k])))
            .collect();
        let _ = writeln!(
            out,
            "| {} | {} | {} | {} |",
            group_label(&g.group),
            cells.join(" | "),
            g.counts.scored,
            g.counts.unscorable
        );
    }
    let _ = writeln!(out, "\n## Rule usage\n");
    let _ = writeln!(
        out,
        "Counting unit: {}. Total: {}.\n",
        report.counting_unit, report.total_violations
    );
    out.push_str("| Rule | Usage |\n|:---|---:|\n");
    for u in &report.rule_usage {
        let _ = writeln!(
            out,
            "| {} | {} |",
            u.rule.label(),
            percent(u.percentage, None)
        );
    }
    out
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{format_pct, pct, LazinessRate, Ratio};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FunctionMetrics {
    /// Non-blank lines of the function's final item.
    pub line_count: usize,
    /// `None` when the item does not parse.
    pub safe_lines: Option<usize>,
    pub lazy: bool,
    pub compiled: bool,
    pub mml: usize,
}

/// Raw counts of one module, the inputs of every percentage in the report.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SummaryRow {
    pub lines: u64,
    pub llm_lines: u64,
    pub mml: u64,
    pub sc: u64,
    pub sc_llm: u64,
}

impl SummaryRow {
    /// `% MML`, `% SC` and `% SC-LLM`, two decimals each.
    pub fn percentages(&self) -> [String; 3] {
        [
            format_pct(self.mml, self.lines),
            format_pct(self.sc, self.lines),
            format_pct(self.sc_llm, self.llm_lines),
        ]
    }

    pub fn markdown_header() -> &'static str {
        "| Dataset | # Line | # Line-LLM | # MML | # SC | # SC-LLM | % MML | % SC | % SC-LLM |\n|---|---:|---:|---:|---:|---:|---:|---:|---:|\n"
    }

    pub fn markdown_row(&self, dataset: &str) -> String {
        let [mml, sc, sc_llm] = self.percentages();
        format!(
            "| {dataset} | {} | {} | {} | {} | {} | {mml} | {sc} | {sc_llm} |\n",
            self.lines, self.llm_lines, self.mml, self.sc, self.sc_llm
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleMetrics {
    /// Non-blank lines of the final module.
    pub total_lines: usize,
    /// All lines of the final module, blank ones included.
    pub raw_lines: usize,
    /// Non-blank lines of items whose text came from the translation backend.
    pub llm_lines: usize,
    pub mml_count: usize,
    pub mml_pct: Option<f64>,
    pub sc_count: usize,
    pub sc_pct: Option<f64>,
    pub sc_llm_count: usize,
    pub sc_llm_pct: Option<f64>,
    pub csr: Option<Ratio>,
    pub laziness_rate: LazinessRate,
    pub codebleu: Option<f64>,
}

impl ModuleMetrics {
    pub fn new(
        raw_lines: usize,
        row: SummaryRow,
        csr: Option<Ratio>,
        laziness_rate: LazinessRate,
        codebleu: Option<f64>,
    ) -> Self {
        ModuleMetrics {
            total_lines: row.lines as usize,
            raw_lines,
            llm_lines: row.llm_lines as usize,
            mml_count: row.mml as usize,
            mml_pct: pct(row.mml, row.lines),
            sc_count: row.sc as usize,
            sc_pct: pct(row.sc, row.lines),
            sc_llm_count: row.sc_llm as usize,
            sc_llm_pct: pct(row.sc_llm, row.llm_lines),
            csr,
            laziness_rate,
            codebleu,
        }
    }

    pub fn table_row(&self) -> SummaryRow {
        SummaryRow {
            lines: self.total_lines as u64,
            llm_lines: self.llm_lines as u64,
            mml: self.mml_count as u64,
            sc: self.sc_count as u64,
            sc_llm: self.sc_llm_count as u64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_function: BTreeMap<String, FunctionMetrics>,
    pub module: ModuleMetrics,
    /// CSR after 0, 1, ... repair rounds.
    #[serde(default)]
    pub csr_by_round: Vec<Ratio>,
    /// Notes for the reader, e.g. items edited outside the review session.
    #[serde(default)]
    pub flags: Vec<String>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn to_markdown(&self, dataset: &str) -> String {
        let m = &self.module;
        let mut out = String::from("# Migration report\n\n");
        out.push_str(SummaryRow::markdown_header());
        out.push_str(&m.table_row().markdown_row(dataset));
        let _ = writeln!(out, "\nRaw line count (blank lines included): {}", m.raw_lines);
        if let Some(csr) = m.csr {
            let _ = writeln!(out, "Compilation success rate: {csr} ({:.4})", csr.value());
        }
        if !self.csr_by_round.is_empty() {
            let t: Vec<String> = self.csr_by_round.iter().map(|r| r.to_string()).collect();
            let _ = writeln!(out, "CSR by repair round: {}", t.join(" -> "));
        }
        let lr = &m.laziness_rate;
        let _ = writeln!(out, "Lazy translations: {}/{}", lr.lazy, lr.total);
        if let Some(cb) = m.codebleu {
            let _ = writeln!(out, "CodeBLEU: {cb:.4}");
        }
        if !self.per_function.is_empty() {
            out.push_str("\n| Function | Lines | Safe | Lazy | Compiled | MML |\n|---|---:|---:|---|---|---:|\n");
            for (id, f) in &self.per_function {
                let safe = f.safe_lines.map_or_else(|| "n/a".to_string(), |s| s.to_string());
                let _ = writeln!(
                    out,
                    "| {id} | {} | {safe} | {} | {} | {} |",
                    f.line_count,
                    if f.lazy { "yes" } else { "no" },
                    if f.compiled { "yes" } else { "no" },
                    f.mml
                );
            }
        }
        if !self.flags.is_empty() {
            out.push_str("\n## Flags\n\n");
            for f in &self.flags {
                let _ = writeln!(out, "- {f}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_formats_percentages() {
        let row = SummaryRow {
            lines: 321,
            llm_lines: 293,
            mml: 46,
            sc: 134,
            sc_llm: 106,
        };
        assert_eq!(row.percentages(), ["14.33", "41.74", "36.18"]);
        assert!(row
            .markdown_row("sort")
            .contains("| 46 | 134 | 106 | 14.33 | 41.74 | 36.18 |"));
    }
}

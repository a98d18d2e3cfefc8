//! One JSON object per line: a `step` record per optimizer step and an
//! `epoch` record per epoch.

use serde::{Deserialize, Serialize};

use phonexl_core::trainer::{EpochRecord, StepRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum LogRecord {
    Step {
        epoch: usize,
        step: u64,
        task: f64,
        align: f64,
        mlm: f64,
        xmlm: f64,
        total: f64,
        grad_norm: f64,
    },
    Epoch {
        epoch: usize,
        steps: u64,
        mean_loss: f64,
        dev_precision: Option<f64>,
        dev_recall: Option<f64>,
        dev_f1: Option<f64>,
        best: bool,
    },
}

impl From<&StepRecord> for LogRecord {
    fn from(r: &StepRecord) -> Self {
        LogRecord::Step {
            epoch: r.epoch,
            step: r.step,
            task: r.loss.task,
            align: r.loss.align,
            mlm: r.loss.mlm,
            xmlm: r.loss.xmlm,
            total: r.loss.total,
            grad_norm: r.grad_norm,
        }
    }
}

impl From<&EpochRecord> for LogRecord {
    fn from(r: &EpochRecord) -> Self {
        LogRecord::Epoch {
            epoch: r.epoch,
            steps: r.steps,
            mean_loss: r.mean_loss,
            dev_precision: r.dev.map(|s| s.precision),
            dev_recall: r.dev.map(|s| s.recall),
            dev_f1: r.dev.map(|s| s.f1),
            best: r.best,
        }
    }
}

impl LogRecord {
    pub fn to_line(&self) -> String {
        let mut s = serde_json::to_string(self).expect("record serializes");
        s.push('\n');
        s
    }
}

pub fn parse_log(text: &str) -> Result<Vec<LogRecord>, serde_json::Error> {
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(serde_json::from_str)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lines_round_trip() {
        let recs = [
            LogRecord::Step {
                epoch: 1,
                step: 1,
                task: 2.5,
                align: 0.1,
                mlm: 3.0,
                xmlm: 3.25,
                total: 2.6,
                grad_norm: 4.0,
            },
            LogRecord::Epoch {
                epoch: 1,
                steps: 1,
                mean_loss: 2.6,
                dev_precision: None,
                dev_recall: None,
                dev_f1: None,
                best: true,
            },
        ];
        let text: String = recs.iter().map(LogRecord::to_line).collect();
        assert!(text.starts_with("{\"type\":\"step\",\"epoch\":1,"));
        assert_eq!(parse_log(&text).unwrap(), recs);
    }
}

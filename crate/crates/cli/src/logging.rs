use std::io::Write;

use serde_json::{Map, Value};

/// Line-delimited JSON events on stderr.
#[derive(Clone, Copy, Debug, Default)]
pub struct Logger {
    pub quiet: bool,
    pub verbose: bool,
}

impl Logger {
    pub fn new(quiet: bool, verbose: bool) -> Self {
        Self { quiet, verbose }
    }

    fn emit(&self, level: &str, stage: &str, event: &str, fields: Value) {
        let mut line = Map::new();
        line.insert("level".into(), level.into());
        line.insert("stage".into(), stage.into());
        line.insert("event".into(), event.into());
        if let Value::Object(extra) = fields {
            line.extend(extra);
        }
        let text = Value::Object(line).to_string();
        let mut err = std::io::stderr().lock();
        let _ = writeln!(err, "{text}");
    }

    pub fn info(&self, stage: &str, event: &str, fields: Value) {
        if !self.quiet {
            self.emit("info", stage, event, fields);
        }
    }

    pub fn debug(&self, stage: &str, event: &str, fields: Value) {
        if self.verbose && !self.quiet {
            self.emit("debug", stage, event, fields);
        }
    }

    /// Errors are printed even in quiet mode.
    pub fn error(&self, stage: &str, message: &str) {
        self.emit("error", stage, "failed", serde_json::json!({ "message": message }));
    }
}

//! Adapter for an external translator process.
//!
//! Contract: the process prints one ready line once it is able to translate,
//! then reads newline-delimited sentences on stdin and answers each with one
//! line on stdout, in order. Setup cost is the time from spawn to the ready
//! line; sentence cost is the measured round trip.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::Instant;

use super::{Engine, EngineError, EngineKind, Translation};
use crate::corpus::Sentence;

pub struct ExternalCommandEngine {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    setup_seconds: f64,
}

impl ExternalCommandEngine {
    pub fn spawn(command: &str, args: &[String]) -> Result<Self, EngineError> {
        let start = Instant::now();
        let mut child = Command::new(command)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| EngineError::Spawn(format!("{command}: {e}")))?;
        let stdin = child.stdin.take().expect("piped stdin");
        let mut stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut ready = String::new();
        let n = stdout
            .read_line(&mut ready)
            .map_err(|e| EngineError::Spawn(format!("{command}: reading ready line: {e}")))?;
        if n == 0 {
            let status = child.wait().ok();
            return Err(EngineError::Spawn(format!(
                "{command} exited before its ready line ({})",
                status.map_or("unknown status".into(), |s| s.to_string())
            )));
        }
        Ok(ExternalCommandEngine {
            child,
            stdin,
            stdout,
            setup_seconds: start.elapsed().as_secs_f64(),
        })
    }

    fn fail(&mut self, index: usize, what: &str) -> EngineError {
        let status = match self.child.try_wait() {
            Ok(Some(status)) => status.to_string(),
            _ => match self.child.wait() {
                Ok(status) => status.to_string(),
                Err(e) => e.to_string(),
            },
        };
        EngineError::Sentence {
            sentence_index: index,
            reason: format!("{what} ({status})"),
        }
    }
}

impl Engine for ExternalCommandEngine {
    fn kind(&self) -> EngineKind {
        EngineKind::ExternalCommand
    }

    fn setup_seconds(&self) -> f64 {
        self.setup_seconds
    }

    fn translate_sentence(&mut self, sentence: &Sentence) -> Result<Translation, EngineError> {
        let index = sentence.index();
        let start = Instant::now();
        let sent = writeln!(self.stdin, "{}", sentence.text()).and_then(|_| self.stdin.flush());
        if sent.is_err() {
            return Err(self.fail(index, "translator closed its input"));
        }
        let mut line = Vec::new();
        match self.stdout.read_until(b'\n', &mut line) {
            Ok(0) => return Err(self.fail(index, "translator exited without output")),
            Ok(_) => {}
            Err(e) => return Err(self.fail(index, &format!("read failed: {e}"))),
        }
        if line.last() != Some(&b'\n') {
            return Err(self.fail(index, "unterminated output line"));
        }
        line.pop();
        let text = String::from_utf8(line).map_err(|_| EngineError::Sentence {
            sentence_index: index,
            reason: "translator output is not UTF-8".into(),
        })?;
        if text.contains('\r') {
            return Err(EngineError::Sentence {
                sentence_index: index,
                reason: "malformed output line".into(),
            });
        }
        Ok(Translation {
            sentence: sentence.with_text(&text),
            cost_seconds: start.elapsed().as_secs_f64(),
        })
    }
}

impl Drop for ExternalCommandEngine {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

use std::io::Write;
use std::process::{Command, Stdio};

use trapnet_core::dsp::{AudioDecoder, DspError};

/// Pipes the payload through an external program that writes WAV to stdout,
/// e.g. `ffmpeg -loglevel error -i pipe:0 -f wav pipe:1`.
#[derive(Debug, Clone)]
pub struct CommandDecoder {
    program: String,
    args: Vec<String>,
}

impl CommandDecoder {
    /// Splits `command_line` on whitespace; no shell quoting.
    pub fn parse(command_line: &str) -> Option<Self> {
        let mut parts = command_line.split_whitespace().map(str::to_string);
        let program = parts.next()?;
        Some(CommandDecoder { program, args: parts.collect() })
    }
}

impl AudioDecoder for CommandDecoder {
    fn to_wav(&self, bytes: &[u8]) -> Result<Vec<u8>, DspError> {
        let fail = |m: String| DspError::UnsupportedEncoding(format!("{}: {m}", self.program));
        let mut child = Command::new(&self.program)
            .args(&self.args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::piped())
            .spawn()
            .map_err(|e| fail(e.to_string()))?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        let input = bytes.to_vec();
        // feed from another thread so a chatty decoder cannot deadlock on a full stdout pipe
        let feeder = std::thread::spawn(move || stdin.write_all(&input));
        let out = child.wait_with_output().map_err(|e| fail(e.to_string()))?;
        let _ = feeder.join();
        if !out.status.success() {
            return Err(fail(String::from_utf8_lossy(&out.stderr).trim().to_string()));
        }
        Ok(out.stdout)
    }
}

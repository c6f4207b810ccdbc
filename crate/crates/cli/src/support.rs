use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde_json::{Map, Value};
use tempfile::NamedTempFile;

pub const EXIT_INPUT: u8 = 2;
pub const EXIT_INVARIANT: u8 = 3;
pub const EXIT_DETECTION: u8 = 4;

/// A failed command: message for stderr plus the process exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl From<logdrift::Error> for Failure {
    fn from(e: logdrift::Error) -> Self {
        let code = if e.is_invariant_violation() {
            EXIT_INVARIANT
        } else {
            EXIT_INPUT
        };
        Self {
            code,
            message: e.to_string(),
        }
    }
}

impl From<io::Error> for Failure {
    fn from(e: io::Error) -> Self {
        Failure::input(e.to_string())
    }
}

impl From<serde_json::Error> for Failure {
    fn from(e: serde_json::Error) -> Self {
        Failure::input(e.to_string())
    }
}

pub type CmdResult<T = u8> = Result<T, Failure>;

/// Values from `--config FILE`, keyed by long flag name with underscores.
/// Command-line flags take precedence.
#[derive(Debug, Default)]
pub struct Settings {
    values: Map<String, Value>,
}

impl Settings {
    pub fn load(path: Option<&Path>) -> CmdResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
        match serde_json::from_str(&text)? {
            Value::Object(values) => Ok(Self { values }),
            _ => Err(Failure::input("config file must hold a JSON object")),
        }
    }

    pub fn pick_opt<T: DeserializeOwned>(
        &self,
        flag: Option<T>,
        key: &str,
    ) -> CmdResult<Option<T>> {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.values.get(key) {
            Some(v) => serde_json::from_value(v.clone())
                .map(Some)
                .map_err(|e| Failure::input(format!("config key `{key}`: {e}"))),
            None => Ok(None),
        }
    }

    /// A boolean switch is on when given on the command line or set in the file.
    pub fn switch(&self, flag: bool, key: &str) -> CmdResult<bool> {
        Ok(flag || self.pick_opt(None, key)?.unwrap_or(false))
    }

    /// Repeatable flags: command-line values replace the file's list.
    pub fn list(&self, flag: Vec<String>, key: &str) -> CmdResult<Vec<String>> {
        if !flag.is_empty() {
            return Ok(flag);
        }
        Ok(self.pick_opt(None, key)?.unwrap_or_default())
    }

    pub fn pick<T: DeserializeOwned>(
        &self,
        flag: Option<T>,
        key: &str,
        default: T,
    ) -> CmdResult<T> {
        Ok(self.pick_opt(flag, key)?.unwrap_or(default))
    }
}

/// Writes to stdout, or to a temporary file that replaces `path` on commit.
/// Dropping without commit leaves any existing file untouched.
pub enum Output {
    Stdout(io::Stdout),
    File {
        tmp: BufWriter<NamedTempFile>,
        path: PathBuf,
    },
}

impl Output {
    pub fn create(path: Option<&Path>) -> CmdResult<Self> {
        match path {
            None => Ok(Output::Stdout(io::stdout())),
            Some(p) if p == Path::new("-") => Ok(Output::Stdout(io::stdout())),
            Some(p) => {
                let dir = match p.parent() {
                    Some(d) if !d.as_os_str().is_empty() => d,
                    _ => Path::new("."),
                };
                let tmp = NamedTempFile::new_in(dir)
                    .map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
                Ok(Output::File {
                    tmp: BufWriter::new(tmp),
                    path: p.to_path_buf(),
                })
            }
        }
    }

    pub fn commit(self) -> CmdResult<()> {
        match self {
            Output::Stdout(mut s) => Ok(s.flush()?),
            Output::File { tmp, path } => {
                let tmp = tmp
                    .into_inner()
                    .map_err(|e| Failure::input(e.to_string()))?;
                tmp.persist(&path)
                    .map_err(|e| Failure::input(format!("{}: {}", path.display(), e.error)))?;
                Ok(())
            }
        }
    }

    pub fn write_line(&mut self, line: &str) -> CmdResult<()> {
        writeln!(self, "{line}")?;
        if let Output::Stdout(s) = self {
            s.flush()?;
        }
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, value: &T) -> CmdResult<()> {
        let line = serde_json::to_string(value)?;
        self.write_line(&line)
    }
}

impl Write for Output {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        match self {
            Output::Stdout(s) => s.write(buf),
            Output::File { tmp, .. } => tmp.write(buf),
        }
    }

    fn flush(&mut self) -> io::Result<()> {
        match self {
            Output::Stdout(s) => s.flush(),
            Output::File { tmp, .. } => tmp.flush(),
        }
    }
}

fn is_stdin(path: Option<&Path>) -> bool {
    path.is_none_or(|p| p == Path::new("-"))
}

pub fn open_input(path: Option<&Path>) -> CmdResult<Box<dyn BufRead>> {
    if is_stdin(path) {
        return Ok(Box::new(BufReader::new(io::stdin())));
    }
    let p = path.expect("checked above");
    let f = fs::File::open(p).map_err(|e| Failure::input(format!("{}: {e}", p.display())))?;
    Ok(Box::new(BufReader::new(f)))
}

pub fn read_input(path: Option<&Path>) -> CmdResult<String> {
    let mut s = String::new();
    open_input(path)?.read_to_string(&mut s)?;
    Ok(s)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> CmdResult<T> {
    let text =
        fs::read_to_string(path).map_err(|e| Failure::input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Failure::input(format!("{}: {e}", path.display())))
}

/// Writes a whole file atomically.
pub fn write_file(path: &Path, contents: &str) -> CmdResult<()> {
    let mut out = Output::create(Some(path))?;
    out.write_all(contents.as_bytes())?;
    out.commit()
}

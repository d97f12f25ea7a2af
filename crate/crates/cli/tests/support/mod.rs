#![allow(dead_code)]

use std::io::{BufRead, BufReader};
use std::path::PathBuf;
use std::process::{Child, Command, Output, Stdio};
use std::time::{Duration, Instant};

pub fn configs() -> PathBuf {
    PathBuf::from(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs"))
}

/// A stack running in a child process; killed on drop.
pub struct Server {
    child: Child,
    pub api: String,
}

impl Server {
    pub fn start() -> Result<Self, String> {
        let mut child = Command::new(env!("CARGO_BIN_EXE_netintent"))
            .args(["run", "--config"])
            .arg(configs().join("demo.json"))
            .args(["--bind", "127.0.0.1:0"])
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| format!("cannot start server: {e}"))?;
        let stdout = child.stdout.take().ok_or("no server stdout")?;
        let mut line = String::new();
        BufReader::new(stdout)
            .read_line(&mut line)
            .map_err(|e| e.to_string())?;
        let api = line
            .trim()
            .strip_prefix("listening on ")
            .ok_or_else(|| format!("unexpected server banner {line:?}"))?
            .to_owned();
        Ok(Self { child, api })
    }

    /// Runs the CLI against this server and returns its raw output.
    pub fn raw(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_netintent"))
            .args(args)
            .env("NETINTENT_API", &self.api)
            .output()
            .expect("run netintent")
    }

    /// Runs the CLI against this server; returns stdout or a failure description.
    pub fn cli(&self, args: &[&str]) -> Result<String, String> {
        let out = self.raw(args);
        if !out.status.success() {
            return Err(format!(
                "`netintent {}` exited {:?}: {}",
                args.join(" "),
                out.status.code(),
                String::from_utf8_lossy(&out.stderr).trim()
            ));
        }
        Ok(String::from_utf8_lossy(&out.stdout).trim().to_owned())
    }
}

impl Drop for Server {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

pub fn poll<T>(what: &str, timeout: Duration, mut f: impl FnMut() -> Result<Option<T>, String>) -> Result<T, String> {
    let deadline = Instant::now() + timeout;
    loop {
        if let Some(v) = f()? {
            return Ok(v);
        }
        if Instant::now() > deadline {
            return Err(format!("timed out waiting for {what}"));
        }
        std::thread::sleep(Duration::from_millis(10));
    }
}


/// Runs the CLI with no server attached.
pub fn netintent(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_netintent"))
        .args(args)
        .env("NETINTENT_API", "http://127.0.0.1:1")
        .output()
        .expect("run netintent")
}

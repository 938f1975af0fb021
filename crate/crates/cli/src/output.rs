use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// One verdict line.
#[derive(Clone, Debug)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{v} {}: {}", self.name, self.detail)
    }
}

/// Writes through a buffered file; the closure gets the writer.
pub fn write_file<F>(dir: &Path, name: &str, body: F) -> Result<()>
where
    F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
{
    let path = dir.join(name);
    let f = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    body(&mut w).with_context(|| format!("writing {}", path.display()))?;
    w.flush().with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

pub fn write_checks_csv(dir: &Path, name: &str, checks: &[Check]) -> Result<()> {
    write_file(dir, name, |w| {
        writeln!(w, "check,verdict,detail")?;
        for c in checks {
            let detail = c.detail.replace('"', "\"\"");
            writeln!(w, "{},{},\"{detail}\"", c.name, if c.pass { "PASS" } else { "FAIL" })?;
        }
        Ok(())
    })
}

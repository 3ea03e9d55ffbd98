//! Extension oracle backed by an external command.
//!
//! For each step the command (run through `sh -c`) receives on stdin
//! `{"operators": [...], "start": <projection>, "epsilon": ε}` and must print
//! either `null` or a projection document on stdout.

use std::io::Write;
use std::process::{Command, Stdio};

use foelner_core::schemes::ExtensionOracle;
use foelner_core::{Error, Operator64, OperatorSpecDoc, Projection64, ProjectionDoc};
use serde_json::json;

pub struct ScriptExtender {
    pub command: String,
    pub docs: Vec<OperatorSpecDoc>,
}

impl ExtensionOracle<f64> for ScriptExtender {
    fn name(&self) -> &'static str {
        "script"
    }

    fn extend(&self, ops: &[Operator64], start: &Projection64, epsilon: f64) -> foelner_core::Result<Option<Projection64>> {
        let request = json!({
            "operators": self.docs,
            "start": ProjectionDoc::from_projection(start),
            "epsilon": epsilon,
        });
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Unsupported(format!("cannot start extender script: {e}")))?;
        {
            let mut stdin = child.stdin.take().expect("piped stdin");
            // a script that exits without reading its input is not an error here
            let _ = stdin.write_all(request.to_string().as_bytes());
        }
        let out = child
            .wait_with_output()
            .map_err(|e| Error::Unsupported(format!("extender script failed: {e}")))?;
        if !out.status.success() {
            return Err(Error::Unsupported(format!("extender script exited with {}", out.status)));
        }
        let reply: Option<ProjectionDoc> = serde_json::from_slice(&out.stdout)
            .map_err(|e| Error::Validation { field: "extender output".into(), reason: e.to_string() })?;
        let sort = ops.first().map(|o| o.sort()).ok_or_else(|| Error::Precondition("empty operator set".into()))?;
        reply.map(|doc| doc.resolve::<f64>(&sort)).transpose()
    }
}

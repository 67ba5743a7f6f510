use serde_json::json;
use yearsense::dumpio::open_dump;
use yearsense::{Error, Result};

use super::Ctx;
use crate::cli::ValidateArgs;
use crate::manifest::RunDir;

/// Checks every dump and reports each one; fails if any is broken. A
/// manifest and `validation.json` are written only when `--out` is given.
pub(crate) fn run(ctx: &Ctx, a: &ValidateArgs) -> Result<()> {
    let mut results = Vec::new();
    let mut failed = 0usize;
    for path in &a.dumps {
        let outcome = open_dump(path).and_then(|mut r| {
            r.validate()?;
            Ok(r.header().clone())
        });
        match outcome {
            Ok(h) => {
                println!(
                    "{}: ok ({:?}, model {}, {} layers)",
                    path.display(),
                    h.kind,
                    h.model,
                    h.layers.len()
                );
                results.push(json!({ "path": path.display().to_string(), "ok": true, "kind": h.kind, "layers": h.layers.len() }));
            }
            Err(e) => {
                eprintln!("{}: {e}", path.display());
                failed += 1;
                results.push(json!({ "path": path.display().to_string(), "ok": false, "error": e.to_string() }));
            }
        }
    }
    if let Some(out) = a.out.out.clone().or_else(|| ctx.file.out.clone()) {
        let settings = json!({ "dumps": a.dumps.iter().map(|p| p.display().to_string()).collect::<Vec<_>>() });
        let mut run = RunDir::create(&out, "validate", settings)?;
        for p in &a.dumps {
            run.input(p);
        }
        run.write_json("validation.json", &results)?;
        run.finish()?;
    }
    if failed > 0 {
        return Err(Error::Data(format!("{failed} of {} dump(s) failed validation", a.dumps.len())));
    }
    Ok(())
}

use keepaugment::io::{make_synthetic_annotated, write_dataset_dir};
use keepaugment::{Rect, RngStream};

use super::with_path;
use crate::args::MakeSyntheticArgs;
use crate::error::{CliError, CliResult};

pub fn run(a: MakeSyntheticArgs) -> CliResult<()> {
    let annotated = make_synthetic_annotated::<f32, _>(a.n, a.size, &mut RngStream::new(a.seed, 0))?;
    let patches: Vec<Option<Rect>> = annotated.iter().map(|s| s.patch).collect();
    let records: Vec<_> = annotated.into_iter().map(|s| s.record).collect();
    with_path("writing dataset", &a.out, write_dataset_dir(&a.out, &records, 2, None))?;
    let path = a.out.join("patches.json");
    std::fs::write(&path, serde_json::to_string(&patches)? + "\n").map_err(|source| CliError::Io {
        context: format!("writing {}", path.display()),
        source,
    })?;
    println!("wrote {} records of {}x{} to {}", records.len(), a.size, a.size, a.out.display());
    Ok(())
}

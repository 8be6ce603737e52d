use keepaugment::eval::fidelity_sweep;
use keepaugment::{Mode, SaliencyStrategy};

use super::{check_input, load_config, load_data, load_model, parse_list};
use crate::args::FidelityArgs;
use crate::error::{CliError, CliResult};

pub fn run(a: FidelityArgs) -> CliResult<()> {
    let mode = Mode::parse(&a.mode).map_err(|e| CliError::usage(e.to_string()))?;
    let magnitudes: Vec<usize> = parse_list(&a.magnitudes, "magnitude")?;
    if magnitudes.windows(2).any(|w| w[0] > w[1]) {
        return Err(CliError::usage(format!("magnitudes must be ascending, got `{}`", a.magnitudes)));
    }
    if a.trials == 0 {
        return Err(CliError::usage("--trials must be at least 1"));
    }
    let mut cfg = load_config(a.config.as_deref())?;
    cfg.mode = mode;
    if mode.needs_saliency() && cfg.saliency == SaliencyStrategy::External {
        return Err(CliError::usage("fidelity computes saliency from the oracle; external maps are not supported"));
    }
    let oracle = load_model(&a.oracle)?;
    let (records, _) = load_data(&a.data)?;
    if let Some(first) = records.first() {
        check_input(&oracle, first.image.height(), first.image.width(), "oracle")?;
    }
    let report = fidelity_sweep(&oracle, &records, &cfg, &magnitudes, a.trials, a.seed, None)?;
    if a.report_json {
        println!("{}", serde_json::to_string(&report)?);
    } else {
        print!("{}", report.to_table());
    }
    Ok(())
}

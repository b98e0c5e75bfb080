use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;

use ortree::{load_columns, ModelFile};

#[derive(Args, Debug)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// CSV with (at least) the model's feature columns, in original units.
    #[arg(long)]
    pub data: PathBuf,
    /// Target column; when given the RMSE is reported.
    #[arg(long)]
    pub target: Option<String>,
    /// Write predictions here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: &PredictArgs) -> Result<()> {
    let model = ModelFile::load(&args.model).with_context(|| format!("loading {}", args.model.display()))?;
    let tree = model.tree()?;
    let sel = load_columns(&args.data, &model.feature_names, args.target.as_deref())
        .with_context(|| format!("reading {}", args.data.display()))?;
    let preds: Vec<f64> = sel.rows.iter().map(|r| model.predict_raw(&tree, r)).collect();

    let mut text = String::from("prediction\n");
    for p in &preds {
        text.push_str(&format!("{p}\n"));
    }
    match &args.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }

    if let Some(targets) = &sel.targets {
        anyhow::ensure!(!targets.is_empty(), "no rows to score");
        let sse: f64 = preds.iter().zip(targets).map(|(p, y)| (p - y) * (p - y)).sum();
        let rmse = (sse / targets.len() as f64).sqrt();
        // keep stdout clean for the predictions
        if args.out.is_some() {
            println!("RMSE: {rmse}");
        } else {
            eprintln!("RMSE: {rmse}");
        }
    }
    Ok(())
}

//! The command-line pipeline driven in-process: info, train, select and
//! compare on a small labelled scene. The same arguments work with the
//! `bandsel` binary.
//!
//!     cargo run --release --example cli_pipeline

use bandsel::cli::main_with_args;
use bandsel::synthetic::labelled_scene;

fn main() -> bandsel::Result<()> {
    let dir = tempfile::tempdir().expect("temp dir");
    let image = dir.path().join("scene.csv");
    labelled_scene(8, 3, 40, 2, 5)?.write_csv(&image)?;
    let image = image.to_str().expect("utf-8 path");
    let ckpt = dir.path().join("policy.bin");
    let ckpt = ckpt.to_str().expect("utf-8 path");
    let report = dir.path().join("selection.json");
    let report = report.to_str().expect("utf-8 path");

    let mut stdout = std::io::stdout();
    let steps: [&[&str]; 4] = [
        &["bandsel", "info", image],
        &[
            "bandsel",
            "train",
            image,
            "--k",
            "3",
            "--episodes",
            "300",
            "--seed",
            "1",
            "--out",
            ckpt,
        ],
        &["bandsel", "select", ckpt, "--out", report],
        &[
            "bandsel",
            "compare",
            image,
            "--k",
            "2,3",
            "--selectors",
            "entropy_rank,greedy,random,exhaustive",
            "--runs",
            "5",
        ],
    ];
    for args in steps {
        println!("$ {}", args.join(" "));
        let code = main_with_args(args.iter().copied(), &mut stdout);
        if code != 0 {
            eprintln!("exit code {code}");
            std::process::exit(code);
        }
    }
    println!("{}", std::fs::read_to_string(report).expect("report written"));
    Ok(())
}

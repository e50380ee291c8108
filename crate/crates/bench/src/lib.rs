//! Synthetic inputs shared by the benchmarks.

use std::path::Path;

/// Write `files` Python modules under `root`. Module `i` defines two functions and
/// calls into modules `i / 2` and `i / 3`, so low-numbered modules become hubs.
pub fn synthetic_repo(root: &Path, files: usize) -> std::io::Result<()> {
    for i in 0..files {
        let dir = root.join(format!("pkg{}", i % 8));
        std::fs::create_dir_all(&dir)?;
        let mut text = String::new();
        for parent in [i / 2, i / 3] {
            if parent != i {
                text.push_str(&format!("from pkg{}.mod{parent} import run_{parent}\n", parent % 8));
            }
        }
        text.push_str(&format!("\n\ndef run_{i}(arg):\n    return helper_{i}(arg)\n"));
        text.push_str(&format!("\n\ndef helper_{i}(arg):\n"));
        for parent in [i / 2, i / 3] {
            if parent != i {
                text.push_str(&format!("    arg = run_{parent}(arg)\n"));
            }
        }
        text.push_str("    return arg\n");
        std::fs::write(dir.join(format!("mod{i}.py")), text)?;
    }
    Ok(())
}

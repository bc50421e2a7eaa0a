//! Shared inputs for the pipeline benchmarks.

use migratekit_core::c_frontend::{parse_sources, ModuleIR};
use migratekit_core::testing::random_module;
use rand::rngs::StdRng;
use rand::SeedableRng;

/// `count` generated modules merged into one, with file names kept apart.
pub fn module_of_size(seed: u64, count: usize) -> ModuleIR {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut files = Vec::new();
    for m in 0..count {
        for mut f in random_module(&mut rng, 12).files {
            f.path = format!("g{m}_{}", f.path);
            // Keep names unique across the merged modules.
            f.text = f.text.replace("fn_", &format!("g{m}_fn_"));
            files.push(f);
        }
    }
    parse_sources(files).expect("generated modules parse")
}

/// A Rust function of `n` statements, some of them inside unsafe blocks.
pub fn rust_function(n: usize) -> String {
    let mut s = String::from("pub fn f(x: i32) -> i32 {\n    let mut acc = x;\n");
    for i in 0..n {
        if i % 7 == 3 {
            s.push_str(&format!(
                "    unsafe {{\n        acc += core::ptr::read(&{i});\n    }}\n"
            ));
        } else {
            s.push_str(&format!("    acc = acc.wrapping_mul({}) + {i};\n", i % 5 + 2));
        }
    }
    s.push_str("    acc\n}\n");
    s
}

/// `text` with every tenth line edited and every 25th removed.
pub fn edited(text: &str) -> String {
    text.lines()
        .enumerate()
        .filter(|(i, _)| i % 25 != 24)
        .map(|(i, l)| {
            if i % 10 == 5 {
                format!("{l} // edited\n")
            } else {
                format!("{l}\n")
            }
        })
        .collect()
}

use std::process::Command;

fn main() {
    // git-describe-style version string for report provenance; falls
    // back to the crate version outside a git checkout.
    let described = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .and_then(|o| String::from_utf8(o.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());
    let version = match described {
        Some(d) => format!("{}+g{}", env!("CARGO_PKG_VERSION"), d),
        None => env!("CARGO_PKG_VERSION").to_string(),
    };
    println!("cargo:rustc-env=FRACLAP_BUILD_VERSION={version}");
    println!("cargo:rerun-if-changed=build.rs");
}

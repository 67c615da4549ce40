use std::process::Command;

// Reports carry a build identifier so a saved JSON can be traced back
// to the exact tree that produced it. Outside a git checkout (or with
// git missing) the id falls back to a fixed marker.
fn main() {
    let id = Command::new("git")
        .args(["describe", "--always", "--dirty", "--tags"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .filter(|s| !s.is_empty())
        .unwrap_or_else(|| "untracked".to_string());
    println!("cargo:rustc-env=EXPSUM_BUILD_ID={id}");
    println!("cargo:rerun-if-changed=../../.git/HEAD");
}

//! Fixtures shared by the benchmarks.

use rmcfair::benchmarks::{benchmark, proof_entry};
use rmcfair::encode::encode_system;
use rmcfair::proof::{resolve_target, RegularProof};
use rmcfair::spec::SystemSpec;

pub fn system(name: &str) -> SystemSpec {
    benchmark(name).expect("shipped system")
}

pub fn encoded(name: &str) -> SystemSpec {
    encode_system(&system(name)).expect("encodable").spec
}

/// A shipped proof with the system it targets.
pub fn shipped_proof(name: &str) -> (SystemSpec, RegularProof) {
    let entry = proof_entry(name).expect("shipped proof");
    let spec = system(entry.system);
    let target = resolve_target(&spec, &RegularProof::target(entry.source).unwrap()).unwrap();
    let proof = RegularProof::parse(entry.source, &target.alphabet).unwrap();
    (target, proof)
}

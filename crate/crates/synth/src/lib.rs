//! Synthetic stroke datasets: ellipsoidal head phantoms with DWI-bright,
//! ADC-dark lesions, a labelled source domain and an intensity-shifted
//! target domain.

pub mod error;
pub mod generate;
pub mod manifest;
pub mod spec;

pub use error::{Result, SynthError};
pub use generate::{case_id, case_rng, draw_lesions, generate_case, generate_split, lesion_mask, render_lesions, Lesion, Split, SyntheticSplit};
pub use manifest::{load_cases, load_entry, resolve, write_case, write_split, Manifest, ManifestEntry, MANIFEST_FILE};
pub use spec::{radius_for_volume_ml, sphere_volume_ml, DomainShift, PhantomSpec};

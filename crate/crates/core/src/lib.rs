//! Synthetic passport generation and PAD evaluation toolkit.
//!
//! The pipeline stages, mirrored by the module layout:
//!
//! 1. **template** – country configs as classified layer stacks, empty
//!    template derivation and validation.
//! 2. **subject** – seeded generation of plausible subject records from
//!    curated dictionaries.
//! 3. **mrz** – ICAO 9303 TD3 machine-readable zone with check digits.
//! 4. **face** – quality filtering, ICAO portrait cropping, signature
//!    extraction.
//! 5. **compose** – text rendering and masked alpha compositing of full
//!    documents.
//! 6. **pattern** – classical-vision logo and pattern extraction.
//! 7. **protocol** – dataset manifests, intra and leave-one-out splits.
//! 8. **metrics** – ISO/IEC 30107-3 score evaluation (APCER, BPCER, EER,
//!    DET curves, operating points).

pub mod compose;
pub mod face;
pub mod font;
pub mod metrics;
pub mod mrz;
pub mod pattern;
pub mod protocol;
pub mod raster;
pub mod subject;
pub mod template;

pub use compose::{composite_layer, render_document, render_text_field, RenderJob};
pub use face::{assess, crop_icao, rank_and_select, signature_extract, QualityThresholds};
pub use metrics::{parse_score_file, Pai, PaiSelector, PadMetrics, ScoreSet};
pub use mrz::{build_td3, check_digit, encode_name, validate_td3, MrzTd3};
pub use protocol::{split_intra, split_loo, ManifestEntry, SplitResult};
pub use subject::{generate_subjects, validate_subject, SubjectRecord};
pub use template::{derive_empty_template, load_config, validate_config, CountryConfig, Template};

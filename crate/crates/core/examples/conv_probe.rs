// scratch probe
use ptstrc_core::tensor::{DenseTensor, MaskedTensor};
use ptstrc_core::frame::{dilate, pad_mirror, Frame};
use ptstrc_core::matching::{ecpm_match, PatchDescriptor};
use ptstrc_core::patch::extract_patch_tensor;
use ptstrc_core::batch::*;
use ptstrc_core::pipeline::*;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

fn main() {
    let cfg = PipelineConfig {
        patch_size: 8, overlap: 3, border: 4, interval_s: 2, search_size: 9,
        k_new: 8, k_tracked: 4, max_sweeps: 6, ..PipelineConfig::default()
    };
    let values = DenseTensor::filled(&[24, 24, 1], 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mask = DenseTensor::from_fn(&[24, 24, 1], |_| if rng.gen::<f64>() < 0.2 { 1.0 } else { 0.0 });
    let frame = Frame::new(MaskedTensor::new(values, mask).unwrap()).unwrap();
    let padded = pad_mirror(&frame, cfg.border, cfg.interval_s).unwrap();
    let dil = dilate(&padded);
    let d = PatchDescriptor { row: 0, col: 20, edge: 8 };
    let matches = ecpm_match(&d, &dil, &dil, cfg.k_new, cfg.search_size, cfg.interval_s).unwrap();
    let mut descs = vec![d];
    descs.extend(matches.iter().map(|pm| pm.desc).filter(|c| *c != d).take(cfg.k_new - 1));
    let tensor = extract_patch_tensor(&padded, &descs).unwrap();
    for seed in [12345u64, 7, 8, 9, 10, 11] {
        for sweeps in [6usize, 30, 200] {
            let stop = BatchStopCriteria { max_sweeps: sweeps, tolerance: 1e-14 };
            let (cores, _) = trssd_complete(&tensor.data, 1, &stop, seed).unwrap();
            let loss = masked_loss(&tensor.data, &cores).unwrap();
            print!("  seed {seed} sweeps {sweeps}: {loss:.3e}");
        }
        println!();
    }
}

//! Writes a dataset and model to disk in the interchange formats and reads
//! them back.

use mpf::harness::formats::{format_discrete, read_dataset, write_discrete, AnyDataset, ModelFile};
use mpf::model::random_lattice_glass;
use mpf::samplers::exact_sample;

fn main() -> mpf::Result<()> {
    let dir = std::env::temp_dir().join("mpf-file-formats");
    std::fs::create_dir_all(&dir)?;
    let truth = random_lattice_glass(2, 2, 1.0, 41)?;
    let data = exact_sample(truth.model(), truth.theta(), 10, 42)?;

    let data_path = dir.join("toy.data");
    let model_path = dir.join("toy.model.json");
    write_discrete(&data_path, &data)?;
    ModelFile::from_couplings(&truth).save(&model_path)?;
    print!("{}", format_discrete(&data));
    println!("{}", std::fs::read_to_string(&model_path)?);

    let AnyDataset::Binary(back) = read_dataset(&data_path)? else { unreachable!() };
    assert_eq!(back, data);
    assert_eq!(ModelFile::load(&model_path)?.to_couplings()?.theta(), truth.theta());
    println!("round trip ok: {}", dir.display());
    Ok(())
}

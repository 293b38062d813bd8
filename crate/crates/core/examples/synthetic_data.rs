//! Generate the base / one-shot benchmark, oversample it, and round-trip CSV.

use lowshot::dataset::{generate_synthetic, oversample, parse_csv, to_csv_string, Split, SyntheticSpec};

fn main() -> lowshot::Result<()> {
    let spec = SyntheticSpec {
        d: 4,
        k_base: 3,
        k_lowshot: 2,
        train_per_base: 5,
        test_per_class: 2,
        ..SyntheticSpec::default()
    };
    let (train, test) = generate_synthetic(&spec)?;
    println!(
        "train rows {}, test rows {}, classes {}",
        train.len(),
        test.len(),
        train.num_classes()
    );
    println!("base classes {:?}", train.classes_in(Split::Base));
    println!("low-shot classes {:?}", train.classes_in(Split::LowShot));
    println!("counts before oversampling {:?}", train.class_counts());
    println!(
        "counts after x10            {:?}",
        oversample(&train, 10)?.class_counts()
    );

    let csv = to_csv_string(&test);
    print!("{csv}");
    let back = parse_csv(&csv, "test.csv".as_ref())?;
    assert_eq!(back.features(), test.features());
    println!("csv round trip exact");
    Ok(())
}

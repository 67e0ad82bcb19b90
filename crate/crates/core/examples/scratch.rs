use mfm_core::atlas::{batch_classify, ClassifyConfig};
use mfm_core::model::{sample_parameters, PlausibilityFilter};

fn main() {
    let (sets, _) = sample_parameters(3, 50, &PlausibilityFilter::default()).unwrap();
    let cfg = ClassifyConfig::default();
    let start = std::time::Instant::now();
    let (reports, summary) = batch_classify(&sets, 1, &cfg);
    for (i, r) in reports.iter().enumerate() {
        if r.wall_time > 6.0 || r.label == mfm_core::atlas::FamilyLabel::Indeterminate {
            println!(
                "set {i}: {:?} census {:?} {:.1} s status {}",
                r.label, r.cusp_census, r.wall_time, r.diagnostics.status
            );
        }
    }
    println!(
        "total {} f1 {} f2 {} ind {} mean {:.2} s elapsed {:.1} s",
        summary.total,
        summary.f1,
        summary.f2,
        summary.indeterminate,
        summary.mean_wall_time,
        start.elapsed().as_secs_f64()
    );
}

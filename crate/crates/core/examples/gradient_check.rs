//! Compares backpropagated gradients of the sentence loss with central
//! finite differences.

use mlnmt::model::{Hyperparameters, Model};
use mlnmt::vocab::EOS_ID;

fn main() {
    let mut model = Model::init(Hyperparameters::new(20, 20, 8, 12).with_seed(1)).unwrap();
    // Larger weights keep the gradients well above finite-difference noise.
    for t in model.params.tensors_mut() {
        t.scale_inplace(10.0);
    }
    let report = model.gradient_check(&[3, 4, 5, 6, 7], &[8, 9, 10, 11, EOS_ID], 1e-4).unwrap();
    println!(
        "{} entries, max relative error {:.3e} (analytic {:.6e}, numeric {:.6e})",
        report.entries_checked, report.max_relative_error, report.analytic, report.numeric
    );
}

use super::Activation;
use crate::autodiff::{Tape, Var};
use crate::error::{Error, Result};

/// Fixed-size summary `σ(mean over nodes ‖ max over nodes)` of an `n x d`
/// representation, as a `1 x 2d` row.
pub fn readout(tape: &mut Tape, h: Var, activation: Activation) -> Result<Var> {
    if tape.value(h).rows() == 0 {
        return Err(Error::Contract("readout of an empty graph".into()));
    }
    let mean = tape.row_mean(h)?;
    let max = tape.col_max(h)?;
    let both = tape.concat_cols(mean, max)?;
    Ok(activation.apply(tape, both))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Tensor;

    fn run(h: Tensor) -> Vec<f64> {
        let mut tape = Tape::new();
        let h = tape.constant(h);
        let r = readout(&mut tape, h, Activation::Relu).unwrap();
        tape.value(r).data().to_vec()
    }

    #[test]
    fn mean_and_max() {
        assert_eq!(
            run(Tensor::from_rows(&[[1.0, 2.0], [3.0, 4.0]])),
            vec![2.0, 3.0, 3.0, 4.0]
        );
        assert_eq!(
            run(Tensor::from_rows(&[[5.0, 6.0]])),
            vec![5.0, 6.0, 5.0, 6.0]
        );
        assert_eq!(run(Tensor::zeros(3, 2)), vec![0.0; 4]);
    }

    #[test]
    fn empty_graph_is_rejected() {
        let mut tape = Tape::new();
        let h = tape.constant(Tensor::zeros(0, 2));
        assert!(matches!(
            readout(&mut tape, h, Activation::Relu),
            Err(Error::Contract(_))
        ));
    }
}

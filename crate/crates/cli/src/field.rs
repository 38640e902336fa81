//! Scalar parameter fields given as arithmetic expressions in `x`, `y`, `z`.

use evalexpr::{
    build_operator_tree, ContextWithMutableVariables, DefaultNumericTypes, EvalexprError,
    HashMapContext, Node, Value,
};

const VARS: [&str; 3] = ["x", "y", "z"];

pub struct Field {
    tree: Node<DefaultNumericTypes>,
}

impl Field {
    pub fn parse(expr: &str) -> Result<Self, EvalexprError<DefaultNumericTypes>> {
        let tree = build_operator_tree::<DefaultNumericTypes>(expr)?;
        let field = Field { tree };
        // reject unknown identifiers and non-numeric results up front
        field.try_eval(&[0.5, 0.5, 0.5])?;
        Ok(field)
    }

    fn try_eval(&self, x: &[f64]) -> Result<f64, EvalexprError<DefaultNumericTypes>> {
        let mut ctx = HashMapContext::<DefaultNumericTypes>::new();
        for (name, v) in VARS.iter().zip(x.iter().chain(std::iter::repeat(&0.0))) {
            ctx.set_value((*name).into(), Value::Float(*v))?;
        }
        self.tree.eval_number_with_context(&ctx)
    }

    /// Missing coordinates read as zero.
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.try_eval(x).unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_fields() {
        let f = Field::parse("2.5 + x").unwrap();
        assert_eq!(f.eval(&[0.5]), 3.0);
        let f = Field::parse("3.3+0.2*x").unwrap();
        assert!((f.eval(&[1.0]) - 3.5).abs() < 1e-15);
        assert_eq!(Field::parse("3").unwrap().eval(&[0.0]), 3.0);
    }

    #[test]
    fn rejects_unknown_names() {
        assert!(Field::parse("2 + w").is_err());
        assert!(Field::parse("2 +").is_err());
    }
}

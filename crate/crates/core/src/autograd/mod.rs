//! Reverse-mode automatic differentiation over dense tensors.
//!
//! A [`Graph`] records operations as they run. [`Graph::backward`] walks the
//! recording in reverse; in [`Mode::HigherOrder`] that walk is recorded too,
//! which is what makes penalties on input gradients trainable.
//!
//! ```
//! use cwgan::autograd::{Graph, Mode, Tensor};
//!
//! let g = Graph::<f64>::new(Mode::HigherOrder);
//! let x = g.leaf(Tensor::from_f64(&[3], &[1.0, 2.0, 3.0]).unwrap());
//! let energy = x.square().reduce_sum().scale(0.5);
//! let grad = g.backward(energy, &[x]).unwrap().get(x).unwrap();
//! assert_eq!(grad.value().data(), &[1.0, 2.0, 3.0]);
//! // d/dx of |grad|^2 = 2x
//! let hv = g.grad_of_grad(grad.square().reduce_sum(), &[x]).unwrap();
//! assert_eq!(hv.tensor(x).data(), &[2.0, 4.0, 6.0]);
//! ```

mod check;
mod graph;
pub(crate) mod kernels;
mod ops;
mod primitive;
mod tensor;

pub use check::{central_differences, finite_difference_check, max_relative_error, RELATIVE_ERROR_FLOOR};
pub use graph::{GradResult, Graph, Mode, Var};
pub use ops::Op;
pub use primitive::{eval_primitive, Attrs, PrimitiveTag};
pub use tensor::{Scalar, Tensor, MAX_RANK};

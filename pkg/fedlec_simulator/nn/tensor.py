""" The **nn.tensor** module defines the value carrier used across the library: a dense, row-major float64
numpy array. The helpers below build tensors, check that they stay finite and implement the checked matrix product.
"""

# Import third-party libraries
import numpy as np

# Import internal libraries
from fedlec_simulator.nn import exceptions as custom_exception

Tensor = np.ndarray
"""
A dense row-major float64 array. ``Tensor.shape`` holds the dimensions and ``Tensor.size`` equals their product.
"""


def as_tensor(values, name="tensor"):
    """
    Converts any array-like object to a contiguous float64 tensor and checks that all elements are finite.

    Parameters:
        values (array-like): nested lists, scalars or numpy arrays.
        name (str): the name reported if the check fails.

    Returns:
        (Tensor): a new contiguous float64 array.

    Raises:
        NonFiniteTensor: if any element is NaN or infinite.
    """
    tensor = np.array(values, dtype=np.float64, order="C")
    return check_finite(tensor, name)


def check_finite(tensor, name="tensor"):
    """
    Checks that every element of the tensor is finite. NaN or Inf is treated as an error state.

    Returns:
        (Tensor): the same tensor, so the call can be chained.

    Raises:
        NonFiniteTensor: if any element is NaN or infinite.
    """
    if not np.all(np.isfinite(tensor)):
        raise custom_exception.NonFiniteTensor(name)
    return tensor


def matmul(a, b):
    """
    Standard matrix product of two 2-D tensors.

    Parameters:
        a (Tensor): matrix [m x k].
        b (Tensor): matrix [k x n].

    Returns:
        (Tensor): the product [m x n].

    Raises:
        ShapeMismatch: if the operands are not 2-D or the inner dimensions disagree.

    Examples:
        >>> matmul(as_tensor([[1, 2], [3, 4]]), as_tensor([[1], [1]]))
        array([[3.],
               [7.]])
    """
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise custom_exception.ShapeMismatch("matmul", a.shape, b.shape)
    return check_finite(a @ b, "matmul")

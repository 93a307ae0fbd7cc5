""" The **nn.layers** module contains the explicitly differentiated dense layer, the flat parameter vector exchanged
between clients and server, and the plain SGD update.

Gradients are computed from stored activations: every layer keeps the input of its last forward pass and
``dense_backward()`` consumes it. Models that apply the same layer several times (e.g. once per time step) keep
their own activations and pass them back explicitly.
"""

# Import python libraries
import math

# Import third-party libraries
import numpy as np

# Import internal libraries
from fedlec_simulator.nn import exceptions as custom_exception
from fedlec_simulator.nn.tensor import check_finite


class DenseLayer:
    """
    Fully connected layer computing ``x·Wᵀ + b`` over a batch of row vectors.

    Weights are initialized Xavier-uniform from the random generator passed to the constructor, with the bound
    scaled by ``gain``; the bias starts at zero. Without a generator the weights start at zero, which is the usual
    case for model clones that receive their parameters from a ParamVector right after construction.

    Examples:
        .. code-block:: python

            from fedlec_simulator.nn.layers import DenseLayer
            from fedlec_simulator.utils.lib import get_random_generator

            layer = DenseLayer(16, 128, layer_id="hidden_0", rng=get_random_generator(0))
            out = layer.forward(x)
            grad_in, grad_w, grad_b = layer.backward(grad_out)

    """

    def __init__(self, in_features, out_features, layer_id="dense", rng=None, gain=1.0):
        self._layer_id = layer_id
        if rng is None:
            self._weights = np.zeros((out_features, in_features), dtype=np.float64)
        else:
            limit = gain * math.sqrt(6.0 / (in_features + out_features))
            self._weights = rng.uniform(-limit, limit, size=(out_features, in_features))
        self._bias = np.zeros(out_features, dtype=np.float64)
        self._cached_input = None

    @property
    def layer_id(self):
        return self._layer_id

    @property
    def in_features(self):
        return self._weights.shape[1]

    @property
    def out_features(self):
        return self._weights.shape[0]

    @property
    def weights(self):
        """
        The weight matrix [out x in]. New values are copied in place and must keep the original shape.
        """
        return self._weights

    @weights.setter
    def weights(self, new_value):
        new_value = np.asarray(new_value, dtype=np.float64)
        if new_value.shape != self._weights.shape:
            raise custom_exception.ShapeMismatch("weights", self._weights.shape, new_value.shape)
        self._weights[...] = new_value

    @property
    def bias(self):
        """
        The bias vector [out]. New values are copied in place and must keep the original shape.
        """
        return self._bias

    @bias.setter
    def bias(self, new_value):
        new_value = np.asarray(new_value, dtype=np.float64)
        if new_value.shape != self._bias.shape:
            raise custom_exception.ShapeMismatch("bias", self._bias.shape, new_value.shape)
        self._bias[...] = new_value

    @property
    def cached_input(self):
        return self._cached_input

    def forward(self, x, cache=True):
        """
        Computes ``x·Wᵀ + b`` broadcast over the batch.

        Parameters:
            x (Tensor): input batch [B x in].
            cache (bool): keep ``x`` for the next backward call.

        Returns:
            (Tensor): output batch [B x out].

        Raises:
            ShapeMismatch: if the column count of ``x`` differs from the layer input size.
        """
        if x.ndim != 2 or x.shape[1] != self.in_features:
            raise custom_exception.ShapeMismatch("dense_forward", x.shape, self._weights.shape)
        if cache:
            self._cached_input = x
        return check_finite(x @ self._weights.T + self._bias, self._layer_id)

    def backward(self, grad_out, x=None):
        """
        Back-propagates ``grad_out`` through the layer.

        Parameters:
            grad_out (Tensor): gradient w.r.t. the layer output [B x out].
            x (Tensor): the input of the matching forward pass. If omitted, the cached input is used.

        Returns:
            (tuple): ``(grad_in [B x in], grad_w [out x in], grad_b [out])``.

        Raises:
            MissingForwardCache: if no input is given and no forward pass was cached.
            ShapeMismatch: if ``grad_out`` does not match the forward output.
        """
        if x is None:
            x = self._cached_input
        if x is None:
            raise custom_exception.MissingForwardCache()
        if grad_out.shape != (x.shape[0], self.out_features):
            raise custom_exception.ShapeMismatch("dense_backward", grad_out.shape, (x.shape[0], self.out_features))
        grad_in = grad_out @ self._weights
        grad_w = grad_out.T @ x
        grad_b = grad_out.sum(axis=0)
        return grad_in, grad_w, grad_b


def dense_forward(layer, x):
    """
    Functional form of ``DenseLayer.forward()``; caches ``x`` for ``dense_backward()``.
    """
    return layer.forward(x)


def dense_backward(layer, grad_out):
    """
    Functional form of ``DenseLayer.backward()`` using the input cached by the last ``dense_forward()``.
    """
    return layer.backward(grad_out)


class ParamVector:
    """
    Flat float64 vector holding every parameter of a model, together with its layout: the ordered list of
    ``(layer id, parameter name, shape)`` entries. The layout is identical across all clients and the server of
    one experiment, which is what makes averaging and checkpointing a plain vector operation.

    Examples:
        .. code-block:: python

            params = model.get_params()
            for layer_id, name, values in params.items():
                print(layer_id, name, values.shape)

    """

    def __init__(self, data, layout):
        self._layout = tuple((str(layer_id), str(name), tuple(int(d) for d in shape))
                             for layer_id, name, shape in layout)
        self._data = np.array(data, dtype=np.float64).reshape(-1)
        expected = sum(int(np.prod(shape)) for _, _, shape in self._layout)
        if expected != self._data.size:
            raise custom_exception.ShapeMismatch("param_vector", (self._data.size,), (expected,))

    @property
    def data(self):
        return self._data

    @property
    def layout(self):
        return self._layout

    @classmethod
    def flatten(cls, named_arrays):
        """
        Builds a ParamVector from an ordered list of ``(layer id, parameter name, array)`` entries.
        """
        named_arrays = list(named_arrays)
        layout = [(layer_id, name, np.shape(values)) for layer_id, name, values in named_arrays]
        if not named_arrays:
            return cls(np.zeros(0), layout)
        data = np.concatenate([np.asarray(values, dtype=np.float64).reshape(-1) for _, _, values in named_arrays])
        return cls(data, layout)

    def unflatten(self):
        """
        Splits the vector back into ``(layer id, parameter name, array)`` entries. The arrays are copies.
        """
        return [(layer_id, name, values.copy()) for layer_id, name, values in self.items()]

    def items(self):
        """
        Iterates over ``(layer id, parameter name, view)`` where each view is a reshaped slice of ``data``.
        """
        offset = 0
        for layer_id, name, shape in self._layout:
            size = int(np.prod(shape))
            yield layer_id, name, self._data[offset:offset + size].reshape(shape)
            offset += size

    def check_layout(self, other):
        """
        Raises LayoutMismatch if ``other`` does not share this vector's layout.
        """
        if self._layout != other.layout:
            for mine, theirs in zip(self._layout, other.layout):
                if mine != theirs:
                    raise custom_exception.LayoutMismatch("{0}.{1}".format(mine[0], mine[1]))
            raise custom_exception.LayoutMismatch("length")

    def zeros_like(self):
        return ParamVector(np.zeros_like(self._data), self._layout)

    def copy(self):
        return ParamVector(self._data.copy(), self._layout)

    def __add__(self, other):
        self.check_layout(other)
        return ParamVector(self._data + other.data, self._layout)

    def __sub__(self, other):
        self.check_layout(other)
        return ParamVector(self._data - other.data, self._layout)

    def __mul__(self, scalar):
        return ParamVector(self._data * float(scalar), self._layout)

    __rmul__ = __mul__

    def __len__(self):
        return self._data.size

    def __repr__(self):
        return "ParamVector(size={0}, entries={1})".format(self._data.size, len(self._layout))


def sgd_step(params, grads, lr):
    """
    Plain SGD update ``params − lr·grads`` (no momentum).

    Parameters:
        params (ParamVector): current parameters.
        grads (ParamVector): gradients with the same layout.
        lr (float): positive learning rate η.

    Returns:
        (ParamVector): the updated parameters.

    Raises:
        LayoutMismatch: if the layouts differ.
        InvalidLearningRate: if ``lr`` is not positive.
    """
    if not lr > 0:
        raise custom_exception.InvalidLearningRate(lr)
    params.check_layout(grads)
    return ParamVector(check_finite(params.data - lr * grads.data, "sgd_step"), params.layout)

""" The **snn.network** module contains the implementation of the **SpikingMlp()** class: a multilayer perceptron
of LIF blocks trained with backpropagation through time (BPTT), followed by a non-spiking readout whose outputs,
averaged over the T time steps, are the logits of the classifier.
"""

# Import third-party libraries
import numpy as np

# Import internal libraries
from fedlec_simulator.nn.layers import DenseLayer, ParamVector
from fedlec_simulator.nn import exceptions as nn_exception
from fedlec_simulator.snn import exceptions as custom_exception
from fedlec_simulator.snn.neuron import LifParams, LifState, NeuronMode, lif_step, surrogate_grad


class SpikingMlp:
    """
    Spiking multilayer perceptron with direct input encoding: the static feature vector is injected as input
    current at every time step ``t = 1..T``. Each hidden block is a dense layer followed by a LIF population; the
    readout is a plain dense layer applied to the last hidden spikes, and the logits are its mean over time. The same
    weights are used at every time step.

    ``init_gain`` scales the Xavier bound of the hidden blocks; the readout keeps the plain bound.

    Examples:
        .. code-block:: python

            from fedlec_simulator.snn.network import SpikingMlp
            from fedlec_simulator.utils.lib import get_random_generator

            model = SpikingMlp([16, 128, 64, 8], time_steps=4, rng=get_random_generator(0), init_gain=3.0)
            logits = model.forward(x)
            grads = model.backward(grad_logits)     # ParamVector with the layout of model.get_params()

    """

    # Names used in the parameter layout
    __WEIGHT_NAME = "weight"
    __BIAS_NAME = "bias"
    __READOUT_ID = "readout"

    def __init__(self, layer_sizes, time_steps=4, lif_params=None, mode=NeuronMode.SPIKE, rng=None, init_gain=1.0):
        layer_sizes = [int(size) for size in layer_sizes]
        if len(layer_sizes) < 3 or min(layer_sizes) < 1:
            raise custom_exception.InvalidArchitecture(layer_sizes)
        if int(time_steps) < 1:
            raise custom_exception.InvalidArchitecture("time_steps={0}".format(time_steps))

        self._lif_params = lif_params if lif_params is not None else LifParams()
        self._time_steps = int(time_steps)
        self._mode = NeuronMode(mode)
        self._layers = []
        for index, (n_in, n_out) in enumerate(zip(layer_sizes[:-2], layer_sizes[1:-1])):
            layer = DenseLayer(n_in, n_out, layer_id="hidden_{0}".format(index), rng=rng, gain=init_gain)
            self._layers.append((layer, self._lif_params))
        self._readout = DenseLayer(layer_sizes[-2], layer_sizes[-1], layer_id=self.__READOUT_ID, rng=rng)
        self._layer_sizes = layer_sizes

        # Activations stored by forward() and consumed by backward()
        self._bptt_cache = None

    @property
    def layers(self):
        """
        Ordered list of ``(DenseLayer, LifParams)`` hidden blocks.
        """
        return self._layers

    @property
    def readout(self):
        return self._readout

    @property
    def layer_sizes(self):
        return list(self._layer_sizes)

    @property
    def time_steps(self):
        return self._time_steps

    @property
    def lif_params(self):
        return self._lif_params

    @property
    def mode(self):
        """
        The NeuronMode used by the next forward/backward pass. Changing it clears the stored activations.
        """
        return self._mode

    @mode.setter
    def mode(self, new_mode):
        self._mode = NeuronMode(new_mode)
        self._bptt_cache = None

    @property
    def input_dim(self):
        return self._layer_sizes[0]

    @property
    def num_classes(self):
        return self._layer_sizes[-1]

    def _dense_layers(self):
        return [layer for layer, _ in self._layers] + [self._readout]

    def get_params(self):
        """
        Returns a snapshot of every weight and bias as a ParamVector (hidden blocks first, readout last).
        """
        entries = []
        for layer in self._dense_layers():
            entries.append((layer.layer_id, self.__WEIGHT_NAME, layer.weights))
            entries.append((layer.layer_id, self.__BIAS_NAME, layer.bias))
        return ParamVector.flatten(entries)

    def set_params(self, params):
        """
        Loads a ParamVector produced by ``get_params()`` on a model of the same architecture.

        Raises:
            LayoutMismatch: if the layout differs from this model's layout.
        """
        self.get_params().check_layout(params)
        layers = {layer.layer_id: layer for layer in self._dense_layers()}
        for layer_id, name, values in params.items():
            if name == self.__WEIGHT_NAME:
                layers[layer_id].weights = values
            else:
                layers[layer_id].bias = values
        self._bptt_cache = None

    def clone(self):
        """
        Returns an independent model with the same architecture, mode and parameters.
        """
        twin = SpikingMlp(self._layer_sizes, self._time_steps, self._lif_params, self._mode)
        twin.set_params(self.get_params())
        return twin

    def reset_state(self):
        self._bptt_cache = None

    def _simulate(self, x, keep_cache):
        if x.ndim != 2 or x.shape[1] != self.input_dim:
            raise nn_exception.ShapeMismatch("snn_forward", x.shape, (x.shape[0], self.input_dim))
        batch_size = x.shape[0]
        n_layers = len(self._layers)
        states = [LifState.resting(batch_size, layer.out_features, params) for layer, params in self._layers]

        inputs = [[None] * self._time_steps for _ in range(n_layers)]
        potentials = [[None] * self._time_steps for _ in range(n_layers)]
        outputs = [[None] * self._time_steps for _ in range(n_layers)]
        readout_inputs = [None] * self._time_steps

        logits = np.zeros((batch_size, self.num_classes), dtype=np.float64)
        rates = [np.zeros((batch_size, layer.out_features), dtype=np.float64) for layer, _ in self._layers]
        for t in range(self._time_steps):
            h = x
            for index, (layer, params) in enumerate(self._layers):
                current = layer.forward(h, cache=False)
                out, states[index] = lif_step(states[index], current, params, self._mode)
                inputs[index][t] = h
                potentials[index][t] = states[index].v_pre
                outputs[index][t] = out
                rates[index] += out
                h = out
            readout_inputs[t] = h
            logits += self._readout.forward(h, cache=False)
        logits /= self._time_steps
        rates = [rate / self._time_steps for rate in rates]

        if keep_cache:
            self._bptt_cache = {
                "batch_size": batch_size,
                "mode": self._mode,
                "inputs": inputs,
                "potentials": potentials,
                "outputs": outputs,
                "readout_inputs": readout_inputs,
            }
        return logits, rates

    def forward(self, x):
        """
        Presents ``x`` at every time step and returns the time-averaged readout.

        Parameters:
            x (Tensor): feature batch [B x d].

        Returns:
            (Tensor): logits [B x |C|].

        Raises:
            ShapeMismatch: if the feature dimension differs from the first layer input size.
        """
        logits, _ = self._simulate(x, keep_cache=True)
        return logits

    def hidden_rates(self, x):
        """
        Returns the time-averaged output of the last hidden block for ``x`` [B x n_last], i.e. the features the
        readout classifies. Does not touch the BPTT cache.
        """
        _, rates = self._simulate(x, keep_cache=False)
        return rates[-1]

    def spike_rates(self, x):
        """
        Returns the mean firing rate of every hidden block for ``x``, ordered from the input side, as floats in
        [0, 1]. A block whose rate is 0 never fires and passes no signal to the layers above it.
        """
        _, rates = self._simulate(x, keep_cache=False)
        return [float(rate.mean()) for rate in rates]

    def backward(self, grad_logits):
        """
        Backpropagation through the T steps of the last forward pass.

        In SPIKE mode the derivative of the Heaviside step is replaced by ``surrogate_grad`` and the reset gate is
        detached: the gradient flows through ``(1 - S)·V[t⁻]`` with ``S`` held constant. In SMOOTH mode the exact
        derivative of every operation is used, including the reset gate.

        Parameters:
            grad_logits (Tensor): gradient of the loss w.r.t. the logits [B x |C|].

        Returns:
            (ParamVector): gradients with the layout of ``get_params()``.

        Raises:
            MissingBpttCache: if no forward pass was cached.
        """
        cache = self._bptt_cache
        if cache is None:
            raise custom_exception.MissingBpttCache()
        if grad_logits.shape != (cache["batch_size"], self.num_classes):
            raise nn_exception.ShapeMismatch("snn_backward", grad_logits.shape,
                                             (cache["batch_size"], self.num_classes))
        mode = cache["mode"]
        step_grad = grad_logits / self._time_steps

        # Readout: identical gradient at every step
        readout_w = np.zeros_like(self._readout.weights)
        readout_b = np.zeros_like(self._readout.bias)
        upstream = [None] * self._time_steps
        for t in range(self._time_steps):
            grad_in, grad_w, grad_b = self._readout.backward(step_grad, x=cache["readout_inputs"][t])
            readout_w += grad_w
            readout_b += grad_b
            upstream[t] = grad_in

        hidden_grads = [None] * len(self._layers)
        for index in reversed(range(len(self._layers))):
            layer, params = self._layers[index]
            grad_weights = np.zeros_like(layer.weights)
            grad_bias = np.zeros_like(layer.bias)
            carry = np.zeros((cache["batch_size"], layer.out_features), dtype=np.float64)
            below = [None] * self._time_steps
            for t in reversed(range(self._time_steps)):
                v_pre = cache["potentials"][index][t]
                out = cache["outputs"][index][t]
                slope = surrogate_grad(v_pre - params.v_threshold)
                reset_path = 1.0 - out
                if mode == NeuronMode.SMOOTH:
                    reset_path = reset_path + (params.v_reset - v_pre) * slope
                grad_v_pre = upstream[t] * slope + carry * reset_path
                carry = grad_v_pre * params.decay
                grad_current = grad_v_pre / params.tau
                grad_in, grad_w, grad_b = layer.backward(grad_current, x=cache["inputs"][index][t])
                grad_weights += grad_w
                grad_bias += grad_b
                below[t] = grad_in
            hidden_grads[index] = (layer.layer_id, grad_weights, grad_bias)
            upstream = below

        entries = []
        for layer_id, grad_weights, grad_bias in hidden_grads:
            entries.append((layer_id, self.__WEIGHT_NAME, grad_weights))
            entries.append((layer_id, self.__BIAS_NAME, grad_bias))
        entries.append((self.__READOUT_ID, self.__WEIGHT_NAME, readout_w))
        entries.append((self.__READOUT_ID, self.__BIAS_NAME, readout_b))
        return ParamVector.flatten(entries)


def snn_forward(model, x):
    """
    Functional form of ``SpikingMlp.forward()``.
    """
    return model.forward(x)


def snn_backward(model, grad_logits):
    """
    Functional form of ``SpikingMlp.backward()``.
    """
    return model.backward(grad_logits)

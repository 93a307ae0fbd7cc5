""" The **snn.neuron** module implements the discrete-time leaky integrate-and-fire (LIF) neuron with hard reset
and its arc-tangent surrogate gradient.

One step of the dynamics, for membrane potential ``V``, input current ``I`` and constants ``tau``, ``v_threshold``
and ``v_reset``::

    V_pre = V + (I - (V - v_reset)) / tau        # charge with leak toward v_reset
    S     = H(V_pre - v_threshold)                 # spike, H(0) = 1
    V     = S * v_reset + (1 - S) * V_pre          # hard reset

In smooth mode the Heaviside step is replaced by ``g(x) = arctan(pi·x)/pi + 1/2`` whose derivative is exactly the
surrogate gradient ``1 / (1 + (pi·x)^2)``, which turns the network into an ordinary differentiable system.
"""

# Import python libraries
import enum
from dataclasses import dataclass

# Import third-party libraries
import numpy as np

# Import internal libraries
from fedlec_simulator.snn import exceptions as custom_exception


class NeuronMode(enum.Enum):
    """
    Firing nonlinearity used during one forward/backward pass:

    - SPIKE: binary Heaviside spikes, surrogate gradient in the backward pass.
    - SMOOTH: the arc-tangent sigmoid ``g`` in the forward pass, its exact derivative in the backward pass.
    """
    SPIKE = "spike"
    SMOOTH = "smooth"


@dataclass(frozen=True)
class LifParams:
    """
    Constants of a LIF neuron population.

    Attributes:
        tau (float): membrane time constant, > 1.
        v_threshold (float): firing threshold.
        v_reset (float): reset (and resting) potential, below the threshold.
        additive_leak (bool): charge with ``+(V - v_reset)`` instead of the leak ``-(V - v_reset)``. The additive
            form makes the potential self-amplifying; it is kept selectable to reproduce that variant.
    """
    tau: float = 2.0
    v_threshold: float = 1.0
    v_reset: float = 0.0
    additive_leak: bool = False

    def __post_init__(self):
        if not self.tau > 1:
            raise custom_exception.InvalidNeuronParameters("tau={0} must be > 1".format(self.tau))
        if not self.v_threshold > self.v_reset:
            raise custom_exception.InvalidNeuronParameters(
                "v_threshold={0} must be > v_reset={1}".format(self.v_threshold, self.v_reset))

    @property
    def leak_sign(self):
        return 1.0 if self.additive_leak else -1.0

    @property
    def decay(self):
        """
        Derivative of ``V_pre`` w.r.t. the previous potential.
        """
        return 1.0 + self.leak_sign / self.tau


class LifState:
    """
    Membrane potentials ``V[t]`` of a neuron population across a batch [B x n]. ``v_pre`` keeps the pre-reset
    potential ``V[t⁻]`` of the last step (None before the first step).
    """

    def __init__(self, v, v_pre=None):
        self.v = v
        self.v_pre = v_pre

    @classmethod
    def resting(cls, batch_size, n_neurons, params):
        """
        Initial state of a forward pass: every neuron at ``v_reset``.
        """
        return cls(np.full((batch_size, n_neurons), params.v_reset, dtype=np.float64))


def surrogate_grad(x):
    """
    Arc-tangent surrogate gradient ``1 / (1 + (pi·x)^2)``, applied elementwise. It is even and equals 1 at 0.

    Examples:
        >>> surrogate_grad(np.array([0.0, 1.0 / np.pi]))
        array([1. , 0.5])
    """
    x = np.asarray(x, dtype=np.float64)
    return 1.0 / (1.0 + (np.pi * x) ** 2)


def smooth_spike(x):
    """
    Smooth firing function ``g(x) = arctan(pi·x)/pi + 1/2``, the antiderivative of ``surrogate_grad``.
    """
    return np.arctan(np.pi * np.asarray(x, dtype=np.float64)) / np.pi + 0.5


def heaviside(x):
    return (np.asarray(x) >= 0.0).astype(np.float64)


def integrate(v_prev, input_current, params):
    """
    Charging step of the LIF dynamics, returns ``V[t⁻]``.
    """
    return v_prev + (input_current + params.leak_sign * (v_prev - params.v_reset)) / params.tau


def fire(v_pre, params, mode):
    """
    Firing nonlinearity applied to ``V[t⁻] - v_threshold``.
    """
    if mode == NeuronMode.SPIKE:
        return heaviside(v_pre - params.v_threshold)
    return smooth_spike(v_pre - params.v_threshold)


def reset(v_pre, out, params):
    """
    Hard reset: neurons that fired go to ``v_reset``; in smooth mode the reset is blended by ``out``.
    """
    return out * params.v_reset + (1.0 - out) * v_pre


def lif_step(state, input_current, params, mode=NeuronMode.SPIKE):
    """
    Advances a LIF population by one time step.

    Parameters:
        state (LifState): membrane potentials ``V[t-1]`` [B x n].
        input_current (Tensor): ``I(t)`` [B x n].
        params (LifParams): neuron constants.
        mode (NeuronMode): SPIKE or SMOOTH.

    Returns:
        (tuple): ``(out, new_state)`` where ``out`` holds the spikes (or smooth activations) and ``new_state``
        holds ``V[t]`` and ``V[t⁻]``.

    Raises:
        NeuronShapeMismatch: if the current and the state shapes differ.

    Examples:
        .. code-block:: python

            params = LifParams(tau=2.0, v_threshold=1.0, v_reset=0.0)
            state = LifState(np.zeros((1, 1)))
            out, state = lif_step(state, np.array([[2.0]]), params)   # V[t⁻] = 1 -> spike, V[t] = 0

    """
    if input_current.shape != state.v.shape:
        raise custom_exception.NeuronShapeMismatch(input_current.shape, state.v.shape)
    v_pre = integrate(state.v, input_current, params)
    out = fire(v_pre, params, mode)
    return out, LifState(reset(v_pre, out, params), v_pre)

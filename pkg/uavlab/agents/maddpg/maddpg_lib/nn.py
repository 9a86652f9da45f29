"""Double-precision multilayer perceptrons with hand-written reverse mode.

Weights are stored as (fan_in, fan_out) matrices so a batch of row vectors x maps to x @ W + b.
Hidden layers use ReLU (subgradient 0 at 0) and the output is either linear or tanh.
"""
import dataclasses
import typing

import numpy as np

ACTIVATIONS = ('none', 'tanh')


@dataclasses.dataclass(frozen=True)
class MlpSpec:
    """The shape of a multilayer perceptron.

    Parameters
    ----------
    layer_sizes : tuple of int
        Input width, hidden widths and output width, in order.
    output_activation : str
        'none' for a linear output (critics) or 'tanh' for a squashed output (actors).

    """

    layer_sizes: typing.Tuple[int, ...]
    output_activation: str = 'none'

    def __post_init__(self):
        """Validate the layer sizes and the output activation."""
        object.__setattr__(self, 'layer_sizes', tuple(int(size) for size in self.layer_sizes))
        if len(self.layer_sizes) < 2:
            raise ValueError('An MLP needs at least an input and an output layer.')
        if min(self.layer_sizes) < 1:
            raise ValueError('Layer widths must be at least 1.')
        if self.output_activation not in ACTIVATIONS:
            raise ValueError('output_activation must be one of: {}.'.format(', '.join(ACTIVATIONS)))

    @property
    def num_layers(self):
        """Return the number of affine layers."""
        return len(self.layer_sizes) - 1

    @property
    def input_size(self):
        """Return the input width."""
        return self.layer_sizes[0]

    @property
    def output_size(self):
        """Return the output width."""
        return self.layer_sizes[-1]


class MlpParams:
    """The weights and biases of an MLP.

    Gradients share this container. Every in-place update bumps version, which lets backward
    reject caches computed with older parameters.

    Parameters
    ----------
    spec : MlpSpec
        The network shape.
    weights : list of np.ndarray
        weights[layer] has shape (layer_sizes[layer], layer_sizes[layer + 1]).
    biases : list of np.ndarray
        biases[layer] has shape (layer_sizes[layer + 1],).

    """

    def __init__(self, spec, weights, biases):
        """Create a parameter container, checking every shape against spec.layer_sizes."""
        if len(weights) != spec.num_layers or len(biases) != spec.num_layers:
            raise ValueError('Expected {} layers, got {} weights and {} biases.'.format(
                spec.num_layers, len(weights), len(biases)))
        self.spec = spec
        self.weights = [np.array(weight, dtype=np.float64) for weight in weights]
        self.biases = [np.array(bias, dtype=np.float64) for bias in biases]
        for layer, (weight, bias) in enumerate(zip(self.weights, self.biases)):
            fan_in, fan_out = spec.layer_sizes[layer], spec.layer_sizes[layer + 1]
            if weight.shape != (fan_in, fan_out) or bias.shape != (fan_out,):
                raise ValueError('Layer {} has shapes {} and {}, expected {} and {}.'.format(
                    layer, weight.shape, bias.shape, (fan_in, fan_out), (fan_out,)))
        self.version = 0

    @classmethod
    def zeros(cls, spec):
        """Create all-zero parameters for a spec."""
        sizes = spec.layer_sizes
        return cls(spec,
                   [np.zeros((sizes[layer], sizes[layer + 1])) for layer in range(spec.num_layers)],
                   [np.zeros(sizes[layer + 1]) for layer in range(spec.num_layers)])

    def arrays(self):
        """Return every array in layer order: W0, b0, W1, b1, ..."""
        arrays = []
        for weight, bias in zip(self.weights, self.biases):
            arrays.extend([weight, bias])
        return arrays

    def copy(self):
        """Return a deep copy with a fresh version counter."""
        return MlpParams(self.spec, self.weights, self.biases)

    def flatten(self):
        """Return every parameter as one vector in layer order."""
        return np.concatenate([array.reshape(-1) for array in self.arrays()])

    def touch(self):
        """Mark the parameters as modified in place."""
        self.version += 1


def init_params(spec, random, final_scale=None):
    """Initialize MLP parameters.

    Parameters
    ----------
    spec : MlpSpec
        The network shape.
    random : np.random.RandomState
        The initialization stream.
    final_scale : float, optional
        If given, the last layer is drawn from U(-final_scale, final_scale). Defaults to 1e-3 for
        tanh outputs so that fresh actors emit near-zero actions.

    Returns
    -------
    params : MlpParams
        Every other layer is drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).

    """
    if final_scale is None and spec.output_activation == 'tanh':
        final_scale = 1e-3
    weights = []
    biases = []
    for layer in range(spec.num_layers):
        fan_in, fan_out = spec.layer_sizes[layer], spec.layer_sizes[layer + 1]
        bound = 1 / np.sqrt(fan_in)
        if layer == spec.num_layers - 1 and final_scale is not None:
            bound = final_scale
        weights.append(random.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(random.uniform(-bound, bound, size=fan_out))
    return MlpParams(spec, weights, biases)


def forward(params, inputs):
    """Evaluate an MLP.

    Parameters
    ----------
    params : MlpParams
        The network.
    inputs : np.ndarray
        A vector of width input_size or a batch of shape (B, input_size).

    Returns
    -------
    outputs : np.ndarray
        A vector or a (B, output_size) batch, matching the input.
    cache : dict
        The activations needed by backward.

    """
    inputs = np.asarray(inputs, dtype=np.float64)
    single = inputs.ndim == 1
    batch = inputs[np.newaxis] if single else inputs
    if batch.ndim != 2 or batch.shape[1] != params.spec.input_size:
        raise ValueError('Expected inputs of width {}, got shape {}.'.format(
            params.spec.input_size, inputs.shape))

    activations = [batch]
    pre_activations = []
    for layer, (weight, bias) in enumerate(zip(params.weights, params.biases)):
        pre = activations[-1] @ weight + bias
        pre_activations.append(pre)
        if layer < params.spec.num_layers - 1:
            activations.append(np.maximum(pre, 0.0))
        elif params.spec.output_activation == 'tanh':
            activations.append(np.tanh(pre))
        else:
            activations.append(pre)

    cache = {'params_id': id(params),
             'version': params.version,
             'single': single,
             'activations': activations,
             'pre_activations': pre_activations}
    outputs = activations[-1]
    return (outputs[0] if single else outputs), cache


def backward(params, cache, grad_outputs, grad_pre_outputs=None):
    """Backpropagate an output gradient through an MLP.

    Parameters
    ----------
    params : MlpParams
        The network used in the matching forward call, unmodified since.
    cache : dict
        The cache returned by forward.
    grad_outputs : np.ndarray
        dL/d(outputs), shaped like the outputs.
    grad_pre_outputs : np.ndarray, optional
        An extra dL/d(pre-activations) of the output layer, added after the output
        activation. Used for penalties on tanh pre-activations.

    Returns
    -------
    grads : MlpParams
        dL/d(weights) and dL/d(biases), summed over the batch.
    grad_inputs : np.ndarray
        dL/d(inputs), shaped like the inputs.

    """
    if cache['params_id'] != id(params) or cache['version'] != params.version:
        raise RuntimeError('The forward cache does not belong to the current parameters.')
    activations = cache['activations']
    pre_activations = cache['pre_activations']
    delta = np.asarray(grad_outputs, dtype=np.float64)
    if cache['single']:
        delta = delta[np.newaxis]
    if delta.shape != activations[-1].shape:
        raise ValueError('Expected an output gradient of shape {}, got {}.'.format(
            activations[-1].shape, delta.shape))
    if params.spec.output_activation == 'tanh':
        delta = delta * (1 - activations[-1] ** 2)
    if grad_pre_outputs is not None:
        extra = np.asarray(grad_pre_outputs, dtype=np.float64)
        delta = delta + (extra[np.newaxis] if cache['single'] else extra)

    num_layers = params.spec.num_layers
    grad_weights = [None] * num_layers
    grad_biases = [None] * num_layers
    for layer in reversed(range(num_layers)):
        grad_weights[layer] = activations[layer].T @ delta
        grad_biases[layer] = delta.sum(axis=0)
        delta = delta @ params.weights[layer].T
        if layer > 0:
            delta = delta * (pre_activations[layer - 1] > 0)

    grad_inputs = delta[0] if cache['single'] else delta
    return MlpParams(params.spec, grad_weights, grad_biases), grad_inputs


def global_norm(grads):
    """Return the L2 norm of all gradient arrays taken together."""
    return float(np.sqrt(sum(np.sum(array ** 2) for array in grads.arrays())))


def clip_by_global_norm(grads, max_norm):
    """Scale gradients so that their global norm is at most max_norm.

    Returns
    -------
    clipped : MlpParams
        The scaled gradients, or the input if no scaling was needed.
    norm : float
        The global norm before clipping.

    """
    norm = global_norm(grads)
    if max_norm is None or norm <= max_norm:
        return grads, norm
    scale = max_norm / norm
    return MlpParams(grads.spec,
                     [weight * scale for weight in grads.weights],
                     [bias * scale for bias in grads.biases]), norm


@dataclasses.dataclass
class AdamState:
    """Moment estimates and settings of an Adam optimizer.

    Attributes
    ----------
    m : list of np.ndarray
        First moments, one per parameter array in layer order.
    v : list of np.ndarray
        Second moments, one per parameter array in layer order.
    step : int
        The number of updates applied so far.
    lr : float
        The learning rate.
    beta1 : float
        First moment decay.
    beta2 : float
        Second moment decay.
    eps : float
        Denominator offset.
    clip_norm : float or None
        Gradients are rescaled to this global norm before every update.

    """

    m: list
    v: list
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: typing.Optional[float] = None

    @classmethod
    def for_params(cls, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8, clip_norm=None):
        """Create a zero-initialized optimizer state for a parameter container."""
        if lr <= 0:
            raise ValueError('lr must be positive.')
        if clip_norm is not None and clip_norm <= 0:
            raise ValueError('clip_norm must be positive.')
        return cls(m=[np.zeros_like(array) for array in params.arrays()],
                   v=[np.zeros_like(array) for array in params.arrays()],
                   lr=lr, beta1=beta1, beta2=beta2, eps=eps, clip_norm=clip_norm)

    def to_dict(self):
        """Serialize the state into a JSON-serializable dict."""
        return {'m': [array.tolist() for array in self.m],
                'v': [array.tolist() for array in self.v],
                'step': self.step,
                'lr': self.lr,
                'beta1': self.beta1,
                'beta2': self.beta2,
                'eps': self.eps,
                'clip_norm': self.clip_norm}

    @classmethod
    def from_dict(cls, state):
        """Create a state from the output of to_dict."""
        state = dict(state)
        state['m'] = [np.array(array, dtype=np.float64) for array in state['m']]
        state['v'] = [np.array(array, dtype=np.float64) for array in state['v']]
        return cls(**state)


def adam_step(state, params, grads):
    """Apply one bias-corrected Adam update in place.

    Parameters
    ----------
    state : AdamState
        The optimizer state, updated in place.
    params : MlpParams
        The parameters, updated in place.
    grads : MlpParams
        The gradients, clipped to state.clip_norm first.

    Returns
    -------
    params : MlpParams
        The updated parameters.

    """
    if state.clip_norm is not None:
        grads, _ = clip_by_global_norm(grads, state.clip_norm)
    state.step += 1
    first_correction = 1 - state.beta1 ** state.step
    second_correction = 1 - state.beta2 ** state.step
    for param, grad, m, v in zip(params.arrays(), grads.arrays(), state.m, state.v):
        m *= state.beta1
        m += (1 - state.beta1) * grad
        v *= state.beta2
        v += (1 - state.beta2) * grad ** 2
        m_hat = m / first_correction
        v_hat = v / second_correction
        param -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    params.touch()
    return params


def polyak_update(target, source, tau):
    """Move target parameters towards source parameters in place.

    Parameters
    ----------
    target : MlpParams
        The target network, updated to (1 - tau) * target + tau * source.
    source : MlpParams
        The online network.
    tau : float
        The interpolation factor in [0, 1].

    Returns
    -------
    target : MlpParams
        The updated target.

    """
    if not 0 <= tau <= 1:
        raise ValueError('tau must be in [0, 1].')
    if target.spec != source.spec:
        raise ValueError('Target and source networks have different shapes.')
    for target_array, source_array in zip(target.arrays(), source.arrays()):
        target_array *= 1 - tau
        target_array += tau * source_array
    target.touch()
    return target


def params_to_dict(params):
    """Serialize parameters into a JSON-serializable dict that round-trips exactly."""
    return {'layer_sizes': list(params.spec.layer_sizes),
            'output_activation': params.spec.output_activation,
            'weights': [weight.tolist() for weight in params.weights],
            'biases': [bias.tolist() for bias in params.biases]}


def params_from_dict(document):
    """Create parameters from the output of params_to_dict."""
    spec = MlpSpec(tuple(document['layer_sizes']), document['output_activation'])
    sizes = spec.layer_sizes
    weights = [np.array(weight, dtype=np.float64).reshape(sizes[layer], sizes[layer + 1])
               for layer, weight in enumerate(document['weights'])]
    biases = [np.array(bias, dtype=np.float64).reshape(sizes[layer + 1])
              for layer, bias in enumerate(document['biases'])]
    return MlpParams(spec, weights, biases)

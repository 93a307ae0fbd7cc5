""" The **calibration.losses** module implements the local objectives used by the clients. Each function returns the
loss value together with its analytic gradient w.r.t. the (student) logits, so the result can be fed directly to
``SpikingMlp.backward()``.

The FedLEC objective combines three terms::

    L = L_c + theta * L_gc + lambda * L_ad

- ``L_c``: softmax cross-entropy on logits shifted by ``log(gamma)``, the label prior of the shard;
- ``L_gc``: generalized-calibration penalty, the gamma-weighted log-mean-exp of each class logit over the samples
  that do not belong to that class;
- ``L_ad``: alignment distillation, the KL divergence restricted to the missing labels between the frozen
  round-start global model (teacher) and the local model.

All softmax and log-mean-exp computations subtract the maximum before exponentiation.
"""

# Import python libraries
import enum
from dataclasses import dataclass

# Import third-party libraries
import numpy as np

# Import internal libraries
from fedlec_simulator.calibration import exceptions as custom_exception
from fedlec_simulator.nn.layers import ParamVector


class Algorithm(enum.Enum):
    """
    Local training variant:

    - FEDLEC: calibrated objective with generalized calibration and alignment distillation.
    - FEDAVG: plain softmax cross-entropy.
    - FEDPROX: plain softmax cross-entropy plus the proximal term ``(mu/2)·||w - w_global||²``.
    """
    FEDLEC = "fedlec"
    FEDAVG = "fedavg"
    FEDPROX = "fedprox"


@dataclass(frozen=True)
class CalibrationConfig:
    """
    Coefficients of the local objective.

    Attributes:
        variant (Algorithm): the local training variant.
        theta (float): weight of the generalized-calibration penalty, >= 0.
        lambda_ (float): weight of the alignment distillation, >= 0.
        mu (float): proximal coefficient of FedProx, >= 0.
        use_gc (bool): ablation switch; when False the penalty is still reported but its weight is 0.
        use_ad (bool): ablation switch; when False the distillation is still reported but its weight is 0.
    """
    variant: Algorithm = Algorithm.FEDLEC
    theta: float = 0.1
    lambda_: float = 1.0
    mu: float = 0.01
    use_gc: bool = True
    use_ad: bool = True

    def __post_init__(self):
        try:
            object.__setattr__(self, "variant", Algorithm(self.variant))
        except ValueError:
            raise custom_exception.InvalidCalibrationConfig("variant", "unknown algorithm {0}".format(self.variant))
        for name in ("theta", "lambda_", "mu"):
            value = getattr(self, name)
            if not value >= 0:
                raise custom_exception.InvalidCalibrationConfig(name, "{0} is negative".format(value))

    @property
    def effective_theta(self):
        return self.theta if self.variant == Algorithm.FEDLEC and self.use_gc else 0.0

    @property
    def effective_lambda(self):
        return self.lambda_ if self.variant == Algorithm.FEDLEC and self.use_ad else 0.0

    @property
    def needs_teacher(self):
        return self.variant == Algorithm.FEDLEC


@dataclass
class LossBreakdown:
    """
    Value of every term of the local objective for one batch, the effective weights used to combine them and the
    gradient of the total w.r.t. the student logits.
    """
    total: float
    lc: float
    lgc: float
    lad: float
    grad_logits: np.ndarray
    theta: float = 0.0
    lambda_: float = 0.0


def _check_batch(name, logits, labels):
    if logits.ndim != 2 or logits.shape[0] < 1:
        raise custom_exception.LogitShapeMismatch(name, logits.shape, "[B x |C|]")
    if labels.shape != (logits.shape[0],):
        raise custom_exception.LogitShapeMismatch(name, logits.shape, labels.shape)


def log_softmax(logits):
    shifted = logits - logits.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def softmax(logits):
    return np.exp(log_softmax(logits))


def cross_entropy(logits, labels):
    """
    Mean softmax cross-entropy over the batch.

    Parameters:
        logits (Tensor): [B x |C|].
        labels (numpy.ndarray): integer labels [B].

    Returns:
        (tuple): ``(loss, grad_logits)``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    _check_batch("cross_entropy", logits, labels)
    batch_size = logits.shape[0]
    log_probs = log_softmax(logits)
    rows = np.arange(batch_size)
    loss = -float(np.mean(log_probs[rows, labels]))
    grad = np.exp(log_probs)
    grad[rows, labels] -= 1.0
    return loss, grad / batch_size


def calibrated_ce(logits, labels, stats):
    """
    Cross-entropy on the calibrated logits ``f'_y(x) = f_y(x) + log(gamma_y)``.

    Parameters:
        logits (Tensor): unadjusted logits [B x |C|].
        labels (numpy.ndarray): integer labels [B].
        stats (LabelStats): statistics of the client shard.

    Returns:
        (tuple): ``(loss, grad_logits)``, the gradient taken w.r.t. the unadjusted logits.

    Raises:
        NonPositivePrior: if any ``gamma`` entry is not strictly positive.

    Examples:
        .. code-block:: python

            # gamma = (0.75, 0.25), f = (0, 0), label 0  ->  loss = -ln(0.75)
            loss, grad = calibrated_ce(np.zeros((1, 2)), np.array([0]), stats)

    """
    gamma = np.asarray(stats.gamma, dtype=np.float64)
    non_positive = np.flatnonzero(~(gamma > 0))
    if non_positive.size:
        raise custom_exception.NonPositivePrior(int(non_positive[0]))
    if np.all(gamma == gamma[0]):
        # A uniform prior cancels in the softmax
        return cross_entropy(logits, labels)
    return cross_entropy(logits + np.log(gamma), labels)


def gc_penalty(logits, labels, stats):
    """
    Generalized-calibration penalty::

        L_gc = sum_c gamma_c · log( mean_{i : y_i != c} exp(f_c(x_i)) )

    computed with the log-sum-exp trick over the current batch. Classes for which every sample of the batch has
    label ``c`` contribute 0.

    Returns:
        (tuple): ``(loss, grad_logits)``.
    """
    labels = np.asarray(labels, dtype=np.int64)
    _check_batch("gc_penalty", logits, labels)
    num_classes = logits.shape[1]
    gamma = np.asarray(stats.gamma, dtype=np.float64)

    mask = labels[:, None] != np.arange(num_classes)[None, :]
    counts = mask.sum(axis=0)
    valid = counts > 0
    column_max = np.where(mask, logits, -np.inf).max(axis=0)
    column_max = np.where(valid, column_max, 0.0)
    weights = np.where(mask, np.exp(logits - column_max), 0.0)
    sums = weights.sum(axis=0)

    safe_sums = np.where(valid, sums, 1.0)
    safe_counts = np.where(valid, counts, 1)
    log_mean_exp = column_max + np.log(safe_sums / safe_counts)
    loss = float(np.sum(np.where(valid, gamma * log_mean_exp, 0.0)))
    grad = np.where(valid, gamma, 0.0)[None, :] * weights / safe_sums[None, :]
    return loss, grad


def ad_penalty(local_logits, global_logits, stats):
    """
    Alignment distillation towards the teacher on the missing labels ``M``::

        L_ad = mean_i sum_{c in M} s_g(x_i)_c · log( s_g(x_i)_c / s_l(x_i)_c )

    where ``s_g`` and ``s_l`` are the softmax over all classes of the teacher and local logits. The teacher logits
    are constants; the gradient flows into the local logits only.

    Returns:
        (tuple): ``(loss, grad_local_logits)``.

    Raises:
        LogitShapeMismatch: if both logit tensors differ in shape.
    """
    if local_logits.shape != global_logits.shape or local_logits.ndim != 2:
        raise custom_exception.LogitShapeMismatch("ad_penalty", local_logits.shape, global_logits.shape)
    batch_size = local_logits.shape[0]
    missing = sorted(stats.missing)
    if not missing:
        return 0.0, np.zeros_like(local_logits)

    teacher_log_probs = log_softmax(global_logits)[:, missing]
    teacher_probs = np.exp(teacher_log_probs)
    local_log_probs = log_softmax(local_logits)
    divergence = teacher_probs * (teacher_log_probs - local_log_probs[:, missing])
    loss = float(np.mean(divergence.sum(axis=1)))

    grad = teacher_probs.sum(axis=1, keepdims=True) * np.exp(local_log_probs)
    grad[:, missing] -= teacher_probs
    return loss, grad / batch_size


def fedlec_loss(local_logits, global_logits, labels, stats, cfg):
    """
    Evaluates the local objective selected by ``cfg.variant``:

    - FEDLEC: ``calibrated_ce + theta·gc_penalty + lambda·ad_penalty`` (with the ablation switches applied to
      the weights);
    - FEDAVG / FEDPROX: plain cross-entropy (the proximal term acts on the parameters, see ``prox_term()``).

    Returns:
        (LossBreakdown): every term, the effective weights and the gradient of the total.

    Raises:
        MissingTeacherLogits: if the variant is FEDLEC and ``global_logits`` is None.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if cfg.variant != Algorithm.FEDLEC:
        lc, grad = cross_entropy(local_logits, labels)
        return LossBreakdown(total=lc, lc=lc, lgc=0.0, lad=0.0, grad_logits=grad)

    if global_logits is None:
        raise custom_exception.MissingTeacherLogits()
    lc, grad = calibrated_ce(local_logits, labels, stats)
    lgc, grad_gc = gc_penalty(local_logits, labels, stats)
    lad, grad_ad = ad_penalty(local_logits, global_logits, stats)

    theta = cfg.effective_theta
    lambda_ = cfg.effective_lambda
    if theta:
        grad = grad + theta * grad_gc
    if lambda_:
        grad = grad + lambda_ * grad_ad
    total = lc + theta * lgc + lambda_ * lad
    return LossBreakdown(total=total, lc=lc, lgc=lgc, lad=lad, grad_logits=grad, theta=theta, lambda_=lambda_)


def prox_term(w, w_global, mu):
    """
    FedProx proximal term ``(mu/2)·||w - w_global||²`` and its gradient ``mu·(w - w_global)``.

    Raises:
        LayoutMismatch: if the parameter layouts differ.
    """
    w.check_layout(w_global)
    diff = w.data - w_global.data
    loss = 0.5 * mu * float(np.dot(diff, diff))
    return loss, ParamVector(mu * diff, w.layout)

"""Self-distillation branch for config C: the discriminator serves as its
own teacher (centered, sharpened, stop-gradient) and student (plain
softmax), trained toward agreement across augmented views.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ContractError
from .tensor import Tensor, no_grad


@dataclass
class DinoState:
    """Running center plus sharpening temperature and center momentum."""

    center: np.ndarray
    temperature: float = 0.1
    center_momentum: float = 0.9

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=np.float64)
        if self.temperature <= 0:
            raise ContractError(f"teacher temperature must be positive, got {self.temperature}")
        if not 0.0 <= self.center_momentum < 1.0:
            raise ContractError(f"center momentum must be in [0, 1), got {self.center_momentum}")

    @classmethod
    def fresh(cls, cardinality, temperature=0.1, center_momentum=0.9):
        return cls(np.zeros(cardinality), temperature, center_momentum)


def _softmax_rows(v):
    e = np.exp(v - v.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def run_teacher(logits, state):
    """Centered, sharpened softmax of teacher logits; detached.

    Also advances the center EMA using the batch mean of the post-softmax
    outputs, so the returned batch reflects the center *before* the update.
    """
    probs = _softmax_rows((logits.data - state.center) / state.temperature)
    batch_center = probs.mean(axis=0)
    state.center = state.center_momentum * state.center + (1.0 - state.center_momentum) * batch_center
    return Tensor(probs)


def run_student(logits):
    """Plain softmax over class logits, gradient flows to the discriminator."""
    return logits.softmax(axis=1)


def dino_loss(teacher_probs, student_probs):
    """Teacher-to-student cross-entropy, averaged over the batch."""
    if teacher_probs.data.shape != student_probs.data.shape:
        raise ContractError(
            f"dino_loss: teacher {teacher_probs.data.shape} vs student {student_probs.data.shape}"
        )
    if teacher_probs.requires_grad:
        raise ContractError("dino_loss: teacher distribution must be detached")
    log_student = (student_probs + 1e-12).log()
    return -(teacher_probs * log_student).sum(axis=1).mean()


def dino_term_for_step(real_views, fake_views, net, state):
    """Distillation term of one training step.

    Each argument is a pair of augmented views of the same batch; the
    teacher consumes the first view (real batch first, then fake, each
    advancing the center once), the student the second.
    """
    term = None
    for view_t, view_s in (real_views, fake_views):
        with no_grad():
            teacher = run_teacher(net.logits(_as_tensor(view_t)), state)
        student = run_student(net.logits(_as_tensor(view_s)))
        loss = dino_loss(teacher, student)
        term = loss if term is None else term + loss
    return term * 0.5


def _as_tensor(x):
    return x if isinstance(x, Tensor) else Tensor(x)

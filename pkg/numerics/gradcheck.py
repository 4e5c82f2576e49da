"""
MOTIONTOK Gradient Check
Central finite differences against autograd, in double precision.
"""

import logging
from typing import Callable, Dict, List, Optional, Sequence, Union, Any
from dataclasses import dataclass

import torch

from errors import NumericError

logger = logging.getLogger(__name__)

ParamSet = Union[Sequence[torch.Tensor], Dict[str, torch.Tensor]]


@dataclass
class GradCheckReport:
    """Outcome of one gradient check."""

    max_rel_error: float
    max_abs_error: float
    passed: bool
    worst_parameter: str
    checked_entries: int
    tol: float

    def to_dict(self) -> Dict[str, Any]:
        return {
            'max_rel_error': self.max_rel_error,
            'max_abs_error': self.max_abs_error,
            'passed': self.passed,
            'worst_parameter': self.worst_parameter,
            'checked_entries': self.checked_entries,
            'tol': self.tol,
        }


def _named(params: ParamSet) -> List[tuple]:
    if isinstance(params, dict):
        return list(params.items())
    return [(f"param{i}", p) for i, p in enumerate(params)]


def _evaluate(f: Callable[[], torch.Tensor]) -> torch.Tensor:
    value = f()
    if value.numel() != 1:
        raise NumericError(f"Gradient check needs a scalar function, got shape {tuple(value.shape)}")
    if not torch.isfinite(value).all():
        raise NumericError("Function value is not finite")
    return value.reshape(())


def grad_check(
    f: Callable[[], torch.Tensor],
    params: ParamSet,
    eps: float = 1e-3,
    tol: float = 1e-3,
    max_entries: Optional[int] = None,
    floor: float = 1e-5,
    seed: int = 0,
) -> GradCheckReport:
    """
    Compare the autograd gradient of `f` with central differences.

    `f` takes no arguments and must read the tensors in `params`, which are
    perturbed in place. Parameters should be float64 leaves with
    requires_grad set. The relative error of an entry is
    |analytic - numeric| / max(|analytic|, |numeric|, floor).

    Args:
        f: Scalar function of the parameters
        params: Tensors (list or name -> tensor)
        eps: Perturbation size
        tol: Pass threshold on the max relative error
        max_entries: Entries checked per tensor (random subset), None for all
        floor: Denominator floor for near-zero gradients
        seed: Subset selection seed

    Returns:
        GradCheckReport
    """
    named = _named(params)
    for name, p in named:
        if p.dtype != torch.float64:
            logger.warning(f"Gradient check on {name} in {p.dtype}; float64 recommended")

    tensors = [p for _, p in named]
    loss = _evaluate(f)
    grads = torch.autograd.grad(loss, tensors, allow_unused=True)

    generator = torch.Generator().manual_seed(seed)
    max_rel, max_abs, worst, checked = 0.0, 0.0, "", 0

    for (name, p), g in zip(named, grads):
        analytic = torch.zeros_like(p) if g is None else g.detach()
        flat = p.data.view(-1)
        entries = torch.arange(flat.numel())
        if max_entries is not None and flat.numel() > max_entries:
            entries = torch.randperm(flat.numel(), generator=generator)[:max_entries]

        for i in entries.tolist():
            original = flat[i].item()
            with torch.no_grad():
                flat[i] = original + eps
                plus = _evaluate(f).item()
                flat[i] = original - eps
                minus = _evaluate(f).item()
                flat[i] = original
            numeric = (plus - minus) / (2 * eps)
            a = analytic.reshape(-1)[i].item()
            abs_err = abs(a - numeric)
            rel_err = abs_err / max(abs(a), abs(numeric), floor)
            checked += 1
            if rel_err > max_rel:
                max_rel, worst = rel_err, f"{name}[{i}]"
            max_abs = max(max_abs, abs_err)

    report = GradCheckReport(
        max_rel_error=max_rel,
        max_abs_error=max_abs,
        passed=max_rel < tol,
        worst_parameter=worst,
        checked_entries=checked,
        tol=tol,
    )
    logger.debug(f"Gradient check: {checked} entries, max rel error {max_rel:.3e} ({worst})")
    return report

"""The two alternating updates of the adversarial game."""

import math

import torch

from src.blackbox import CL_PHASE, GENERATOR_PHASE, QueryApi, TrainingDivergence, WhiteBoxTeacher
from src.losses import (
    LossReport,
    class_balance_loss,
    cl_total_loss,
    cooperative_diversity_loss,
    distillation_loss,
    generator_total_loss,
    mean_prediction,
    memory_replay_loss,
    network_similarity_loss,
    per_sample_l1,
)
from src.memory import sample_minibatch
from src.trainer.state import RunState
from src.utils.logger import setup_logger
from src.zograd import ZerothOrderError, estimate_input_gradient, exact_input_gradient


logger = setup_logger(__name__)


def _scalar(value) -> float:
    return value.detach().item() if torch.is_tensor(value) else float(value)


def _finite(value) -> bool:
    return value is None or math.isfinite(_scalar(value))


def generator_step(state: RunState, api: QueryApi) -> LossReport:
    """One update of both generators.

    The adversarial term's image gradient is estimated from API queries (or
    computed exactly for a white-box teacher) and chained through each
    generator; diversity and balance terms are differentiated directly.
    """
    cfg, model, gens, k = state.cfg, state.model, state.generators, state.task_id
    queries_before = api.ledger.total_queries

    model.eval()
    gens.train()
    z = gens.gen_a.sample_latent(cfg.batch_size, state.rng, state.device)
    imgs_a, imgs_b = gens(z)
    images = torch.cat([imgs_a, imgs_b])

    if isinstance(api, WhiteBoxTeacher):
        def adversarial_at(x):
            return -per_sample_l1(api.logits_with_grad(x), model(x, k))

        input_grad, baseline = exact_input_gradient(adversarial_at, images)
    else:
        def adversarial_at(x):
            return -per_sample_l1(api.query(x, phase=GENERATOR_PHASE), model(x, k))

        try:
            input_grad, baseline = estimate_input_gradient(adversarial_at, images, cfg.zo, state.rng)
        except ZerothOrderError as e:
            logger.warning(f"Task {k}: generator step skipped ({e})")
            state.log.record_event(k, "generator_step_skipped", reason=str(e))
            model.train()
            return None

    L_G = baseline.mean()
    L_C = cooperative_diversity_loss(imgs_a, imgs_b) if cfg.ablation.use_diversity else None
    L_B = None
    if cfg.ablation.use_balance:
        L_B = class_balance_loss(mean_prediction(model(imgs_a, k)), mean_prediction(model(imgs_b, k)))
    regularizer = (L_C if L_C is not None else 0.0) + (L_B if L_B is not None else 0.0)

    # Mean over the 2B samples: each sample's loss gradient is scaled by 1/(2B).
    upstream = input_grad / len(images)
    surrogate = (images * upstream.detach()).sum() + cfg.lambda_g * regularizer

    state.generator_optimizer.zero_grad()
    if torch.is_tensor(surrogate) and surrogate.requires_grad:
        surrogate.backward()
    grads_finite = all(
        p.grad is None or torch.isfinite(p.grad).all() for p in gens.parameters()
    )
    model.zero_grad(set_to_none=True)
    model.train()
    if not grads_finite or not torch.isfinite(upstream).all():
        logger.warning(f"Task {k}: non-finite generator gradient, step skipped")
        state.log.record_event(k, "generator_step_skipped", reason="non-finite gradient")
        state.generator_optimizer.zero_grad()
        return None
    state.generator_optimizer.step()

    values = {"L_G": _scalar(L_G)}
    if L_C is not None:
        values["L_C"] = _scalar(L_C)
    if L_B is not None:
        values["L_B"] = _scalar(L_B)
    values["total"] = _scalar(generator_total_loss(
        L_G, L_C if L_C is not None else 0.0, L_B if L_B is not None else 0.0, cfg.lambda_g
    ))
    report = LossReport(
        task_id=k,
        phase="generator",
        batch_size=len(images),
        values=values,
        epoch=state.epoch,
        queries=api.ledger.total_queries - queries_before,
    )
    state.log.append(report)
    return report


def cl_step(state: RunState, api: QueryApi) -> LossReport:
    """One update of the continual learner on a fresh generated batch (+ memory from task 2 on)."""
    cfg, model, gens, k = state.cfg, state.model, state.generators, state.task_id
    queries_before = api.ledger.total_queries

    with torch.no_grad():
        z = gens.gen_a.sample_latent(cfg.batch_size // 2, state.rng, state.device)
        imgs_a, imgs_b = gens(z)
        images = torch.cat([imgs_a, imgs_b])
    api_logits = api.query(images, phase=CL_PHASE)

    model.train()
    L_fcl = distillation_loss(api_logits, model(images, k))
    L_M = L_S = None
    use_replay, use_similarity = cfg.ablation.use_replay, cfg.ablation.use_similarity
    if k > 1 and (use_replay or use_similarity):
        replay = sample_minibatch(state.memory, cfg.replay_batch_size, state.rng)
        if use_replay:
            L_M = memory_replay_loss(model, replay)
        if use_similarity:
            memory_images = torch.stack([e.image for e in replay]).to(state.device)
            L_S = network_similarity_loss(model, state.snapshot, torch.cat([images, memory_images]))
    total = cl_total_loss(L_fcl, L_M, L_S, cfg.lambda_cl, k)

    if not all(_finite(v) for v in (L_fcl, L_M, L_S, total)):
        message = (
            f"Task {k}, epoch {state.epoch}: non-finite CL loss "
            f"(L_fcl={_scalar(L_fcl)}, L_M={None if L_M is None else _scalar(L_M)}, "
            f"L_S={None if L_S is None else _scalar(L_S)})"
        )
        logger.error(message)
        raise TrainingDivergence(message)

    state.cl_optimizer.zero_grad()
    total.backward()
    state.cl_optimizer.step()

    values = {"L_fcl": _scalar(L_fcl), "total": _scalar(total)}
    if L_M is not None:
        values["L_M"] = _scalar(L_M)
    if L_S is not None:
        values["L_S"] = _scalar(L_S)
    report = LossReport(
        task_id=k,
        phase="cl",
        batch_size=len(images),
        values=values,
        epoch=state.epoch,
        queries=api.ledger.total_queries - queries_before,
    )
    state.log.append(report)
    return report
